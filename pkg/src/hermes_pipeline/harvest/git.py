"""Harvest authors and contributors from Git history.

Identities are merged on the lower-cased email address.  The displayed name
is the spelling used most often (author and committer occurrences both
count), ties going to the most recently used spelling.  Commit authors get
the ``author`` role, everybody who authored or committed is a contributor.
Bot accounts are left out of both lists and reported in the meta-metadata.
"""

from __future__ import annotations

import os
import re
import subprocess
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..config import PluginSettings
from ..errors import EmptyHistory, HarvestError, NotARepository, UnknownBranch
from ..model import HarvestResult, MetadataRecord, PersonRef
from ..plugins import HarvestPlugin

_FIELD_SEP = "\x1f"
_RECORD_SEP = "\x1e"
_LOG_FORMAT = _FIELD_SEP.join(["%H", "%an", "%ae", "%at", "%cn", "%ce", "%ct"]) + _RECORD_SEP

_NOREPLY_LOCALPARTS = {"noreply", "no-reply", "no_reply"}


class GitSettings(PluginSettings):
    branch: str | None = None
    path: str = "."


@dataclass
class GitIdentity:
    email: str
    names: Counter = field(default_factory=Counter)
    name_last_used: dict = field(default_factory=dict)
    commit_count_as_author: int = 0
    commit_count_as_committer: int = 0
    first_seen: int | None = None
    last_seen: int | None = None

    @property
    def name(self):
        # most frequent spelling, then most recent use, then alphabetical
        return max(self.names, key=lambda n: (self.names[n], self.name_last_used[n], n))

    def record(self, name, timestamp, as_author):
        self.names[name] += 1
        self.name_last_used[name] = max(self.name_last_used.get(name, timestamp), timestamp)
        if as_author:
            self.commit_count_as_author += 1
        else:
            self.commit_count_as_committer += 1
        self.first_seen = timestamp if self.first_seen is None else min(self.first_seen, timestamp)
        self.last_seen = timestamp if self.last_seen is None else max(self.last_seen, timestamp)

    def to_json(self):
        def iso(ts):
            return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()

        return {
            "email": self.email,
            "name": self.name,
            "spellings": dict(sorted(self.names.items())),
            "commit_count_as_author": self.commit_count_as_author,
            "commit_count_as_committer": self.commit_count_as_committer,
            "first_seen": iso(self.first_seen),
            "last_seen": iso(self.last_seen),
        }


def is_bot(name, email):
    if "[bot]" in name.lower() or "[bot]" in email.lower():
        return True
    return email.split("@", 1)[0].lower() in _NOREPLY_LOCALPARTS


def _git(repo, *args):
    env = dict(os.environ, LC_ALL="C", GIT_TERMINAL_PROMPT="0")
    try:
        return subprocess.run(
            ["git", "-C", str(repo), *args],
            capture_output=True, text=True, encoding="utf-8", errors="replace", env=env,
        )
    except FileNotFoundError as exc:
        raise HarvestError("the git executable is not available") from exc


def _resolve_ref(repo, branch):
    probe = _git(repo, "rev-parse", "--is-inside-work-tree")
    if probe.returncode != 0:
        probe = _git(repo, "rev-parse", "--git-dir")
        if probe.returncode != 0:
            raise NotARepository(f"{repo} is not a Git repository")
    if _git(repo, "rev-parse", "--verify", "-q", "HEAD").returncode != 0 and \
            not _git(repo, "for-each-ref", "--count=1", "refs/heads").stdout.strip():
        raise EmptyHistory(f"repository {repo} has no commits")
    if branch:
        if _git(repo, "rev-parse", "--verify", "-q", f"refs/heads/{branch}^{{commit}}").returncode != 0:
            raise UnknownBranch(f"branch {branch!r} does not exist in {repo}")
        return branch, f"refs/heads/{branch}"
    current = _git(repo, "symbolic-ref", "-q", "--short", "HEAD")
    name = current.stdout.strip() if current.returncode == 0 else "HEAD"
    if _git(repo, "rev-parse", "--verify", "-q", "HEAD").returncode != 0:
        raise EmptyHistory(f"branch {name!r} of {repo} has no commits")
    return name, "HEAD"


def read_commits(repo, ref):
    out = _git(repo, "log", f"--format={_LOG_FORMAT}", ref, "--")
    if out.returncode != 0:
        raise HarvestError(f"git log failed: {out.stderr.strip()}")
    commits = []
    for chunk in out.stdout.split(_RECORD_SEP):
        chunk = chunk.strip("\n")
        if not chunk:
            continue
        sha, an, ae, at, cn, ce, ct = chunk.split(_FIELD_SEP)
        commits.append((sha, an, ae, int(at), cn, ce, int(ct)))
    return commits


def merge_identities(commits):
    """Group author/committer occurrences by email; returns (people, bots)."""
    people: dict[str, GitIdentity] = {}
    bots: dict[str, GitIdentity] = {}
    for _sha, an, ae, at, cn, ce, ct in commits:
        for name, email, ts, as_author in ((an, ae, at, True), (cn, ce, ct, False)):
            key = email.strip().lower()
            target = bots if is_bot(name, key) else people
            ident = target.setdefault(key, GitIdentity(email=key))
            ident.record(name.strip(), ts, as_author)
    return people, bots


def identities_to_people(people):
    ordered = sorted(people.values(), key=lambda i: (i.first_seen, i.email))
    authors, contributors = [], []
    for ident in ordered:
        roles = {"contributor"}
        if ident.commit_count_as_author:
            roles.add("author")
        person = PersonRef(full_name=ident.name, email=ident.email, roles=frozenset(roles))
        contributors.append(person)
        if ident.commit_count_as_author:
            authors.append(person)
    return authors, contributors


def harvest_git(ctx, repo=".", branch=None):
    repo = Path(repo)
    branch_name, ref = _resolve_ref(repo, branch)
    commits = read_commits(repo, ref)
    if not commits:
        raise EmptyHistory(f"branch {branch_name!r} of {repo} has no commits")
    people, bots = merge_identities(commits)
    authors, contributors = identities_to_people(people)

    fields = {}
    if authors:
        fields["author"] = authors
    if contributors:
        fields["contributor"] = contributors
    local_path = ctx.relative(repo) if ctx is not None else str(repo)
    meta = {
        "local_path": local_path,
        "branch": branch_name,
        "head": commits[0][0],
        "commit_count": len(commits),
        "identities": [people[k].to_json() for k in sorted(people)],
        "merged_aliases": {k: sorted(i.names) for k, i in sorted(people.items()) if len(i.names) > 1},
        "bots": [bots[k].to_json() for k in sorted(bots)],
    }
    return HarvestResult(MetadataRecord(fields), meta)


class GitHarvestPlugin(HarvestPlugin):
    settings_class = GitSettings

    def __call__(self, ctx):
        settings = ctx.settings or GitSettings()
        return harvest_git(ctx, ctx.path(settings.path), settings.branch)
