import os
import subprocess
import textwrap
from pathlib import Path

import pytest

from hermes_pipeline.logs import shutdown_logging

# (author name, author email, committer name, committer email, date)
FIXTURE_COMMITS = [
    ("Alice Example", "alice@example.org", "Alice Example", "alice@example.org", "2024-01-01T10:00:00+00:00"),
    ("Bob Builder", "bob@example.org", "Alice Example", "alice@example.org", "2024-01-02T10:00:00+00:00"),
    ("alice", "Alice@Example.org", "alice", "Alice@Example.org", "2024-01-03T10:00:00+00:00"),
    ("dependabot[bot]", "49699333+dependabot[bot]@users.noreply.github.com",
     "Carol Committer", "carol@example.org", "2024-01-04T10:00:00+00:00"),
    ("Bob Builder", "bob@example.org", "Bob Builder", "bob@example.org", "2024-01-05T10:00:00+00:00"),
]

CITATION_CFF = textwrap.dedent("""\
    cff-version: 1.2.0
    message: If you use this software, please cite it as below.
    # kept as is by post-processing
    title: fixture-tool
    version: 1.0.0
    abstract: A tool used as a test fixture.
    date-released: "2024-01-05"
    license: MIT
    repository-code: https://git.example.org/fixture-tool
    keywords:
      - metadata
      - testing
    authors:
      - given-names: Alice
        family-names: Example
        email: alice@example.org
        orcid: https://orcid.org/0000-0002-1825-0097
      - given-names: Dana
        family-names: Doc
        affiliation: Example University
""")

PYPROJECT = textwrap.dedent("""\
    [project]
    name = "fixture-tool"
    version = "1.0.1"
    description = "Fixture tool for tests"
    license = "MIT"
    authors = [{name = "Alice Example", email = "alice@example.org"}]
    keywords = ["metadata", "packaging"]

    [project.urls]
    Repository = "https://git.example.org/fixture-tool"
""")

HERMES_TOML = textwrap.dedent("""\
    # hermes configuration for the fixture repository
    [harvest]
    sources = ["cff", "git", "manifest"]

    [deposit]
    target = "file"

    [postprocess]
    execute = []
""")


def git(repo, *args, env=None):
    full_env = dict(os.environ, GIT_CONFIG_GLOBAL=os.devnull, GIT_CONFIG_NOSYSTEM="1", **(env or {}))
    return subprocess.run(["git", "-C", str(repo), *args], check=True, capture_output=True,
                          text=True, env=full_env).stdout


def make_fixture_repo(path, config=HERMES_TOML):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    git(path, "init", "-q", "-b", "main")
    files = {"CITATION.cff": CITATION_CFF, "pyproject.toml": PYPROJECT}
    for i, (an, ae, cn, ce, when) in enumerate(FIXTURE_COMMITS):
        name, text = list(files.items())[i] if i < len(files) else (f"file{i}.txt", f"change {i}\n")
        (path / name).write_text(text, encoding="utf-8")
        git(path, "add", name)
        git(path, "commit", "-q", "-m", f"commit {i}", env={
            "GIT_AUTHOR_NAME": an, "GIT_AUTHOR_EMAIL": ae, "GIT_AUTHOR_DATE": when,
            "GIT_COMMITTER_NAME": cn, "GIT_COMMITTER_EMAIL": ce, "GIT_COMMITTER_DATE": when,
        })
    if config is not None:
        (path / "hermes.toml").write_text(config, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def _fixture_template(tmp_path_factory):
    return make_fixture_repo(tmp_path_factory.mktemp("template") / "repo")


@pytest.fixture
def fixture_repo(_fixture_template, tmp_path):
    """A fresh copy of the fixture repository (5 commits, 3 people, 1 alias, 1 bot)."""
    target = tmp_path / "repo"
    subprocess.run(["cp", "-a", str(_fixture_template), str(target)], check=True)
    return target


@pytest.fixture(autouse=True)
def _isolate(monkeypatch):
    for name in list(os.environ):
        if name.startswith("HERMES_"):
            monkeypatch.delenv(name)
    yield
    shutdown_logging()


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
