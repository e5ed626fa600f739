import json
import textwrap

import pytest
from hypothesis import given, settings, strategies as st

from hermes_pipeline.config import PipelineConfig
from hermes_pipeline.errors import (
    CffValidationError,
    EmptyHistory,
    MissingProjectTable,
    NotARepository,
    ParseError,
    TomlParseError,
    UnknownBranch,
    YamlParseError,
)
from hermes_pipeline.harvest.cff import CROSSWALK, cff_to_codemeta, harvest_cff
from hermes_pipeline.harvest.codemeta import harvest_codemeta
from hermes_pipeline.harvest.funding import harvest_funding
from hermes_pipeline.harvest.git import harvest_git, identities_to_people, is_bot, merge_identities
from hermes_pipeline.harvest.manifest import harvest_manifest
from hermes_pipeline.model import HarvestResult, MetadataRecord, Node, PersonRef, serialize
from hermes_pipeline.plugins import default_registry, make_context

from conftest import git


def person(name, email, *roles):
    return PersonRef(full_name=name, email=email, roles=frozenset(roles))


# hand-computed from FIXTURE_COMMITS in conftest
EXPECTED_GIT_AUTHORS = (
    person("Alice Example", "alice@example.org", "author", "contributor"),
    person("Bob Builder", "bob@example.org", "author", "contributor"),
)
EXPECTED_GIT_CONTRIBUTORS = EXPECTED_GIT_AUTHORS + (
    person("Carol Committer", "carol@example.org", "contributor"),
)


# -- git ------------------------------------------------------------------------

def test_git_fixture_lists(fixture_repo):
    result = harvest_git(None, fixture_repo)
    assert result.metadata["author"] == EXPECTED_GIT_AUTHORS
    assert result.metadata["contributor"] == EXPECTED_GIT_CONTRIBUTORS
    assert set(result.metadata.fields) == {"author", "contributor"}
    meta = result.meta
    assert meta["branch"] == "main"
    assert meta["commit_count"] == 5
    assert meta["head"] == git(fixture_repo, "rev-parse", "HEAD").strip()
    assert meta["merged_aliases"] == {"alice@example.org": ["Alice Example", "alice"]}
    assert [b["name"] for b in meta["bots"]] == ["dependabot[bot]"]


def test_git_single_commit(tmp_path):
    repo = tmp_path / "one"
    repo.mkdir()
    git(repo, "init", "-q", "-b", "trunk")
    (repo / "a").write_text("a")
    git(repo, "add", "a")
    git(repo, "commit", "-q", "-m", "x", env={"GIT_AUTHOR_NAME": "Alice", "GIT_AUTHOR_EMAIL": "a@x",
                                             "GIT_COMMITTER_NAME": "Alice", "GIT_COMMITTER_EMAIL": "a@x"})
    result = harvest_git(None, repo)
    alice = person("Alice", "a@x", "author", "contributor")
    assert result.metadata["author"] == (alice,)
    assert result.metadata["contributor"] == (alice,)
    assert result.meta["branch"] == "trunk"


def test_git_name_spelling_majority(tmp_path):
    repo = tmp_path / "r"
    repo.mkdir()
    git(repo, "init", "-q", "-b", "main")
    spellings = [("A. Person", "2024-01-01"), ("Alice Person", "2024-01-02"), ("Alice Person", "2024-01-03")]
    for i, (name, when) in enumerate(spellings):
        (repo / f"f{i}").write_text(str(i))
        git(repo, "add", f"f{i}")
        git(repo, "commit", "-q", "-m", str(i), env={
            "GIT_AUTHOR_NAME": name, "GIT_AUTHOR_EMAIL": "a@x", "GIT_AUTHOR_DATE": f"{when}T00:00:00Z",
            "GIT_COMMITTER_NAME": name, "GIT_COMMITTER_EMAIL": "a@x", "GIT_COMMITTER_DATE": f"{when}T00:00:00Z"})
    result = harvest_git(None, repo)
    assert result.metadata["author"] == (person("Alice Person", "a@x", "author", "contributor"),)


def test_git_branch_selection(fixture_repo):
    git(fixture_repo, "checkout", "-q", "-b", "side", "HEAD~3")
    assert harvest_git(None, fixture_repo).meta["commit_count"] == 2
    assert harvest_git(None, fixture_repo, "main").meta["commit_count"] == 5
    with pytest.raises(UnknownBranch):
        harvest_git(None, fixture_repo, "nope")


def test_git_errors(tmp_path):
    with pytest.raises(NotARepository):
        harvest_git(None, tmp_path)
    git(tmp_path, "init", "-q")
    with pytest.raises(EmptyHistory):
        harvest_git(None, tmp_path)


def test_git_does_not_touch_repository(fixture_repo):
    before = git(fixture_repo, "status", "--porcelain")
    harvest_git(None, fixture_repo)
    assert git(fixture_repo, "status", "--porcelain") == before


@pytest.mark.parametrize("name,email,bot", [
    ("dependabot[bot]", "49699333+dependabot[bot]@users.noreply.github.com", True),
    ("GitHub", "noreply@github.com", True),
    ("Alice", "123+alice@users.noreply.github.com", False),
    ("Alice", "alice@example.org", False),
])
def test_bot_rule(name, email, bot):
    assert is_bot(name, email) is bot


_COMMITS = [
    ("c1", "Alice", "a@x", 1, "Alice", "a@x", 1),
    ("c2", "alice", "A@X", 2, "Bob", "b@x", 2),
    ("c3", "Bob", "b@x", 3, "Bob", "b@x", 3),
    ("c4", "Carol", "c@x", 4, "Bob", "b@x", 4),
    ("c5", "renovate[bot]", "bot@renovate", 5, "Carol", "c@x", 5),
]


@settings(max_examples=60, deadline=None)
@given(st.permutations(_COMMITS))
def test_identity_merge_is_order_independent(commits):
    expected = identities_to_people(merge_identities(_COMMITS)[0])
    assert identities_to_people(merge_identities(commits)[0]) == expected


# -- CFF ------------------------------------------------------------------------

def test_cff_fixture_crosswalk(fixture_repo):
    result = harvest_cff(None, fixture_repo / "CITATION.cff")
    m = result.metadata
    assert m["name"] == "fixture-tool"
    assert m["version"] == "1.0.0"
    assert m["description"] == "A tool used as a test fixture."
    assert m["datePublished"] == "2024-01-05"
    assert m["license"] == "https://spdx.org/licenses/MIT"
    assert m["codeRepository"] == "https://git.example.org/fixture-tool"
    assert m["keywords"] == ("metadata", "testing")
    assert m["author"] == (
        PersonRef(given_names="Alice", family_names="Example", email="alice@example.org",
                  orcid="https://orcid.org/0000-0002-1825-0097", roles=frozenset({"author"})),
        PersonRef(given_names="Dana", family_names="Doc", roles=frozenset({"author"}),
                  extra={"affiliation": Node("Organization", {"legalName": "Example University"})}),
    )
    assert result.meta["validation"] == "valid"
    assert result.meta["unmapped"] == ["cff-version", "message"]


def test_crosswalk_table():
    # CFF key -> CodeMeta term, as in the CodeMeta project's crosswalk
    assert CROSSWALK["title"] == "name"
    assert CROSSWALK["abstract"] == "description"
    assert CROSSWALK["date-released"] == "datePublished"
    assert CROSSWALK["repository-code"] == "codeRepository"
    assert CROSSWALK["repository-artifact"] == "downloadUrl"


def test_cff_doi_and_contact():
    fields, unmapped = cff_to_codemeta({
        "cff-version": "1.2.0", "message": "m", "title": "t",
        "authors": [{"name": "The Team"}], "doi": "10.5281/zenodo.123",
        "contact": [{"given-names": "Eve", "family-names": "Ops", "email": "eve@x.org"}],
        "license": ["MIT", "Apache-2.0"], "custom": 1,
    })
    assert fields["identifier"] == "https://doi.org/10.5281/zenodo.123"
    assert fields["maintainer"][0].email == "eve@x.org"
    assert "maintainer" in fields["maintainer"][0].roles
    assert fields["license"] == ["https://spdx.org/licenses/MIT", "https://spdx.org/licenses/Apache-2.0"]
    assert "custom" in unmapped
    record = MetadataRecord(fields)
    assert isinstance(record["author"][0], Node) and record["author"][0].type == "Organization"


MISSING_MESSAGE = textwrap.dedent("""\
    cff-version: 1.2.0
    title: x
    authors:
      - name: Team
""")


def test_cff_validation_flag(tmp_path):
    path = tmp_path / "CITATION.cff"
    path.write_text(MISSING_MESSAGE)
    with pytest.raises(CffValidationError, match="message"):
        harvest_cff(None, path)
    result = harvest_cff(None, path, enable_validation=False)
    assert result.meta["validation"] == "unvalidated"
    assert result.metadata["name"] == "x"


def test_cff_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        harvest_cff(None, tmp_path / "missing.cff")
    bad = tmp_path / "bad.cff"
    bad.write_text("title: [unclosed\n")
    with pytest.raises(YamlParseError):
        harvest_cff(None, bad)


def test_cff_plugin_reads_settings(fixture_repo):
    cfg = PipelineConfig({"harvest": {"cff": {"enable_validation": False}}})
    (fixture_repo / "CITATION.cff").write_text(MISSING_MESSAGE)
    ctx = make_context(cfg, fixture_repo, "harvest", "cff", default_registry(entry_points=False))
    result = default_registry(entry_points=False).lookup("harvest", "cff").factory()(ctx)
    assert result.meta["validation"] == "unvalidated"
    assert result.meta["local_path"] == "CITATION.cff"


# -- manifest ---------------------------------------------------------------------

def test_manifest_fixture(fixture_repo):
    result = harvest_manifest(None, fixture_repo / "pyproject.toml")
    m = result.metadata
    assert m["name"] == "fixture-tool"
    assert m["version"] == "1.0.1"
    assert m["author"] == (person("Alice Example", "alice@example.org", "author"),)
    assert m["license"] == "https://spdx.org/licenses/MIT"
    assert m["keywords"] == ("metadata", "packaging")
    assert m["codeRepository"] == "https://git.example.org/fixture-tool"
    assert result.meta["missing"] == []


def test_manifest_missing_license_is_visible(tmp_path):
    path = tmp_path / "pyproject.toml"
    path.write_text('[project]\nname = "hermes"\nversion = "0.8.0"\n[project.urls]\nDocs = "https://d"\n')
    result = harvest_manifest(None, path)
    assert result.metadata["name"] == "hermes"
    assert result.metadata["version"] == "0.8.0"
    assert "license" not in result.metadata
    assert "license" in result.meta["missing"]
    assert "urls.Docs" in result.meta["unmapped"]


def test_manifest_errors(tmp_path):
    path = tmp_path / "pyproject.toml"
    path.write_text("[tool.x]\na = 1\n")
    with pytest.raises(MissingProjectTable):
        harvest_manifest(None, path)
    path.write_text("[project\n")
    with pytest.raises(TomlParseError):
        harvest_manifest(None, path)
    with pytest.raises(FileNotFoundError):
        harvest_manifest(None, tmp_path / "nope.toml")


# -- codemeta ---------------------------------------------------------------------

def test_codemeta_passthrough(tmp_path):
    record = MetadataRecord({"name": "x", "version": "1"})
    path = tmp_path / "codemeta.json"
    path.write_bytes(serialize(record))
    result = harvest_codemeta(None, path)
    assert result.metadata == record
    assert result.meta["context_warning"] is False


def test_codemeta_variant_context(tmp_path):
    path = tmp_path / "codemeta.json"
    path.write_text(json.dumps({"@context": "https://w3id.org/codemeta/3.0", "@type": "SoftwareSourceCode",
                                "name": "x", "author": {"@type": "Person", "name": "A"}}))
    result = harvest_codemeta(None, path)
    assert result.meta["context_warning"] is True
    assert result.metadata["author"] == (PersonRef(full_name="A", roles=frozenset({"author"})),)


def test_codemeta_not_json(tmp_path):
    path = tmp_path / "codemeta.json"
    path.write_text("name: x")
    with pytest.raises(ParseError):
        harvest_codemeta(None, path)


# -- funding --------------------------------------------------------------------

def _funding_ctx(tmp_path, section):
    cfg = PipelineConfig({"harvest": {"funding": section}} if section is not None else {})
    return make_context(cfg, tmp_path, "harvest", "funding", default_registry())


@pytest.mark.parametrize("section,present", [
    ({"grant_id": "ZT-I-PF-3-006"}, True),
    ({"grant_id": ""}, False),
    (None, False),
])
def test_funding(tmp_path, section, present):
    result = harvest_funding(_funding_ctx(tmp_path, section))
    assert isinstance(result, HarvestResult)
    if present:
        assert dict(result.metadata.fields) == {"funding": "ZT-I-PF-3-006"}
        assert result.meta["added"] is True
    else:
        assert dict(result.metadata.fields) == {}
        assert result.meta["added"] is False

