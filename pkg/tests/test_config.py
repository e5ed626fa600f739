import datetime
import json
import logging
import textwrap

import pytest
import tomlkit
from hypothesis import given, settings, strategies as st

from hermes_pipeline.config import (
    REDACTED,
    InvenioSettings,
    PipelineConfig,
    coerce,
    env_overrides,
    load_config,
    resolve,
)
from hermes_pipeline.errors import ConfigFileNotFound, EnumError, SchemaError, TomlParseError, UnknownPlugin


def write(tmp_path, text):
    path = tmp_path / "hermes.toml"
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def test_sources_kept_in_order(tmp_path):
    cfg = load_config(write(tmp_path, """
        [harvest]
        sources = ["cff", "codemeta", "git"]
    """))
    assert cfg.sources == ["cff", "codemeta", "git"]


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.sources == []
    assert cfg.deposit_target is None
    assert cfg.postprocess_execute == []


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileNotFound, match="hermes.toml"):
        load_config(tmp_path / "hermes.toml")


def test_bad_toml(tmp_path):
    with pytest.raises(TomlParseError):
        load_config(write(tmp_path, "[harvest\n"))


def test_access_right_enum(tmp_path):
    path = write(tmp_path, """
        [deposit.invenio_rdm]
        access_right = "public"
    """)
    with pytest.raises(EnumError) as info:
        load_config(path)
    message = str(info.value)
    assert "deposit.invenio_rdm.access_right" in message
    for value in ("open", "embargoed", "restricted", "closed"):
        assert value in message


def test_embargo_requires_date(tmp_path):
    with pytest.raises(SchemaError, match="embargo_date"):
        load_config(write(tmp_path, """
            [deposit.invenio_rdm]
            access_right = "embargoed"
        """))
    cfg = load_config(write(tmp_path, """
        [deposit.invenio_rdm]
        access_right = "embargoed"
        embargo_date = 2030-01-01
    """))
    settings = cfg.settings("deposit", "invenio_rdm", InvenioSettings)
    assert settings.embargo_date == datetime.date(2030, 1, 1)


def test_embargo_date_must_be_a_date(tmp_path):
    with pytest.raises(SchemaError, match="deposit.invenio_rdm.embargo_date"):
        load_config(write(tmp_path, """
            [deposit.invenio_rdm]
            access_right = "embargoed"
            embargo_date = "someday"
        """))


def test_restricted_requires_conditions(tmp_path):
    with pytest.raises(SchemaError, match="access_conditions"):
        load_config(write(tmp_path, """
            [deposit.invenio]
            access_right = "restricted"
        """))


def test_unknown_top_level_section_rejected(tmp_path):
    with pytest.raises(SchemaError, match="publish"):
        load_config(write(tmp_path, "[publish]\nx = 1\n"))


def test_unknown_plugin_keys_pass_through(tmp_path):
    cfg = load_config(write(tmp_path, """
        [harvest.funding]
        grant_id = "ZT-I-PF-3-006"
        extra_key = 3
        [deposit.invenio_rdm]
        custom = "kept"
    """))
    assert cfg.get("harvest.funding.extra_key") == 3
    assert cfg.settings("deposit", "invenio_rdm", InvenioSettings).model_extra == {"custom": "kept"}


def test_unknown_source_lists_available(tmp_path):
    with pytest.raises(UnknownPlugin) as info:
        load_config(write(tmp_path, '[harvest]\nsources = ["nope"]\n'))
    assert "cff" in str(info.value) and "git" in str(info.value)
    assert info.value.exit_code == 2


def test_precedence_examples(tmp_path):
    cfg = load_config(write(tmp_path, """
        [harvest.git]
        branch = "main"
        [deposit]
        target = "invenio_rdm"
    """))
    resolved = resolve(cfg, {"HERMES_HARVEST__GIT__BRANCH": "develop"}, {"deposit.target": "file"})
    assert resolved.get("harvest.git.branch") == "develop"
    assert resolved.deposit_target == "file"
    assert cfg.get("harvest.git.branch") == "main"


def test_env_token_is_redacted(tmp_path):
    cfg = load_config(write(tmp_path, "[deposit.invenio_rdm]\nsite_url = \"https://x.org\"\n"))
    resolved = resolve(cfg, {"HERMES_DEPOSIT__INVENIO_RDM__AUTH_TOKEN": "sentinel-4711"})
    settings = resolved.settings("deposit", "invenio_rdm", InvenioSettings)
    assert settings.token == "sentinel-4711"
    for text in (resolved.render(), repr(resolved), repr(settings), str(resolved.redacted())):
        assert "sentinel-4711" not in text
    assert resolved.redacted()["deposit"]["invenio_rdm"]["auth_token"] == REDACTED


def test_env_overrides_mapping():
    env = {
        "HERMES_HARVEST__GIT__BRANCH": "x",
        "HERMES_DEPOSIT__INVENIO_RDM__RECORD_ID": "12",
        "HERMES_VERBOSE": "1",
        "HOME": "/root",
        "HERMES_HARVEST": "flat",
    }
    assert env_overrides(env) == {"harvest.git.branch": "x", "deposit.invenio_rdm.record_id": "12"}


def test_override_coercion(tmp_path):
    assert coerce('["cff", "git"]') == ["cff", "git"]
    assert coerce("12") == "12"
    assert coerce("[not toml") == "[not toml"
    cfg = resolve(PipelineConfig({}), {"HERMES_HARVEST__SOURCES": '["cff", "git"]'},
                  {"deposit.invenio_rdm.record_id": "12"})
    assert cfg.sources == ["cff", "git"]
    assert cfg.settings("deposit", "invenio_rdm", InvenioSettings).record_id == 12


def test_override_into_scalar_is_schema_error():
    with pytest.raises(SchemaError):
        resolve(PipelineConfig({"deposit": {"target": "file"}}), {}, {"deposit.target.x": "1"})


def test_redacting_log_filter(tmp_path, capsys):
    from hermes_pipeline.logs import configure_logging, register_secret

    register_secret("log-sentinel-99")
    path = configure_logging(tmp_path, 0)
    logging.getLogger("hermes_pipeline.test").error("token is %s", "log-sentinel-99")
    out = capsys.readouterr().out
    assert "log-sentinel-99" not in out and "token is" in out
    assert "log-sentinel-99" not in path.read_text()


# -- precedence property ---------------------------------------------------------------

_WORDS = st.text("abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=8)

# key -> (strategy for the typed value, how it is written as an env/-O string)
PRECEDENCE_KEYS = {
    "harvest.git.branch": (_WORDS.map(lambda s: f"br-{s}"), str),
    "harvest.sources": (st.lists(st.sampled_from(["cff", "git", "codemeta", "manifest"]), unique=True),
                        lambda v: json.dumps(v)),
    "deposit.target": (st.sampled_from(["file", "invenio", "invenio_rdm"]), str),
    "deposit.file.filename": (_WORDS.map(lambda s: f"{s}.json"), str),
    "deposit.invenio_rdm.site_url": (_WORDS.map(lambda s: f"https://{s}.example.org"), str),
    "deposit.invenio_rdm.record_id": (st.integers(1, 10**9), str),
    "deposit.invenio_rdm.auth_token": (_WORDS.map(lambda s: f"secret-rdm-{s}"), str),
    "deposit.invenio.auth_token": (_WORDS.map(lambda s: f"secret-legacy-{s}"), str),
}
SECRET_KEYS = {"deposit.invenio_rdm.auth_token", "deposit.invenio.auth_token"}


@st.composite
def precedence_triples(draw):
    """Random (file, env, cli) layers over PRECEDENCE_KEYS."""
    layers = []
    for _ in range(3):
        keys = draw(st.sets(st.sampled_from(sorted(PRECEDENCE_KEYS))))
        layers.append({k: draw(PRECEDENCE_KEYS[k][0]) for k in sorted(keys)})
    return tuple(layers)


def _nest(flat):
    out = {}
    for dotted, value in flat.items():
        *parents, leaf = dotted.split(".")
        node = out
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return out


def check_precedence(root, triple):
    file_layer, env_layer, cli_layer = triple
    path = root / "hermes.toml"
    path.write_text(tomlkit.dumps(_nest(file_layer)), encoding="utf-8")
    env = {"HERMES_" + k.upper().replace(".", "__"): PRECEDENCE_KEYS[k][1](v) for k, v in env_layer.items()}
    env["HERMES_VERBOSE"] = "unrelated"
    cli = {k: PRECEDENCE_KEYS[k][1](v) for k, v in cli_layer.items()}

    resolved = resolve(load_config(path), env, cli)
    for key in PRECEDENCE_KEYS:
        for layer in (cli_layer, env_layer, file_layer):
            if key in layer:
                expected = layer[key]
                break
        else:
            expected = None
        actual = resolved.get(key)
        if key == "deposit.invenio_rdm.record_id":
            actual = resolved.settings("deposit", "invenio_rdm", InvenioSettings).record_id
        assert actual == expected, key

    secrets = {v for layer in triple for k, v in layer.items() if k in SECRET_KEYS}
    rdm = resolved.settings("deposit", "invenio_rdm", InvenioSettings)
    shown = [resolved.render(), repr(resolved), str(resolved.redacted()), repr(rdm), str(rdm)]
    for secret in secrets:
        assert all(secret not in text for text in shown)


@settings(max_examples=100, deadline=None)
@given(precedence_triples())
def test_precedence_property(tmp_path_factory, triple):
    check_precedence(tmp_path_factory.mktemp("prec"), triple)
