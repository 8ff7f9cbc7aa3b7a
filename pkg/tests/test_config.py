import pytest

from stabfinetti.config import CONFIG_ENV, DEFAULT, DomainError, ResourceError, RunConfig, load_config


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed == 0
    assert cfg.sdp_dim_cap == 256
    assert cfg == DEFAULT


def test_updated_routes_tolerances():
    cfg = DEFAULT.updated(seed=5, psd=1e-6)
    assert cfg.seed == 5 and cfg.tol.psd == 1e-6
    assert DEFAULT.tol.psd == 1e-10


def test_load_file_and_env(tmp_path, monkeypatch):
    p = tmp_path / "run.toml"
    p.write_text("seed = 3\nsdp_dim_cap = 64\n[tol]\nsdp_gap = 1e-6\n")
    cfg = load_config(str(p))
    assert (cfg.seed, cfg.sdp_dim_cap, cfg.tol.sdp_gap) == (3, 64, 1e-6)
    monkeypatch.setenv(CONFIG_ENV, str(p))
    assert load_config().seed == 3
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config() == RunConfig()


def test_unknown_key(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("sede = 3\n")
    with pytest.raises(DomainError):
        load_config(str(p))


def test_resource_error_fields():
    e = ResourceError("sdp_dim_cap", 729, 256)
    assert (e.cap, e.value, e.limit) == ("sdp_dim_cap", 729, 256)
    assert "729" in str(e)
