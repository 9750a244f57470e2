"""
Test Run Configuration

Loading the bundled documents, round trips, environment overrides and the
order/complex parsing helpers.
"""

import sys
import tempfile
from pathlib import Path

import pytest

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

import modules.config as config
from modules.config import (
    config_from_document,
    load_document,
    load_run_config,
    parse_complex,
    parse_order,
    write_run_config,
)

ROOT = Path(__file__).parent
DEMO = ROOT / "config" / "config.yaml"
FIXTURES = ROOT / "config" / "fixtures"


def test_load_demo_document():
    cfg = load_run_config(str(DEMO))
    assert cfg.disc_radius == 0.6
    assert cfg.orders == (None, None)
    assert cfg.f_spec["family"] == "mobius"
    assert cfg.g_spec["parameters"]["lambda"] == 0.5
    assert cfg.hyperbolic.max_syllables == 4
    assert cfg.split.q is None
    assert cfg.fixed_points.tol == 1e-8
    assert cfg.source == str(DEMO)
    assert cfg.unknown_keys == []


def test_fixture_sections():
    split = load_run_config(str(FIXTURES / "split_fixture.yaml"))
    assert split.split.q == (0.3, 0.0)
    assert split.log_level == "WARNING" and not split.log_file_enabled

    torsion = load_run_config(str(FIXTURES / "torsion_pair.yaml"))
    assert torsion.orders == (3, None)

    bad = load_run_config(str(FIXTURES / "bad_config.yaml"))
    assert bad.unknown_keys == ["analysis.warp_speed"]


def test_document_round_trip():
    for path in (DEMO, FIXTURES / "richer_pair.yaml", FIXTURES / "split_fixture.yaml"):
        cfg = load_run_config(str(path))
        with tempfile.TemporaryDirectory() as tmp:
            written = write_run_config(cfg, Path(tmp) / "nested" / "run.yaml")
            again = load_run_config(str(written))
        assert again.to_document() == cfg.to_document()


def test_missing_generators_is_an_error():
    with pytest.raises(KeyError):
        config_from_document({"run": {"seed": 1}})


def test_non_mapping_document_is_rejected():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError):
            load_document(path)


def test_environment_overrides_win():
    data = load_document(DEMO)
    saved = (config.ENV_SEED, config.ENV_THREADS, config.ENV_OUTPUT_DIR, config.LOG_LEVEL)
    try:
        config.ENV_SEED, config.ENV_THREADS, config.ENV_OUTPUT_DIR, config.LOG_LEVEL = "42", "3", "elsewhere", "debug"
        cfg = config_from_document(data)
    finally:
        config.ENV_SEED, config.ENV_THREADS, config.ENV_OUTPUT_DIR, config.LOG_LEVEL = saved
    assert cfg.seed == 42
    assert cfg.threads == 3
    assert cfg.output_dir == "elsewhere"
    assert cfg.log_level == "DEBUG"


def test_parse_order():
    assert parse_order(None) is None
    assert parse_order("inf") is None
    assert parse_order(float("inf")) is None
    assert parse_order(3) == 3
    assert parse_order(3.0) == 3
    assert parse_order("4") == 4
    with pytest.raises(ValueError):
        parse_order(2.5)


def test_parse_complex():
    assert parse_complex([1, 2]) == 1 + 2j
    assert parse_complex("0.5 - 1j") == 0.5 - 1j
    assert parse_complex(0.25) == 0.25
    with pytest.raises(ValueError):
        parse_complex([1.0])


if __name__ == "__main__":
    print("=" * 60)
    print("🧪 RUN CONFIGURATION TESTS")
    print("=" * 60)
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"✅ {name}")
