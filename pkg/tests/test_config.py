from pathlib import Path

import pytest

from src.config import OUTPUT_DIR_ENV, ChannelKind, DistortionKind, RunConfig
from src.errors import ConfigError
from src.polar.codec import FrozenPolicy
from src.polar.construction import ConstructionMode

REPO_CONFIG = Path(__file__).parent.parent / "config.yaml"

EXPLICIT = {
    "source": {"matrix": [[0.45, 0.05], [0.05, 0.45]]},
    "channel": {"kind": "explicit", "matrix": [[0.9, 0.1], [0.9, 0.1], [0.1, 0.9], [0.1, 0.9]]},
}


def test_repo_config_loads():
    cfg = RunConfig.load(REPO_CONFIG)
    assert cfg.source.preset == "dsbs"
    assert cfg.polar.n == 1024
    assert cfg.polar.mode is ConstructionMode.RANK
    assert cfg.polar.target_rate == 0.6
    assert cfg.frozen_policy is FrozenPolicy.UNIFORM
    assert cfg.build_source().pmf[0, 0] == pytest.approx(0.45)


def test_defaults(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, "/tmp/privpolar-out")
    cfg = RunConfig.from_dict({"source": {"preset": "zchannel", "params": {"a": 0.2}}})
    assert cfg.output_dir == Path("/tmp/privpolar-out")
    assert cfg.channel.kind is ChannelKind.PRESET
    assert cfg.distortion.kind is DistortionKind.HAMMING
    assert cfg.trials == 1000
    assert cfg.seed == 0
    channel = cfg.explicit_channel(cfg.build_source())
    assert channel is not None
    assert channel.q == 2


def test_output_dir_fallback(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    cfg = RunConfig.from_dict({"source": {"preset": "dsbs"}})
    assert cfg.output_dir == Path("output")


def test_explicit_channel_rows():
    cfg = RunConfig.from_dict(EXPLICIT)
    src = cfg.build_source()
    channel = cfg.explicit_channel(src)
    assert channel is not None
    assert channel.conditional.shape == (2, 2, 2)
    assert channel.conditional[1, 0, 1] == pytest.approx(0.9)
    assert cfg.build_distortion(src).matrix.shape == (2, 2)

    short = {**EXPLICIT, "channel": {"kind": "explicit", "matrix": [[0.5, 0.5]]}}
    with pytest.raises(ConfigError, match="4 rows"):
        _ = RunConfig.from_dict(short).explicit_channel(src)


def test_reconstruction_alphabet():
    cfg = RunConfig.from_dict(
        {
            **EXPLICIT,
            "distortion": {"kind": "matrix", "matrix": [[0.0, 1.0, 0.5], [1.0, 0.0, 0.5]]},
        }
    )
    src = cfg.build_source()
    assert cfg.reconstruction_q(src) == 3
    assert cfg.build_distortion(src).d_max == 1.0
    hamming = RunConfig.from_dict({**EXPLICIT, "distortion": {"q": 3}})
    assert hamming.build_distortion(src).matrix.shape == (2, 3)


def test_region_channel_has_no_explicit_channel():
    cfg = RunConfig.from_dict(
        {"source": {"preset": "dsbs"}, "channel": {"kind": "region", "d_max": 0.1, "delta_min": 0.5}}
    )
    assert cfg.explicit_channel(cfg.build_source()) is None


@pytest.mark.parametrize(
    "data",
    [
        {"source": {"preset": "dsbs"}, "colour": "blue"},
        {"source": {"preset": "dsbs", "matrix": [[1.0]]}},
        {"source": {}},
        {"source": {"preset": "dsbs"}, "polar": {"n": 12}},
        {"source": {"preset": "dsbs"}, "polar": {"beta": 0.5}},
        {"source": {"preset": "dsbs"}, "polar": {"target_rate": 1.5}},
        {"source": {"preset": "dsbs"}, "frozen_policy": "fixed"},
        {"source": {"preset": "dsbs"}, "trials": 0},
        {"source": {"preset": "dsbs"}, "confidence": 1.0},
        {"source": {"preset": "dsbs"}, "channel": {"kind": "region", "d_max": 0.1}},
        {"source": {"preset": "dsbs"}, "channel": {"kind": "explicit"}},
        {"source": {"preset": "dsbs"}, "distortion": {"kind": "matrix"}},
        {"source": {"matrix": [[0.5, 0.5]]}},
    ],
)
def test_invalid_configs_rejected(data: dict[str, object]):
    with pytest.raises(ConfigError, match="Invalid configuration"):
        _ = RunConfig.from_dict(data)


def test_non_mapping_rejected():
    with pytest.raises(ConfigError, match="mapping"):
        _ = RunConfig.from_dict(["source"])


def test_env_substitution(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("PRIVPOLAR_TEST_DIR", "/data/runs")
    cfg = RunConfig.from_dict({"source": {"preset": "dsbs"}, "output_dir": "${PRIVPOLAR_TEST_DIR}/a"})
    assert cfg.output_dir == Path("/data/runs/a")
    monkeypatch.delenv("PRIVPOLAR_TEST_DIR")
    with pytest.raises(ConfigError, match="PRIVPOLAR_TEST_DIR"):
        _ = RunConfig.from_dict({"source": {"preset": "dsbs"}, "output_dir": "${PRIVPOLAR_TEST_DIR}"})


def test_load_errors(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        _ = RunConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    _ = bad.write_text("source: [unclosed\n")
    with pytest.raises(ConfigError, match="Could not parse"):
        _ = RunConfig.load(bad)


def test_seed_override():
    cfg = RunConfig.from_dict({"source": {"preset": "dsbs"}, "seed": 4})
    assert cfg.with_overrides(None) is cfg
    assert cfg.with_overrides(seed=9).seed == 9


def test_unknown_preset_surfaces_on_build():
    cfg = RunConfig.from_dict({"source": {"preset": "nope"}})
    with pytest.raises(ConfigError, match="Unknown source preset"):
        _ = cfg.build_source()
