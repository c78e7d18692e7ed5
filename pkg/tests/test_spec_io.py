from collections.abc import Callable
from pathlib import Path

import pytest

from src.errors import ConfigError
from src.polar.construction import construct_sets
from src.polar.spec_io import FORMAT_NAME, dumps, load_spec, loads, save_spec
from src.source.presets import Preset
from tests.conftest import make_spec


@pytest.fixture
def spec_text(dsbs_preset: Preset) -> str:
    spec = make_spec(dsbs_preset.source, dsbs_preset.channel, 8, frozen=(0, 4), computable=(2,))
    return dumps(spec.with_frozen_values([1, 0]))


def test_constructed_spec_survives_save_and_load(dsbs_preset: Preset, tmp_path: Path):
    spec = construct_sets(
        dsbs_preset.source, dsbs_preset.channel, 16, num_samples=200, seed=5, target_rate=0.5
    )
    path = tmp_path / "nested" / "code.spec"
    save_spec(spec, path)
    assert load_spec(path) == spec
    assert path.read_text() == dumps(spec)


def test_text_layout(spec_text: str):
    lines = spec_text.splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == f'format = "{FORMAT_NAME}"'
    assert "frozen = [0, 4]" in lines
    assert "frozen_values = [1, 0]" in lines
    assert "info = [1, 3, 5, 6, 7]" in lines


def test_comments_and_blank_lines_ignored(spec_text: str):
    spec = loads("# extra\n\n" + spec_text + "\n# trailing\n")
    assert spec.frozen_values == (1, 0)
    assert spec.computable == (2,)


@pytest.mark.parametrize(
    ("mutate", "message"),
    [
        (lambda t: t + "colour = 1\n", "expected"),
        (lambda t: t + "n = 8\n", "duplicate"),
        (lambda t: t.replace("beta = ", "beta = [", 1), "invalid value"),
        (lambda t: "\n".join(l for l in t.splitlines() if not l.startswith("seed")), "missing"),
        (lambda t: t.replace("version = 1", "version = 2"), "Unsupported"),
        (lambda t: t.replace("info = [1, 3, 5, 6, 7]", "info = [1, 3]"), "disagrees"),
        (lambda t: t.replace("frozen_values = [1, 0]", "frozen_values = [1, 5]"), "frozen values"),
    ],
)
def test_malformed_specs_rejected(spec_text: str, mutate: Callable[[str], str], message: str):
    with pytest.raises(ConfigError, match=message):
        _ = loads(mutate(spec_text))


def test_missing_file(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        _ = load_spec(tmp_path / "absent.spec")
