import json
from pathlib import Path
from typing import Any

import pytest
import yaml
from typer.testing import CliRunner

from src import __version__
from src.cli import app

runner = CliRunner()


def write_config(tmp_path: Path, name: str, **overrides: Any) -> Path:
    data: dict[str, Any] = {
        "source": {"preset": "dsbs", "params": {"p": 0.1, "crossover": 0.11}},
        "channel": {"kind": "preset", "grid_res": 4, "refine_iters": 0},
        "polar": {"n": 2, "mode": "rank"},
        "trials": 50,
        "output_dir": str(tmp_path / "out"),
    }
    data.update(overrides)
    path = tmp_path / f"{name}.yaml"
    _ = path.write_text(yaml.safe_dump(data))
    return path


def outputs(tmp_path: Path) -> list[str]:
    out = tmp_path / "out"
    return sorted(p.name for p in out.iterdir()) if out.exists() else []


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert result.output.strip() == f"privpolar version {__version__}"


def test_region_writes_frontier(tmp_path: Path):
    config = write_config(tmp_path, "sweep")
    result = runner.invoke(app, ["region", str(config), "--threads", "2"])
    assert result.exit_code == 0, result.output
    assert outputs(tmp_path) == ["sweep.frontier.csv", "sweep.frontier.csv.meta.json"]
    meta = json.loads((tmp_path / "out" / "sweep.frontier.csv.meta.json").read_text())
    assert meta["command"] == "region"
    assert meta["threads"] == 2


def test_region_query(tmp_path: Path):
    config = write_config(
        tmp_path,
        "query",
        channel={"kind": "region", "d_max": 0.25, "delta_min": 0.8, "grid_res": 4,
                 "refine_iters": 2},
    )
    result = runner.invoke(app, ["region", str(config)])
    assert result.exit_code == 0, result.output
    query = json.loads((tmp_path / "out" / "query.query.json").read_text())
    assert query["point"]["D_star"] <= 0.25 + 1e-9
    assert query["point"]["Delta_star"] >= 0.8 - 1e-9
    trajectory = query["rate_trajectory"]
    assert all(b <= a for a, b in zip(trajectory, trajectory[1:], strict=False))


@pytest.mark.parametrize(("d_max", "delta_min"), [(0.25, 1.5), (0.0, 1.0)])
def test_infeasible_query_writes_nothing(tmp_path: Path, d_max: float, delta_min: float):
    config = write_config(
        tmp_path,
        "nowhere",
        channel={"kind": "region", "d_max": d_max, "delta_min": delta_min, "grid_res": 4,
                 "refine_iters": 0},
    )
    result = runner.invoke(app, ["region", str(config)])
    assert result.exit_code == 3
    assert "Error[infeasible]" in result.output
    assert outputs(tmp_path) == []


def test_invalid_pmf_is_a_config_error(tmp_path: Path):
    config = write_config(
        tmp_path,
        "bad",
        source={"matrix": [[0.5, 0.6], [0.0, 0.0]]},
        channel={"kind": "explicit", "matrix": [[1, 0], [1, 0], [0, 1], [0, 1]]},
    )
    result = runner.invoke(app, ["region", str(config)])
    assert result.exit_code == 2
    assert "Error[config]" in result.output
    assert outputs(tmp_path) == []


def test_missing_config_file(tmp_path: Path):
    result = runner.invoke(app, ["oracle", str(tmp_path / "absent.yaml")])
    assert result.exit_code == 2
    assert "Error[config]" in result.output


def test_oracle_small_code(tmp_path: Path):
    config = write_config(tmp_path, "small")
    result = runner.invoke(app, ["oracle", str(config)])
    assert result.exit_code == 0, result.output
    assert "PASS" in result.output
    assert "small.oracle.json" in outputs(tmp_path)
    checks = (tmp_path / "out" / "small.checks.csv").read_text().splitlines()
    assert checks[0] == "name,lhs,rhs,status,asserted"
    assert len(checks) == 11


def test_oracle_guard(tmp_path: Path):
    config = write_config(
        tmp_path,
        "big",
        source={"preset": "uniform", "params": {"q": 3}},
        polar={"n": 16, "mode": "rank"},
    )
    result = runner.invoke(app, ["oracle", str(config)])
    assert result.exit_code == 3
    assert "Error[guard]" in result.output


def test_construct_then_simulate_is_reproducible(tmp_path: Path):
    config = write_config(
        tmp_path,
        "code",
        polar={"n": 16, "mode": "rank", "target_rate": 0.5, "num_samples": 200},
        per_trial_csv=True,
    )
    result = runner.invoke(app, ["construct", str(config)])
    assert result.exit_code == 0, result.output
    spec = tmp_path / "out" / "code.spec"
    spectrum = (tmp_path / "out" / "code.spectrum.csv").read_text().splitlines()
    assert spectrum[1] == "index,z_cond,z_marg,role"
    assert len(spectrum) == 18

    first = runner.invoke(app, ["simulate", str(config), "--spec", str(spec)])
    assert first.exit_code == 0, first.output
    report = (tmp_path / "out" / "code.simulate.json").read_bytes()
    trials = (tmp_path / "out" / "code.trials.csv").read_bytes()
    rows = trials.decode().splitlines()
    assert rows[0] == "trial,distortion,decode_mismatch"
    assert len(rows) == 1 + 50
    assert rows[1].startswith("0,")
    second = runner.invoke(app, ["simulate", str(config), "--spec", str(spec), "--threads", "3"])
    assert second.exit_code == 0, second.output
    assert (tmp_path / "out" / "code.simulate.json").read_bytes() == report
    assert (tmp_path / "out" / "code.trials.csv").read_bytes() == trials
    assert json.loads(report)["trials"] == 50


def test_simulate_needs_spec(tmp_path: Path):
    config = write_config(tmp_path, "nospec")
    result = runner.invoke(app, ["simulate", str(config)])
    assert result.exit_code == 2


def test_seed_override_changes_simulation(tmp_path: Path):
    config = write_config(
        tmp_path, "seeded", polar={"n": 8, "mode": "rank", "target_rate": 0.5, "num_samples": 50}
    )
    assert runner.invoke(app, ["construct", str(config)]).exit_code == 0
    spec = str(tmp_path / "out" / "seeded.spec")
    assert runner.invoke(app, ["simulate", str(config), "--spec", spec]).exit_code == 0
    base = json.loads((tmp_path / "out" / "seeded.simulate.json").read_text())
    result = runner.invoke(app, ["simulate", str(config), "--spec", spec, "--seed", "5"])
    assert result.exit_code == 0
    assert json.loads((tmp_path / "out" / "seeded.simulate.json").read_text())["seed"] == 5
    assert base["seed"] == 0


@pytest.mark.parametrize("epsilon", [0.6])
def test_timeshare(tmp_path: Path, epsilon: float):
    config = write_config(tmp_path, "share", polar={"n": 4, "mode": "rank"}, epsilon=epsilon)
    result = runner.invoke(app, ["timeshare", str(config)])
    assert result.exit_code == 0, result.output
    plan = json.loads((tmp_path / "out" / "share.plan.json").read_text())
    assert plan["kind"] in ("single", "pair")
    assert plan["distortion"] <= plan["target_distortion"] + 1e-12
    assert plan["equivocation"] >= plan["target_equivocation"] - 1e-12
    frozen = (tmp_path / "out" / "share.frozen.csv").read_text().splitlines()
    assert frozen[0].startswith("# privpolar frozen ensemble n=4")
    assert frozen[1] == "frozen_values,distortion,equivocation,on_hull"
    assert len(frozen) == 2 + 4


def test_broken_invariant_exits_as_internal_error(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
):
    def broken(*_args: Any, **_kwargs: Any) -> Any:
        raise AssertionError("frontier lost its query point")

    monkeypatch.setattr("src.cli.run_region", broken)
    config = write_config(tmp_path, "broken")
    result = runner.invoke(app, ["region", str(config)])
    assert result.exit_code == 4
    assert "Error[internal]: frontier lost its query point" in result.output
