import math

import numpy as np
import pytest

from vciedit import harness
from vciedit.config import RunConfig, SweepAxes
from vciedit.errors import ConfigurationError


def small(**sweep):
    cfg = RunConfig(seeds_per_point=6).with_edit(w_src=1.0, w_tgt=1.0)
    return RunConfig.from_dict({**cfg.to_dict(), "sweep": sweep}) if sweep else cfg


def test_sweep_shape_and_finiteness():
    table = harness.run_sweep(small(phi=[0.1, 0.3, 0.5, 0.7, 0.95]))
    assert len(table.rows) == 5
    assert all(r["n"] == 6 for r in table.rows)
    for r in table.rows:
        assert all(math.isfinite(v) for v in r.values() if isinstance(v, float))
    lines = table.to_csv().splitlines()
    assert lines[0].startswith("# vciedit sweep:")
    assert lines[1].split(",") == list(table.COLUMNS)
    assert "wall_time_s" not in lines[1]


def test_sweep_feature_distance_monotone():
    table = harness.run_sweep(RunConfig.from_dict({
        **small().to_dict(), "seeds_per_point": 100,
        "sweep": {"phi": [0.1, 0.3, 0.5, 0.7, 0.95]},
    }), workers=4)
    assert harness.spearman(table.column("value"), table.column("feature_distance")) >= 0.9


def test_phi_zero_row():
    row = harness.run_sweep(small(phi=[0.0])).rows[0]
    assert row["feature_distance"] <= 1e-8
    assert row["pearson"] == 1.0
    assert row["nfe"] == 16


def test_sdedit_alignment_trend():
    cfg = RunConfig.from_dict({
        **small().to_dict(), "seeds_per_point": 100,
        "sweep": {"methods": ["sdedit"], "t_start": [250, 500, 750]},
    })
    table = harness.run_sweep(cfg, workers=4)
    al = table.column("alignment")
    assert table.column("value").tolist() == [250.0, 500.0, 750.0]
    assert al[0] <= al[1] <= al[2]


def test_sweep_independent_of_workers():
    cfg = small(methods=["control_vci", "sdedit"], phi=[0.2, 0.8], t_start=[250, 750])
    assert harness.run_sweep(cfg, 1).to_csv() == harness.run_sweep(cfg, 3).to_csv()


def test_timing_columns_only_on_request():
    table = harness.run_sweep(small(phi=[0.5]), timing=True)
    csv = table.to_csv()
    assert "# machine:" in csv and "wall_time_s,wall_time_s_std" in csv
    assert table.rows[0]["wall_time_s"] > 0


def test_sweep_rejects_empty_axis():
    cfg = RunConfig(sweep=SweepAxes(methods=("sdedit",), t_start=()))
    with pytest.raises(ConfigurationError):
        harness.run_sweep(cfg)


def test_sweep_rejects_start_beyond_horizon():
    with pytest.raises(ConfigurationError):
        harness.run_sweep(small(methods=["sdedit"], t_start=[1200]))


def test_point_inputs_shared_across_points():
    cfg = RunConfig()
    a, sa = harness.point_inputs(cfg, 3)
    b, sb = harness.point_inputs(cfg, 3)
    assert a.tobytes() == b.tobytes() and sa == sb
    assert harness.point_inputs(cfg, 4)[0].tobytes() != a.tobytes()


def test_bench_accounting():
    report = harness.bench(RunConfig())
    assert report.nfe("control_vci") == 32
    assert report.nfe("vci") == 32
    assert report.nfe("ddim_inversion") == 640
    assert report.nfe("sdedit") == 200
    assert report.nfe("ddim_inversion") >= 10 * report.nfe("control_vci")
    assert all(r["wall_time_s"] > 0 for r in report.rows)
    assert report.to_csv() == harness.bench(RunConfig()).to_csv()


def test_bench_errors():
    with pytest.raises(ConfigurationError):
        harness.bench(RunConfig(), ["magic"])
    with pytest.raises(ConfigurationError):
        harness.bench(RunConfig(), repetitions=2)


def test_spearman_constant_input():
    assert harness.spearman([1, 2, 3], [5, 5, 5]) == 0.0
    assert harness.spearman(np.arange(5), np.arange(5) ** 2) == pytest.approx(1.0)
