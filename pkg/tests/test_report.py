"""Report document round-trip, CSV layout, and figure rendering."""

import csv

import numpy as np
import pytest

from ssbwatch.evalbench import FaMdCurve, GainSweepResult, LatencyCdf
from ssbwatch import report as rpt


def test_report_round_trip():
    doc = rpt.Report()
    meta = doc.section("meta")
    meta["command"] = "eval"
    meta["samples"] = 120
    meta["tau"] = 0.5
    meta["perfect"] = True
    meta["note"] = "all clear"
    nested = doc.section("results.latency")
    nested["p95"] = 0.0381234567890123
    nested["warned"] = False

    text = doc.dumps()
    back = rpt.loads(text)
    assert back.sections == doc.sections
    # repr round-trips floats exactly
    assert back.sections["results.latency"]["p95"] == 0.0381234567890123


def test_report_empty_and_errors(tmp_path):
    empty = rpt.Report()
    assert rpt.loads(empty.dumps()).sections == {}
    empty.save(tmp_path / "r.txt")
    assert rpt.load(tmp_path / "r.txt").sections == {}
    with pytest.raises(ValueError):
        rpt.loads("key = 1\n")  # entry before any section header


def test_fa_md_csv(tmp_path):
    curve = FaMdCurve(taus=np.array([0.0, 0.5, 1.0]),
                      p_fa=np.array([1.0, 0.25, 0.0]),
                      p_md=np.array([0.0, 0.5, 1.0]))
    rpt.write_fa_md_csv(curve, tmp_path / "c.csv")
    with open(tmp_path / "c.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "p_fa", "p_md"]
    assert [float(v) for v in rows[2]] == [0.5, 0.25, 0.5]


def test_latency_csv(tmp_path):
    cdf = LatencyCdf(samples=np.array([3e-3, 1e-3, 2e-3]))
    rpt.write_latency_csv(cdf, tmp_path / "l.csv")
    with open(tmp_path / "l.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["seconds", "cdf"]
    assert [float(r[0]) for r in rows[1:]] == [1e-3, 2e-3, 3e-3]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_gain_sweep_csv_and_plot(tmp_path):
    result = GainSweepResult(
        gains_db=[-30.0, -44.0],
        relative_distance=[1.0, 5.0118723363],
        outputs=[np.array([0.99, 1.0]), np.array([0.05, 0.1])],
        p90=[1.0, 0.1],
    )
    rpt.write_gain_sweep_csv(result, tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().strip().splitlines()
    assert rows[0] == "gain_db,relative_distance,p90_output"
    assert len(rows) == 3
    rpt.plot_gain_sweep(result, tmp_path / "g.png")
    assert (tmp_path / "g.png").stat().st_size > 1000


def test_variance_csv_and_plot(tmp_path):
    curve = np.array([0.6, 0.9, 0.98, 1.0])
    rpt.write_variance_csv(curve, tmp_path / "v.csv")
    rows = (tmp_path / "v.csv").read_text().strip().splitlines()
    assert rows[0] == "components,cumulative_ratio"
    assert rows[1].startswith("1,")
    low = curve - 0.05
    high = np.minimum(curve + 0.05, 1.0)
    rpt.write_variance_csv(curve, tmp_path / "vb.csv", low, high)
    assert (tmp_path / "vb.csv").read_text().splitlines()[0] == "components,cumulative_ratio,q01,q99"
    rpt.plot_variance_curve(curve, tmp_path / "v.png", low, high)
    assert (tmp_path / "v.png").stat().st_size > 1000


def test_fa_md_and_latency_plots(tmp_path):
    taus = np.linspace(0, 1, 101)
    curve = FaMdCurve(taus=taus, p_fa=1 - taus, p_md=taus)
    rpt.plot_fa_md(curve, tmp_path / "c.png")
    assert (tmp_path / "c.png").stat().st_size > 1000
    cdfs = {
        "svm": LatencyCdf(samples=np.random.default_rng(0).uniform(1e-5, 1e-4, 100)),
        "cnn": LatencyCdf(samples=np.random.default_rng(1).uniform(1e-2, 1e-1, 100)),
    }
    rpt.plot_latency_cdf(cdfs, tmp_path / "l.png")
    assert (tmp_path / "l.png").stat().st_size > 1000
