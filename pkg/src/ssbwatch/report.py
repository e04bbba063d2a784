"""Report documents, CSV exports, and rendered figures.

A report is a flat set of named sections holding scalar key/value pairs; it
serializes to a line-oriented text document (``[section]`` headers,
``key = value`` lines) that parses back to an equal report. Curves and
tables go to CSV files next to the report, and each curve also renders to a
PNG via matplotlib so results can be eyeballed without extra tooling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalbench import FaMdCurve, GainSweepResult, LatencyCdf

REPORT_HEADER = "# ssbwatch report v1"


@dataclass
class Report:
    sections: dict[str, dict[str, object]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, object]:
        return self.sections.setdefault(name, {})

    def dumps(self) -> str:
        lines = [REPORT_HEADER]
        for name, entries in self.sections.items():
            lines.append("")
            lines.append(f"[{name}]")
            for key, value in entries.items():
                lines.append(f"{key} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(raw: str) -> object:
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def loads(text: str) -> Report:
    report = Report()
    current: dict[str, object] | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = report.section(line[1:-1])
            continue
        if "=" not in line or current is None:
            raise ValueError(f"malformed report line {lineno}: {line!r}")
        key, _, raw = line.partition("=")
        current[key.strip()] = _parse_value(raw.strip())
    return report


def load(path: str | Path) -> Report:
    return loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# CSV exports (column headers are the contract; values use repr for floats)

def write_fa_md_csv(curve: FaMdCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "p_fa", "p_md"])
        for tau, fa, md in zip(curve.taus, curve.p_fa, curve.p_md):
            writer.writerow([repr(float(tau)), repr(float(fa)), repr(float(md))])


def write_latency_csv(cdf: LatencyCdf, path: str | Path) -> None:
    values, fractions = cdf.cdf()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seconds", "cdf"])
        for v, f in zip(values, fractions):
            writer.writerow([repr(float(v)), repr(float(f))])


def write_gain_sweep_csv(result: GainSweepResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gain_db", "relative_distance", "p90_output"])
        for g, d, p in zip(result.gains_db, result.relative_distance, result.p90):
            writer.writerow([repr(float(g)), repr(float(d)), repr(float(p))])


def write_knn_table_csv(results: dict[str, object], path: str | Path) -> None:
    """One row per k; three accuracy columns per feature mode (Table-II shape)."""
    modes = list(results)
    k_values = results[modes[0]].k_values
    splits = ("train", "validation", "test")
    header = ["k"]
    for mode in modes:
        tag = "std" if mode.startswith("standardized") else "pca8"
        header += [f"{split}_{tag}" for split in splits]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in k_values:
            row = [k]
            for mode in modes:
                row += [repr(results[mode].accuracy[k].get(s, float("nan"))) for s in splits]
            writer.writerow(row)


def write_svm_table_csv(result, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kernel", "dim", "train", "validation", "test"])
        for row in result.rows:
            writer.writerow([row["kernel"], row["dim"],
                             repr(row.get("train", float("nan"))),
                             repr(row.get("validation", float("nan"))),
                             repr(row.get("test", float("nan")))])


def write_variance_csv(curve: np.ndarray, path: str | Path,
                       low: np.ndarray | None = None,
                       high: np.ndarray | None = None) -> None:
    header = ["components", "cumulative_ratio"]
    if low is not None:
        header += ["q01", "q99"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, value in enumerate(curve, start=1):
            row = [i, repr(float(value))]
            if low is not None:
                row += [repr(float(low[i - 1])), repr(float(high[i - 1]))]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# figures

def plot_fa_md(curve: FaMdCurve, path: str | Path, title: str = "Detection trade-off") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.taus, curve.p_fa, label="false alarm", color="tab:red")
    ax.plot(curve.taus, curve.p_md, label="misdetection", color="tab:blue")
    ax.set_xlabel("decision threshold")
    ax.set_ylabel("empirical probability")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_latency_cdf(cdfs: dict[str, LatencyCdf], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, cdf in cdfs.items():
        values, fractions = cdf.cdf()
        ax.step(values * 1e3, fractions, where="post", label=name)
    ax.set_xscale("log")
    ax.set_xlabel("classification time (ms)")
    ax.set_ylabel("CDF")
    ax.set_title("Single-sample classification time")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_gain_sweep(result: GainSweepResult, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(result.gains_db, result.p90, marker="o")
    ax.set_xlabel("jammer gain (dB)")
    ax.set_ylabel("90th percentile detector output")
    ax.set_ylim(-0.05, 1.05)
    ax.invert_xaxis()
    ax.set_title("Detector output vs jammer gain")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_variance_curve(curve: np.ndarray, path: str | Path,
                        low: np.ndarray | None = None,
                        high: np.ndarray | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    components = np.arange(1, len(curve) + 1)
    ax.plot(components, 100.0 * np.asarray(curve), color="tab:blue")
    if low is not None and high is not None:
        ax.fill_between(components, 100.0 * np.asarray(low), 100.0 * np.asarray(high),
                        color="gray", alpha=0.4, label="bootstrap 0.01-0.99 band")
        ax.legend()
    ax.set_xscale("log")
    ax.set_xlabel("number of principal components")
    ax.set_ylabel("cumulative explained variance (%)")
    ax.set_title("Explained variance")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
