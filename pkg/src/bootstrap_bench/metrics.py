"""Histograms, boundary statistics and table aggregation."""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ReportingError

METHOD_LABELS = {"random_policy": "Random policies", "random_actions": "Random actions",
                 "rarph": "RARPH"}
TABLE_FIELDS = ("env", "budget", "horizon", "method", "mean", "std")


@dataclass
class Histogram:
    dim_label: str
    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: int = 0

    @property
    def density(self):
        total = self.counts.sum()
        widths = np.diff(self.bin_edges)
        return self.counts / (total * widths) if total else np.zeros(len(self.counts))


@dataclass
class MetricsRecord:
    environment: str
    method: str
    budget: int
    horizon: int
    mean_error: float
    std_error: float
    n_repetitions: int
    divergence_count: int = 0

    def __post_init__(self):
        if self.std_error < 0 or self.n_repetitions < 1:
            raise ConfigError("std_error must be >= 0 and n_repetitions >= 1")


def histogram(samples, n_bins, value_range, dim_label=""):
    """Equal-width bins over ``[low, high]``; out-of-range samples go to ``overflow``."""
    low, high = value_range
    if n_bins < 1 or not low < high:
        raise ConfigError(f"invalid histogram spec: {n_bins} bins over [{low}, {high}]")
    samples = np.asarray(samples, dtype=np.float64).ravel()
    counts, edges = np.histogram(samples, bins=n_bins, range=(low, high))
    return Histogram(dim_label, edges, counts, int(len(samples) - counts.sum()))


def boundary_mass(actions, spec, fraction=0.1):
    """Share of actions with any coordinate within ``fraction * range`` of a box edge."""
    if not 0.0 < fraction < 0.5:
        raise ConfigError("fraction must lie in (0, 0.5)")
    actions = np.asarray(actions, dtype=np.float64).reshape(-1, spec.action_dim)
    if len(actions) == 0:
        return 0.0
    margin = fraction * (spec.action_high - spec.action_low)
    near = (actions <= spec.action_low + margin) | (actions >= spec.action_high - margin)
    return float(np.mean(np.any(near, axis=1)))


def aggregate(errors):
    """``errors``: one sequence of per-trajectory errors per repetition.

    Returns ``(mean, population std)`` across per-repetition means.
    """
    if len(errors) < 1:
        raise ConfigError("need at least one repetition")
    per_rep = np.array([np.mean(np.asarray(e, dtype=np.float64)) for e in errors])
    per_rep = np.sort(per_rep)  # order-independent summation
    mean = float(np.mean(per_rep))
    return mean, float(np.sqrt(np.mean((per_rep - mean) ** 2)))


def _grid(records):
    cells = {(r.budget, r.horizon, r.method): r for r in records}
    budgets = sorted({r.budget for r in records})
    horizons = sorted({r.horizon for r in records})
    methods = [m for m in METHOD_LABELS if any(r.method == m for r in records)]
    methods += sorted({r.method for r in records} - set(methods))
    return cells, budgets, horizons, methods


def check_grid(records, budgets=None, horizons=None, methods=None):
    cells, b0, h0, m0 = _grid(records)
    budgets, horizons, methods = budgets or b0, horizons or h0, methods or m0
    missing = [(b, h, m) for b in budgets for h in horizons for m in methods if (b, h, m) not in cells]
    if missing:
        names = ", ".join(f"(budget={b}, horizon={h}, method={m})" for b, h, m in missing)
        raise ReportingError(f"missing grid cells: {names}")
    return cells, budgets, horizons, methods


def render_table(records, budgets=None, horizons=None, methods=None):
    """Returns ``(text, csv_text)``; cells read ``mean ± std`` to 3 decimals."""
    cells, budgets, horizons, methods = check_grid(records, budgets, horizons, methods)
    env = records[0].environment
    header = ["Initialization episodes", "Prediction horizon"] + [METHOD_LABELS.get(m, m) for m in methods]
    rows = []
    for b in budgets:
        for h in horizons:
            rows.append([str(b), str(h)] + [
                f"{cells[b, h, m].mean_error:.3f} ± {cells[b, h, m].std_error:.3f}" for m in methods])
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths))
    lines = [env, fmt(header), "-+-".join("-" * w for w in widths)] + [fmt(r) for r in rows]
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_FIELDS)
    for b in budgets:
        for h in horizons:
            for m in methods:
                r = cells[b, h, m]
                writer.writerow([env, b, h, m, repr(r.mean_error), repr(r.std_error)])
    return text, buf.getvalue()


def parse_table_csv(text, n_repetitions=1):
    records = []
    for row in csv.DictReader(io.StringIO(text)):
        records.append(MetricsRecord(row["env"], row["method"], int(row["budget"]), int(row["horizon"]),
                                     float(row["mean"]), float(row["std"]), n_repetitions))
    return records


def histogram_csv(hists_by_method):
    """One CSV with raw counts and densities per method; all histograms share edges."""
    methods = list(hists_by_method)
    edges = hists_by_method[methods[0]].bin_edges
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_low", "bin_high"] + methods + [f"{m}_density" for m in methods])
    dens = {m: hists_by_method[m].density for m in methods}
    for i in range(len(edges) - 1):
        writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1]))]
                        + [int(hists_by_method[m].counts[i]) for m in methods]
                        + [repr(float(dens[m][i])) for m in methods])
    return buf.getvalue()


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def histogram_svg(hists_by_method, title, width=480, height=300):
    """Overlaid step-outline histograms (densities) as a standalone SVG document."""
    methods = list(hists_by_method)
    edges = hists_by_method[methods[0]].bin_edges
    dens = {m: hists_by_method[m].density for m in methods}
    top = max(max(float(d.max()) for d in dens.values()), 1e-12)
    left, right, bottom, up = 50, 20, 40, 30
    pw, ph = width - left - right, height - bottom - up
    sx = lambda x: left + (x - edges[0]) / (edges[-1] - edges[0]) * pw
    sy = lambda y: up + ph - y / top * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
           f'<line x1="{left}" y1="{up + ph}" x2="{left + pw}" y2="{up + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{up}" x2="{left}" y2="{up + ph}" stroke="black"/>',
           f'<text x="{left}" y="{height - 20}" font-size="10">{edges[0]:.3g}</text>',
           f'<text x="{left + pw}" y="{height - 20}" font-size="10" text-anchor="end">{edges[-1]:.3g}</text>',
           f'<text x="{left - 4}" y="{up + 4}" font-size="10" text-anchor="end">{top:.3g}</text>']
    for k, m in enumerate(methods):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = []
        for i, d in enumerate(dens[m]):
            pts += [f"{sx(edges[i]):.1f},{sy(d):.1f}", f"{sx(edges[i + 1]):.1f},{sy(d):.1f}"]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{up + 14 * (k + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{METHOD_LABELS.get(m, m)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
