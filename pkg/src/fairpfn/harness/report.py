"""Aggregates, Pareto fronts, plot data and acceptance checks over a results CSV."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..metrics import RESULT_COLUMNS

AGGREGATE_COLUMNS = ("case", "method", "metric", "count", "median", "q25", "q75")
# Level-k baselines on real-world data are the counterfactually fair predictor family.
METHOD_ALIASES = {"level3": "CFP"}


class MalformedResults(ValueError):
    def __init__(self, problems):
        self.problems = problems
        super().__init__(f"{len(problems)} malformed result rows: " + "; ".join(problems[:5]))


def read_results(path):
    """Parsed rows as dicts; ``value`` is a float or None for ``n/a``."""
    problems, rows = [], []
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise MalformedResults([f"header {header} != {list(RESULT_COLUMNS)}"])
        for lineno, r in enumerate(reader, start=2):
            if len(r) != len(RESULT_COLUMNS):
                problems.append(f"line {lineno}: {len(r)} fields")
                continue
            d = dict(zip(RESULT_COLUMNS, r))
            if d["value"] == "n/a":
                d["value"] = None
            else:
                try:
                    d["value"] = float(d["value"])
                except ValueError:
                    problems.append(f"line {lineno}: value {d['value']!r}")
                    continue
            rows.append(d)
    if problems:
        raise MalformedResults(problems)
    return rows


def aggregate(rows):
    """``{(case, method, metric): (count, median, q25, q75)}`` over numeric values."""
    groups = defaultdict(list)
    for r in rows:
        if r["value"] is not None:
            groups[(r["case"], r["method"], r["metric"])].append(r["value"])
    out = {}
    for key in sorted(groups):
        v = np.asarray(groups[key])
        q25, med, q75 = np.percentile(v, [25, 50, 75])
        out[key] = (len(v), float(med), float(q25), float(q75))
    return out


def _format_aggregates(agg):
    lines = [list(AGGREGATE_COLUMNS)]
    for (case, method, metric), (count, med, q25, q75) in agg.items():
        lines.append([case, method, metric, str(count), repr(med), repr(q25), repr(q75)])
    return lines


def write_aggregates(agg, path):
    with Path(path).open("w", newline="") as f:
        csv.writer(f).writerows(_format_aggregates(agg))


def pareto_front(points):
    """Names whose (effect, error) pair no other point dominates.

    ``q`` dominates ``p`` when it is no worse in both coordinates and
    strictly better in at least one; identical points both stay.
    """
    front = []
    for name, (e, r) in points.items():
        dominated = any(e2 <= e and r2 <= r and (e2 < e or r2 < r)
                        for other, (e2, r2) in points.items() if other != name)
        if not dominated:
            front.append(name)
    return sorted(front)


def pareto_by_case(agg, effect="tce", error="error"):
    cases = sorted({c for c, _, _ in agg})
    out = {}
    for case in cases:
        pts = {m: (agg[(case, m, effect)][1], agg[(case, m, error)][1])
               for (c, m, k) in agg if c == case and k == effect and (case, m, error) in agg}
        out[case] = {"points": {m: list(p) for m, p in sorted(pts.items())}, "front": pareto_front(pts)}
    return out


def plot_data(rows, sigmas=None):
    """Per-instance (tce, error, cf_mae) points with the instance noise scale."""
    sigmas = sigmas or {}
    pts = defaultdict(dict)
    for r in rows:
        if r["metric"] in ("tce", "error", "cf_mae") and r["value"] is not None:
            pts[(r["case"], r["method"], r["dataset_id"])][r["metric"]] = r["value"]
    out = defaultdict(list)
    for (case, method, did), vals in sorted(pts.items()):
        out[case].append({"dataset_id": did, "method": method, "sigma": sigmas.get(did), **vals})
    return dict(out)


def acceptance_checks(agg, cases):
    """Trend checks on case-suite aggregates as ``[(name, passed, detail)]``."""
    def med(case, method, metric):
        v = agg.get((case, method, metric))
        return None if v is None else v[1]

    checks = []
    for case in cases:
        f, u = med(case, "fairpfn", "tce"), med(case, "unfair", "tce")
        if f is not None and u is not None:
            checks.append((f"{case}: fairpfn median TCE <= 0.5 x unfair", f <= 0.5 * u, f"{f:.4f} vs {u:.4f}"))
        f, u, rnd = (med(case, m, "cf_mae") for m in ("fairpfn", "unfair", "random"))
        if None not in (f, u, rnd):
            checks.append((f"{case}: fairpfn median cf-MAE below unfair and random", f < u and f < rnd,
                           f"{f:.4f} vs {u:.4f}, {rnd:.4f}"))
    e = med("biased", "fairpfn", "error")
    if e is not None:
        checks.append(("biased: fairpfn median AUC > 0.5", 1.0 - e > 0.5, f"AUC {1.0 - e:.4f}"))
    return checks


def build_report(results_path, out_dir, sigmas=None):
    rows = read_results(results_path)
    agg = aggregate(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregates(agg, out / "aggregates.csv")
    pareto = pareto_by_case(agg)
    aliases = {m: METHOD_ALIASES[m] for m in {m for _, m, _ in agg} if m in METHOD_ALIASES}
    (out / "pareto.json").write_text(json.dumps({"cases": pareto, "aliases": aliases}, indent=1, sort_keys=True))
    (out / "plot_data.json").write_text(json.dumps(plot_data(rows, sigmas), indent=1, sort_keys=True))
    return agg, pareto


def verify(results_path, out_dir):
    """True when aggregates.csv equals a fresh recomputation from the raw rows."""
    fresh = _format_aggregates(aggregate(read_results(results_path)))
    with (Path(out_dir) / "aggregates.csv").open(newline="") as f:
        stored = list(csv.reader(f))
    return stored == fresh
