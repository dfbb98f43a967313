"""
Benchmark runs and comparison tables.

File formats (field order is fixed):

``<stem>.events.jsonl``
    one JSON object per bound event: ``time, iteration, relaxed_bound,
    best_solution, queue_length`` (infinite bounds are written as ``null``)
``<stem>.record.json``
    the :class:`RunRecord` without its events
``<stem>.summary.txt``
    a short human-readable summary
``comparison_w<width>.csv``
    per-instance table: ``name, n``, then ``RB, BS, T, OG, QL`` for the
    baseline, the same for the challenger, then the five improvements
``summary.csv``
    ``width, statistic, RB, BS, T, OG, QL`` with average and median
    improvement per width

Improvements are signed so that a positive value favours the challenger
(peel-and-bound by default): ``(new - old) / old`` for the relaxed bound and
``(old - new) / new`` for best solution, time, gap and queue length.  Bound,
solution, gap and queue improvements are only defined when at least one of
the two runs was still open; time only when both closed.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
import traceback
from dataclasses import asdict, dataclass, field

from .instance import load_sop
from .search import SolverConfig, solve

COLUMNS = ("RB", "BS", "T", "OG", "QL")


@dataclass
class RunRecord:
    instance: str
    n: int
    algorithm: str
    width: float
    time_limit: float | None
    relaxed_bound: float | None = None
    best_solution: float | None = None
    time: float | None = None  # wall time, only when closed
    gap: float | None = None
    queue_length: int | None = None
    closed: bool = False
    iterations: int = 0
    elapsed: float = 0.0
    best_sequence: list | None = None
    filter_stats: dict = field(default_factory=dict)
    error: str | None = None
    events: list = field(default_factory=list, repr=False)

    @property
    def ok(self):
        return self.error is None

    def to_json(self):
        data = asdict(self)
        data.pop("events")
        for key in ("relaxed_bound", "best_solution", "width", "time_limit"):
            v = data[key]
            if isinstance(v, float) and math.isinf(v):
                data[key] = None
        return data


def _width_tag(width):
    return "inf" if width is None or math.isinf(width) else str(int(width))


def record_stem(rec):
    return f"{rec.instance}_{rec.algorithm}_w{_width_tag(rec.width)}"


def record_from_result(name, n, res, time_limit):
    return RunRecord(
        instance=name,
        n=n,
        algorithm=res.algorithm,
        width=res.width,
        time_limit=time_limit,
        relaxed_bound=res.relaxed_bound,
        best_solution=res.best_value,
        time=res.elapsed if res.closed else None,
        gap=res.gap,
        queue_length=res.queue_length,
        closed=res.closed,
        iterations=res.iterations,
        elapsed=res.elapsed,
        best_sequence=list(res.best_sequence) if res.best_sequence is not None else None,
        filter_stats=dict(res.filter_stats),
        events=[e.as_dict() for e in res.events],
    )


def summary_text(rec):
    def fmt(x):
        if x is None or (isinstance(x, float) and math.isinf(x)):
            return "-"
        return f"{x:g}" if isinstance(x, float) else str(x)

    lines = [
        f"instance      {rec.instance} (n={rec.n})",
        f"algorithm     {rec.algorithm}  width {_width_tag(rec.width)}  limit {fmt(rec.time_limit)} s",
    ]
    if rec.error:
        lines.append(f"error         {rec.error}")
        return "\n".join(lines) + "\n"
    lines += [
        f"status        {'closed' if rec.closed else 'open'}",
        f"relaxed bound {fmt(rec.relaxed_bound)}",
        f"best solution {fmt(rec.best_solution)}",
        f"gap           {100 * rec.gap:.2f}%" if rec.gap is not None else "gap           -",
        f"queue length  {rec.queue_length}",
        f"iterations    {rec.iterations}",
        f"wall time     {rec.elapsed:.2f} s",
    ]
    if rec.best_sequence is not None:
        # report elements 1-based as in TSPLIB files
        lines.append("sequence      " + " ".join(str(e + 1) for e in rec.best_sequence))
    return "\n".join(lines) + "\n"


def write_record(rec, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, record_stem(rec))
    with open(stem + ".record.json", "w") as fh:
        json.dump(rec.to_json(), fh, indent=2)
        fh.write("\n")
    with open(stem + ".events.jsonl", "w") as fh:
        for ev in rec.events:
            fh.write(json.dumps(ev) + "\n")
    with open(stem + ".summary.txt", "w") as fh:
        fh.write(summary_text(rec))
    return stem


def run_instance(instance, algorithm="pnb", width=64, time_limit=None, config=None, out_dir=None,
                 on_event=None):
    """Solve an already loaded instance and wrap the outcome in a record."""
    res = solve(instance, algorithm, width=width, time_limit=time_limit,
                config=config or SolverConfig(), on_event=on_event)
    rec = record_from_result(instance.name, instance.n, res, time_limit)
    if out_dir is not None:
        write_record(rec, out_dir)
    return rec


def run_single(path, algorithm="pnb", width=64, time_limit=None, config=None, out_dir=None,
               on_event=None):
    """Load ``path``, run one search and (with ``out_dir``) write its files.

    Parse and I/O errors propagate (``OSError`` / ``SopFormatError``).
    """
    inst = load_sop(path)
    return run_instance(inst, algorithm, width, time_limit, config, out_dir, on_event)


# -- comparisons ----------------------------------------------------------------------

def _rel(new, old):
    if new is None or old is None or math.isinf(new) or math.isinf(old):
        return None
    if old == 0:
        return 0.0 if new == old else None
    return (new - old) / old


def improvements(base, new):
    """Per-column improvement of ``new`` over ``base`` (fractions, or None)."""
    out = dict.fromkeys(COLUMNS)
    if not (base.ok and new.ok):
        return out
    if base.closed and new.closed:
        out["T"] = _rel(base.time, new.time)
        return out
    out["RB"] = _rel(new.relaxed_bound, base.relaxed_bound)
    out["BS"] = _rel(base.best_solution, new.best_solution)
    out["OG"] = _rel(base.gap, new.gap)
    out["QL"] = _rel(base.queue_length, new.queue_length)
    return out


def aggregate(rows):
    """Average and median of each improvement column over the rows where it
    is defined."""
    stats = {"average": {}, "median": {}}
    for col in COLUMNS:
        vals = [r[col] for r in rows if r.get(col) is not None]
        stats["average"][col] = statistics.fmean(vals) if vals else None
        stats["median"][col] = statistics.median(vals) if vals else None
    return stats


@dataclass
class Comparison:
    baseline: str
    challenger: str
    records: dict  # (instance, algorithm, width) -> RunRecord
    rows: dict  # width -> list of (name, n, base record, new record, improvements)
    summary: dict  # width -> aggregate()


def compare_records(pairs):
    """``pairs`` is a list of ``(base, new)`` records; returns rows and summary."""
    rows = []
    for base, new in pairs:
        rows.append((base.instance, base.n, base, new, improvements(base, new)))
    return rows, aggregate([r[4] for r in rows])


def _sop_files(source):
    if isinstance(source, (list, tuple)):
        return list(source)
    files = [os.path.join(source, f) for f in os.listdir(source) if f.lower().endswith(".sop")]
    return sorted(files)


def run_comparison(source, widths=(64, 256), algorithms=("bnb", "pnb"), time_limit=3600,
                   config=None, out_dir=None, progress=None):
    """Run ``algorithms[0]`` (baseline) and ``algorithms[1]`` on every ``.sop``
    file at each width and build the comparison tables.

    A failing instance is recorded with its error and the batch goes on.
    """
    base_alg, new_alg = algorithms
    records = {}
    rows = {}
    summary = {}
    files = _sop_files(source)
    for width in widths:
        pairs = []
        for path in files:
            pair = []
            for alg in (base_alg, new_alg):
                key_name = os.path.splitext(os.path.basename(path))[0]
                try:
                    rec = run_single(path, alg, width, time_limit, config, out_dir)
                except Exception as exc:  # recorded per instance
                    rec = RunRecord(key_name, 0, alg, width, time_limit,
                                    error=f"{type(exc).__name__}: {exc}")
                    if progress is None:
                        traceback.print_exc()
                    if out_dir is not None:
                        write_record(rec, out_dir)
                records[(rec.instance, alg, width)] = rec
                pair.append(rec)
                if progress is not None:
                    progress(rec)
            pairs.append(tuple(pair))
        rows[width], summary[width] = compare_records(pairs)
    cmp = Comparison(base_alg, new_alg, records, rows, summary)
    if out_dir is not None:
        write_tables(cmp, out_dir)
    return cmp


# -- table output -------------------------------------------------------------------------

def _cell(x, pct=False):
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return ""
    if pct:
        return f"{100 * x:.1f}%"
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.2f}"
    return str(x)


def _run_cells(rec):
    if not rec.ok:
        return ["error", "", "", "", ""]
    return [
        _cell(rec.relaxed_bound),
        _cell(rec.best_solution),
        _cell(rec.time),
        _cell(rec.gap, pct=True),
        "-" if rec.closed else _cell(rec.queue_length),
    ]


def comparison_rows(cmp, width):
    """Table rows shaped like the per-width appendix tables."""
    b, c = cmp.baseline, cmp.challenger
    header = ["Name", "n"] + [f"{b} {col}" for col in COLUMNS] + [f"{c} {col}" for col in COLUMNS]
    header += [f"imp {col}" for col in COLUMNS]
    out = [header]
    for name, n, base, new, imp in cmp.rows[width]:
        out.append([name, str(n)] + _run_cells(base) + _run_cells(new)
                   + [_cell(imp[col], pct=True) for col in COLUMNS])
    return out


def summary_rows(cmp):
    out = [["width", "statistic"] + list(COLUMNS)]
    for width, stats in cmp.summary.items():
        for stat in ("average", "median"):
            out.append([_width_tag(width), stat] + [_cell(stats[stat][c], pct=True) for c in COLUMNS])
    return out


def write_tables(cmp, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for width in cmp.rows:
        path = os.path.join(out_dir, f"comparison_w{_width_tag(width)}.csv")
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(comparison_rows(cmp, width))
        paths.append(path)
    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(summary_rows(cmp))
    paths.append(path)
    return paths


def format_table(rows):
    """Plain-text rendering of a list of string rows (first row = header)."""
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for k, r in enumerate(rows):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
