import csv
import json
import math

import pytest

from oracles import brute_force
from sopdd import format_tsplib_sop, random_instance
from sopdd.harness import (
    COLUMNS,
    RunRecord,
    aggregate,
    compare_records,
    comparison_rows,
    format_table,
    improvements,
    run_comparison,
    run_instance,
    summary_rows,
    summary_text,
    write_record,
)


def rec(rb, bs, ql, closed=False, time=None, name="x", alg="bnb"):
    gap = 0.0 if closed else (bs - rb) / bs
    return RunRecord(name, 10, alg, 64, 3600, relaxed_bound=rb, best_solution=bs, time=time,
                     gap=gap, queue_length=ql, closed=closed)


# rows of the published width-64 benchmark table: (baseline, challenger, expected)
OPEN_ROWS = [
    # ESC47: RB 10.2%, BS -8.0%, OG 0.4%, QL 583%
    ((334, 1542, 8842), (368, 1676, 1295), {"RB": 0.102, "BS": -0.080, "OG": 0.004, "QL": 5.83}),
    # ESC63: RB 450%, BS 0%, OG 200%, QL 18273%
    ((8, 62, 2756), (44, 62, 15), {"RB": 4.50, "BS": 0.0, "OG": 2.00, "QL": 182.73}),
]


@pytest.mark.parametrize("base, new, want", OPEN_ROWS, ids=["ESC47", "ESC63"])
def test_improvements_reproduce_table_rows(base, new, want):
    imp = improvements(rec(*base), rec(*new, alg="pnb"))
    for col, v in want.items():
        # table cells are rounded to the shown digits
        assert imp[col] == pytest.approx(v, abs=0.0051 if abs(v) < 1 else 0.01 * abs(v)), col
    assert imp["T"] is None


@pytest.mark.parametrize("t_old, t_new, want", [(0.03, 0.07, -0.57), (1.99, 0.64, 2.11)],
                         ids=["ESC07", "ESC12"])
def test_time_improvement_only_when_both_closed(t_old, t_new, want):
    a = rec(2125, 2125, 0, closed=True, time=t_old)
    b = rec(2125, 2125, 0, closed=True, time=t_new, alg="pnb")
    imp = improvements(a, b)
    assert imp["T"] == pytest.approx(want, abs=0.005)
    assert all(imp[c] is None for c in ("RB", "BS", "OG", "QL"))
    mixed = improvements(a, rec(100, 2125, 3, alg="pnb"))
    assert mixed["T"] is None and mixed["RB"] is not None


def test_self_comparison_is_zero():
    r = rec(50, 80, 12)
    imp = improvements(r, r)
    assert all(imp[c] == 0 for c in ("RB", "BS", "OG", "QL"))
    closed = rec(5, 5, 0, closed=True, time=2.0)
    assert improvements(closed, closed)["T"] == 0


def test_undefined_cells():
    err = RunRecord("x", 5, "pnb", 64, 10, error="boom")
    assert all(v is None for v in improvements(rec(1, 2, 3), err).values())
    no_sol = rec(1, math.inf, 3)
    no_sol.gap = 1.0
    assert improvements(rec(1, 2, 3), no_sol)["BS"] is None


def test_aggregate_by_hand():
    rows = [
        {"RB": 0.1, "BS": None, "T": None, "OG": 0.5, "QL": 1.0},
        {"RB": 0.3, "BS": 0.2, "T": None, "OG": -0.5, "QL": 2.0},
        {"RB": 0.8, "BS": None, "T": None, "OG": 0.0, "QL": 6.0},
    ]
    s = aggregate(rows)
    assert s["average"]["RB"] == pytest.approx(0.4)
    assert s["median"]["RB"] == pytest.approx(0.3)
    assert s["average"]["BS"] == pytest.approx(0.2)
    assert s["average"]["T"] is None
    assert s["median"]["QL"] == 2.0


def test_compare_records_pairs():
    pairs = [(rec(10, 20, 5, name="a"), rec(12, 20, 1, name="a", alg="pnb")),
             (rec(30, 40, 4, name="b"), rec(33, 36, 2, name="b", alg="pnb"))]
    rows, summary = compare_records(pairs)
    assert [r[0] for r in rows] == ["a", "b"]
    assert rows[0][4]["RB"] == pytest.approx(0.2)
    assert summary["average"]["RB"] == pytest.approx(0.15)


def test_run_instance_record_matches_final_event(tmp_path):
    inst = random_instance(7, 0.2, seed=4, name="toy")
    r = run_instance(inst, "pnb", width=2, out_dir=str(tmp_path))
    opt, _ = brute_force(inst)
    assert r.closed and r.best_solution == opt
    last = r.events[-1]
    assert last["best_solution"] == r.best_solution
    assert last["relaxed_bound"] == r.relaxed_bound
    assert last["queue_length"] == r.queue_length == 0
    stem = tmp_path / "toy_pnb_w2"
    data = json.loads((stem.parent / (stem.name + ".record.json")).read_text())
    assert data["best_solution"] == opt and "events" not in data
    lines = (stem.parent / (stem.name + ".events.jsonl")).read_text().splitlines()
    assert [json.loads(x) for x in lines] == r.events
    assert list(json.loads(lines[0])) == ["time", "iteration", "relaxed_bound", "best_solution",
                                          "queue_length"]
    text = (stem.parent / (stem.name + ".summary.txt")).read_text()
    assert "closed" in text
    # sequences are reported 1-based
    assert " ".join(str(e + 1) for e in r.best_sequence) in text


def test_open_record_has_no_time():
    inst = random_instance(12, 0.0, seed=2)
    r = run_instance(inst, "bnb", width=2, time_limit=0)
    assert not r.closed and r.time is None
    assert r.to_json()["relaxed_bound"] is not None


def test_error_record_text(tmp_path):
    r = RunRecord("bad", 0, "bnb", 64, 10, error="SopFormatError: nope")
    stem = write_record(r, str(tmp_path))
    assert "nope" in open(stem + ".summary.txt").read()


def test_comparison_batch_writes_tables(tmp_path):
    src = tmp_path / "inst"
    src.mkdir()
    for k, n in enumerate((5, 6)):
        inst = random_instance(n, 0.2, seed=k, name=f"r{n}")
        (src / f"r{n}.sop").write_text(format_tsplib_sop(inst))
    (src / "broken.sop").write_text("DIMENSION: 2\nEDGE_WEIGHT_SECTION\n0 -1\n-1 0\n")
    out = tmp_path / "out"
    seen = []
    cmp = run_comparison(str(src), widths=(2, math.inf), time_limit=30, out_dir=str(out),
                         progress=seen.append)
    assert len(seen) == 2 * 3 * 2
    for width, tag in ((2, "2"), (math.inf, "inf")):
        with open(out / f"comparison_w{tag}.csv") as fh:
            table = list(csv.reader(fh))
        assert table[0][:2] == ["Name", "n"] and len(table[0]) == 2 + 3 * len(COLUMNS)
        names = [r[0] for r in table[1:]]
        assert names == ["broken", "r5", "r6"]
        assert table[1][2] == "error"
        # closed runs: no queue length, time improvement defined
        r5 = table[2]
        assert r5[6] == "-" and r5[-3].endswith("%")
    with open(out / "summary.csv") as fh:
        summary = list(csv.reader(fh))
    assert summary[0] == ["width", "statistic", *COLUMNS]
    assert [r[:2] for r in summary[1:]] == [["2", "average"], ["2", "median"], ["inf", "average"],
                                            ["inf", "median"]]
    text = format_table(comparison_rows(cmp, 2))
    assert "r6" in text
    assert format_table(summary_rows(cmp)).count("\n") == 5


def test_summary_text_without_sequence():
    r = rec(1, math.inf, 3)
    r.gap = 1.0
    text = summary_text(r)
    assert "best solution -" in text and "sequence" not in text
