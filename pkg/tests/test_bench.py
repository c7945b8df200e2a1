import pytest

from sphere_fmt.bench import BenchRow, ratio_table, run_bench, scaling_exponent
from sphere_fmt.filterbank import paper_bank_s2


def test_run_bench_rows_follow_default_layout():
    rows = run_bench(2, [3, 4], paper_bank_s2(), repeats=1)

    assert [(r.j, r.nodes) for r in rows] == [(3, 32), (4, 128)]
    assert all(r.decompose > 0 and r.reconstruct > 0 and r.pointwise > 0 for r in rows)


def test_ratio_table_leaves_first_ratio_blank():
    rows = [BenchRow(4, 128, 1.0, 2.0, 0.5), BenchRow(5, 512, 3.0, 4.0, 2.0)]

    header, table = ratio_table(rows)

    assert header[:2] == ["J", "N"]
    assert table[0][5:] == ["", "", ""]
    assert table[1][5:] == [3.0, 2.0, 4.0]


def test_scaling_exponent_of_linear_timing():
    rows = [BenchRow(j, 4**j, 1e-6 * 4**j, 1.0, 1.0) for j in range(3, 7)]

    assert scaling_exponent(rows) == pytest.approx(1.0)
    assert scaling_exponent(rows, "reconstruct") == pytest.approx(0.0, abs=1e-12)


def test_scaling_exponent_needs_two_rows():
    with pytest.raises(ValueError):
        scaling_exponent([BenchRow(4, 128, 1.0, 1.0, 1.0)])
