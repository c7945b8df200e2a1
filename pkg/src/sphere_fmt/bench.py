"""计时基准 - 分解/重构耗时随 N_J 的增长"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from sphere_fmt.config import NumericsConfig
from sphere_fmt.filterbank import FilterBank
from sphere_fmt.fmt import FrameletTransform, build_layout, level_bandlimit
from sphere_fmt.sht import HarmonicCoefficients, eigenvalue, synth

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRow:
    j: int
    nodes: int
    decompose: float
    reconstruct: float
    pointwise: float


def _best_of(repeats: int, fn) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_bench(
    j0: int,
    j_values: list[int],
    bank: FilterBank,
    repeats: int = 3,
    seed: int = 0,
    numerics: NumericsConfig | None = None,
) -> list[BenchRow]:
    """对每个 J 在默认 GL 布局上计时一次完整分解与重构，以及频域逐点相乘阶段"""
    rng = np.random.default_rng(seed)
    rows = []
    for j in j_values:
        layout = build_layout(j0, j, None)
        transform = FrameletTransform(layout, bank, numerics)
        bandlimit = level_bandlimit(j)
        values = rng.standard_normal(bandlimit**2) + 1j * rng.standard_normal(bandlimit**2)
        coeffs = HarmonicCoefficients(bandlimit, values)
        # 去掉缓存，让计时包含第 J 层的分析
        fresh = synth(coeffs, layout[j].rule, j)
        seq = fresh.with_values(fresh.values)

        dec = transform.decompose(seq)
        t_dec = _best_of(repeats, lambda: transform.decompose(seq))
        t_rec = _best_of(repeats, lambda: transform.reconstruct(dec))

        # 频域逐点相乘：对每层、每个滤波器做一次符号缩放（与变换无关的 O(N) 部分）
        def pointwise() -> None:
            c = coeffs
            for level in range(j, j0, -1):
                xi = eigenvalue(np.arange(c.bandlimit)) / 2.0**level
                for b in bank.highpass:
                    c.scaled(b(xi))
                c = c.scaled(bank.lowpass(xi)).resized(level_bandlimit(level - 1))

        t_pw = _best_of(repeats, pointwise)
        row = BenchRow(j, layout[j].size, t_dec, t_rec, t_pw)
        logger.info("Bench J=%d N=%d: decompose %.4fs, reconstruct %.4fs", j, row.nodes, t_dec, t_rec)
        rows.append(row)
    return rows


def ratio_table(rows: list[BenchRow]) -> tuple[list[str], list[list[float | str]]]:
    """附加 t(N_J)/t(N_{J−1}) 比值列；第一行比值留空"""
    header = ["J", "N", "t_decompose", "t_reconstruct", "t_pointwise", "ratio_decompose", "ratio_reconstruct", "ratio_pointwise"]
    table: list[list[float | str]] = []
    for i, row in enumerate(rows):
        line: list[float | str] = [str(row.j), str(row.nodes), row.decompose, row.reconstruct, row.pointwise]
        if i == 0:
            line += ["", "", ""]
        else:
            prev = rows[i - 1]
            line += [row.decompose / prev.decompose, row.reconstruct / prev.reconstruct, row.pointwise / prev.pointwise]
        table.append(line)
    return header, table


def scaling_exponent(rows: list[BenchRow], stage: str = "decompose") -> float:
    """log t 对 log N 的最小二乘斜率"""
    if len(rows) < 2:
        raise ValueError("need at least two rows to fit a scaling exponent")
    n = np.log([r.nodes for r in rows])
    t = np.log([getattr(r, stage) for r in rows])
    slope, _ = np.polyfit(n, t, 1)
    return float(slope)
