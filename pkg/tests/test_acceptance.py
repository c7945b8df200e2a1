"""较重的端到端数值检查，默认不运行（pytest -m slow）

轻量版本（小布局、固定种子）在 test_signals.py 中随默认测试运行。
"""

import numpy as np
import pytest

from sphere_fmt.bench import run_bench, scaling_exponent
from sphere_fmt.filterbank import paper_bank_s2
from sphere_fmt.fmt import FrameletTransform, build_layout, redundancy
from sphere_fmt.quadrature import gauss_legendre_rule, spiral_rule
from sphere_fmt.sht import CoefficientSequence, HarmonicCoefficients, adjoint, project, synth
from sphere_fmt.signals import sample_test_function, snr_table

pytestmark = pytest.mark.slow

# 32640 个节点（gl:255）与 32768 个螺旋点上 f0..f4 的相对 L2 投影误差（已发表的参考值）
GL_PROJECTION_ERRORS = [3.9572e-05, 1.0630e-07, 1.9294e-08, 1.6813e-08, 1.6681e-08]
SP_PROJECTION_ERRORS = [5.0854e-04, 4.8888e-04, 4.8297e-04, 4.8112e-04, 4.8053e-04]
# 参考值来自近似快速变换，约 1.7e-8 处饱和；精确变换在此之下继续下降
REFERENCE_FLOOR = 1.7e-8

THETAS = [0.05, 0.10, 0.15, 0.20]
NOISY_SNR = [17.12, 11.09, 7.57, 5.07]
ETA2_SNR_AT_0_10 = 14.92


def test_round_trip_and_energy_on_large_layout():
    rng = np.random.default_rng(7)
    layout = build_layout(4, 7)
    transform = FrameletTransform(layout, paper_bank_s2())
    top = layout[7]

    for _ in range(20):
        values = rng.standard_normal(top.dim) + 1j * rng.standard_normal(top.dim)
        v = synth(HarmonicCoefficients(top.bandlimit, values), top.rule, 7)
        v = v.with_values(v.values)

        dec = transform.decompose(v)
        restored = transform.reconstruct(dec)

        assert np.linalg.norm(restored.values - v.values) <= 1e-10 * v.norm
        low, details = transform.decompose_one(v)
        energy = low.norm**2 + sum(w.norm**2 for w in details)
        assert energy == pytest.approx(v.norm**2, rel=1e-10)


def test_projection_errors_on_gauss_legendre_rule():
    rule = gauss_legendre_rule(255)
    errors = []
    for n in range(5):
        raw = rule.sqrt_weights * sample_test_function(n, rule)
        _, residual = project(raw, rule, 128)
        errors.append(float(np.linalg.norm(residual) / np.linalg.norm(raw)))

    # f0 最粗糙，误差由截断主导，与参考值同一量级
    assert GL_PROJECTION_ERRORS[0] / 10 <= errors[0] <= GL_PROJECTION_ERRORS[0]
    assert errors[1] <= GL_PROJECTION_ERRORS[1]
    assert all(e <= REFERENCE_FLOOR for e in errors[2:])
    assert errors[:4] == sorted(errors[:4], reverse=True)
    assert errors[4] < 1e-13


def test_adjoint_errors_on_spiral_points():
    rule = spiral_rule(32768)
    for n, expected in enumerate(SP_PROJECTION_ERRORS):
        raw = rule.sqrt_weights * sample_test_function(n, rule)
        seq = synth(adjoint(CoefficientSequence(0, rule, raw), 128), rule)
        error = float(np.linalg.norm(raw - seq.values) / np.linalg.norm(raw))

        # 螺旋点非多项式精确，误差由求积误差主导，各 f_n 几乎相同
        assert expected / 2 <= error <= expected * 2


def test_denoising_snr_table():
    rows = snr_table(THETAS, ["eta1", "eta2", "eta3"], seeds=list(range(5)), j0=4, j_max=7, rule="gl:255")

    for row, noisy in zip(rows, NOISY_SNR, strict=True):
        assert row["noisy"] == pytest.approx(noisy, abs=0.5)
        for name in ("eta1", "eta2", "eta3"):
            assert row[name] > row["noisy"] + 1.0
        assert row["eta2"] > row["eta1"]
    # η₃ 与 η₂ 的先后不作要求：θ=0.05 时 η₃ 低于 η₂
    for row in rows[1:]:
        assert row["eta3"] > row["eta1"]
    assert rows[1]["eta2"] == pytest.approx(ETA2_SNR_AT_0_10, abs=1.5)


def test_transform_time_scaling():
    bank = paper_bank_s2()
    rows = run_bench(3, [4, 5, 6, 7, 8], bank, repeats=3)

    assert scaling_exponent(rows, "decompose") <= 1.6
    assert scaling_exponent(rows, "pointwise") <= 1.1
    layout = build_layout(3, 8)
    count, _ = redundancy(layout, bank.r)
    assert count == layout[3].size + bank.r * sum(layout[j].size for j in range(4, 9))
