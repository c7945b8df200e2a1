import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sphere_fmt.filterbank import bank_by_name, paper_bank_s2
from sphere_fmt.fmt import FrameletTransform
from sphere_fmt.kernels import (
    KernelSpec,
    eval_framelet,
    eval_kernel,
    framelet_coefficient,
    latlon_grid,
    theta_profile,
)
from sphere_fmt.quadrature import SphericalPoint
from sphere_fmt.sht import eigenvalue, synth


def test_kernel_cutoff_and_weights():
    spec = KernelSpec(paper_bank_s2().phi, 3)

    # λ_3 = √12 ≤ 4 < λ_4 = √20
    assert spec.cutoff == 4
    weights = spec.weights()
    assert weights.shape == (4,)
    assert_allclose(weights, paper_bank_s2().phi(eigenvalue(np.arange(4)) / 8))


def test_kernel_addition_theorem_matches_direct_sum(rng):
    spec = KernelSpec(bank_by_name("eta3").psi[1], 4)
    xs = rng.standard_normal((25, 3))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    y = SphericalPoint(1.1, 0.4)

    addition = eval_kernel(spec, xs, y)
    direct = eval_kernel(spec, xs, y, method="direct")

    assert_allclose(addition, direct, atol=1e-10)


def test_kernel_diagonal_is_weighted_dimension_count():
    spec = KernelSpec(paper_bank_s2().psi[0], 3)
    y = SphericalPoint(0.3, 2.0)
    ell = np.arange(spec.cutoff)

    value = eval_kernel(spec, y, y)

    assert isinstance(value, complex)
    assert value.real == pytest.approx(np.sum(spec.weights() * (2 * ell + 1)))


def test_kernel_is_zonal():
    spec = KernelSpec(paper_bank_s2().phi, 4)
    north = SphericalPoint(0.0, 0.0)
    a = eval_kernel(spec, SphericalPoint(0.5, 0.0), north)
    b = eval_kernel(spec, SphericalPoint(0.5, 4.0), north)
    assert a == pytest.approx(b)


def test_kernel_rejects_unknown_method():
    spec = KernelSpec(paper_bank_s2().phi, 2)
    with pytest.raises(ValueError):
        eval_kernel(spec, SphericalPoint(0.0, 0.0), SphericalPoint(0.0, 0.0), method="fft")


def test_framelet_coefficients_match_fast_transform(small_layout, random_coefficients):
    # 系数限制在 φ̂(λ/2^J) = 1 的频段内，分解序列即框架小波内积
    bank = paper_bank_s2()
    coeffs = random_coefficients(4)
    top = small_layout[4]
    dec = FrameletTransform(small_layout, bank).decompose(synth(coeffs.resized(8), top.rule, 4))

    for k in (0, 3, 7):
        expected = framelet_coefficient(coeffs, 2, k, "lowpass", small_layout, bank)
        assert dec.lowpass.values[k] == pytest.approx(expected, abs=1e-12)
    for j, n, k in [(2, 1, 5), (3, 2, 40), (3, 1, 127)]:
        expected = framelet_coefficient(coeffs, j, k, f"b{n}", small_layout, bank)
        assert dec.detail(j, n).values[k] == pytest.approx(expected, abs=1e-12)


def test_framelet_is_scaled_kernel_at_node(small_layout):
    bank = paper_bank_s2()
    rule = small_layout[3].rule
    x = SphericalPoint(1.0, 1.0)

    value = eval_framelet(2, 6, "b1", x, small_layout, bank)

    expected = rule.sqrt_weights[6] * eval_kernel(KernelSpec(bank.psi[0], 2), x, rule.point(6))
    assert value == pytest.approx(expected)


@pytest.mark.parametrize("kind", ["b3", "c1", "lowpass2"])
def test_framelet_rejects_unknown_kind(small_layout, kind):
    with pytest.raises(ValueError):
        eval_framelet(2, 0, kind, SphericalPoint(0.0, 0.0), small_layout, paper_bank_s2())


def test_framelet_rejects_node_out_of_range(small_layout):
    with pytest.raises(IndexError):
        eval_framelet(2, 8, "lowpass", SphericalPoint(0.0, 0.0), small_layout, paper_bank_s2())


def test_theta_profile_peaks_at_centre():
    spec = KernelSpec(paper_bank_s2().phi, 5)
    thetas = np.linspace(0, math.pi, 91)

    rows = theta_profile(spec, SphericalPoint(0.0, 0.0), thetas)

    assert rows.shape == (91, 2)
    assert_allclose(rows[:, 0], thetas)
    assert np.argmax(rows[:, 1]) == 0


def test_latlon_grid_shape(small_layout):
    theta, phi, values = latlon_grid(2, 0, "b2", small_layout, paper_bank_s2(), n_lat=7, n_lon=12)

    assert theta.shape == (7,)
    assert phi.shape == (12,)
    assert values.shape == (7, 12)
    assert np.all(np.isfinite(values))


@pytest.mark.parametrize("kind", ["phi", "psi1", "psi2"])
def test_kernel_is_localized_around_its_centre(kind):
    bank = paper_bank_s2()
    profile = bank.phi if kind == "phi" else bank.psi[int(kind[-1]) - 1]
    spec = KernelSpec(profile, 5)
    thetas = np.linspace(0, math.pi, 721)

    values = np.abs(theta_profile(spec, SphericalPoint(0.0, 0.0), thetas)[:, 1])

    peak = values[0]
    assert peak == pytest.approx(values.max())
    assert values[thetas >= math.pi / 2].max() < 1e-2 * peak


def test_framelet_evaluation_logs_cutoff(small_layout, caplog: pytest.LogCaptureFixture):
    with caplog.at_level("DEBUG", logger="sphere_fmt.kernels"):
        eval_framelet(3, 0, "b1", SphericalPoint(0.0, 0.0), small_layout, paper_bank_s2())

    assert any("cutoff" in record.getMessage() for record in caplog.records)
