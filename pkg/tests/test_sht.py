import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sphere_fmt.errors import ConvergenceError, ShapeMismatchError
from sphere_fmt.quadrature import SphericalPoint, gauss_legendre_rule, spiral_rule
from sphere_fmt.sht import (
    CoefficientSequence,
    HarmonicCoefficients,
    HarmonicIndex,
    adjoint,
    analyse,
    degree_of_flat,
    eigenvalue,
    eval_harmonic,
    flat_index,
    harmonic_matrix,
    is_exact_for,
    legendre_table,
    order_of_flat,
    project,
    synth,
    to_samples,
    to_sequence,
)


def test_flat_index_order():
    assert [flat_index(0, 0), flat_index(1, -1), flat_index(1, 0), flat_index(1, 1)] == [0, 1, 2, 3]
    assert flat_index(2, -1) == 5
    assert HarmonicIndex(3, 3).flat == 15
    assert list(degree_of_flat(3)) == [0, 1, 1, 1, 2, 2, 2, 2, 2]
    assert list(order_of_flat(3)) == [0, -1, 0, 1, -2, -1, 0, 1, 2]


def test_harmonic_index_rejects_invalid_order():
    with pytest.raises(ValueError):
        HarmonicIndex(2, 3)


def test_eigenvalue():
    assert eigenvalue(0) == 0.0
    assert eigenvalue(2) == pytest.approx(math.sqrt(6))
    assert_allclose(eigenvalue(np.arange(3)), [0.0, math.sqrt(2), math.sqrt(6)])


def test_low_degree_harmonics_match_closed_forms():
    pt = SphericalPoint(0.7, 1.3)
    c, s = math.cos(pt.theta), math.sin(pt.theta)

    assert eval_harmonic(HarmonicIndex(0, 0), pt) == pytest.approx(1.0)
    assert eval_harmonic(HarmonicIndex(1, 0), pt) == pytest.approx(math.sqrt(3) * c)
    assert eval_harmonic(HarmonicIndex(1, 1), pt) == pytest.approx(
        -math.sqrt(1.5) * s * complex(math.cos(pt.phi), math.sin(pt.phi))
    )
    assert eval_harmonic(HarmonicIndex(2, 0), pt) == pytest.approx(math.sqrt(5) * (3 * c * c - 1) / 2)


def test_negative_order_is_signed_conjugate():
    pt = SphericalPoint(2.1, 4.0)
    for ell, m in [(1, 1), (3, 2), (5, 3)]:
        pos = eval_harmonic(HarmonicIndex(ell, m), pt)
        neg = eval_harmonic(HarmonicIndex(ell, -m), pt)
        assert neg == pytest.approx((-1) ** m * pos.conjugate())


def test_legendre_table_is_stable_at_high_degree():
    z = np.linspace(-1, 1, 41)
    p = legendre_table(257, z)
    assert np.all(np.isfinite(p))
    # 极点处只有 m = 0 非零，p̄_ℓ0(±1) = (±1)^ℓ √(2ℓ+1)
    ell = np.arange(257)
    assert_allclose(p[ell, 0, -1], np.sqrt(2 * ell + 1), rtol=1e-10)
    assert_allclose(p[ell, 0, 0], (-1.0) ** ell * np.sqrt(2 * ell + 1), rtol=1e-10)


def test_harmonics_orthonormal_under_exact_rule():
    rule = gauss_legendre_rule(16)
    h = harmonic_matrix(rule.theta, rule.phi, 8, z=rule.xyz[:, 2])
    gram = (h.T * rule.weights) @ h.conj()
    assert_allclose(gram, np.eye(64), atol=1e-13)


# ---------------------------------------------------------------------------
# 系数容器
# ---------------------------------------------------------------------------


def test_coefficients_resize_keeps_prefix(random_coefficients):
    coeffs = random_coefficients(4)

    smaller = coeffs.resized(2)
    larger = coeffs.resized(5)

    assert_allclose(smaller.values, coeffs.values[:4])
    assert_allclose(larger.values[:16], coeffs.values)
    assert np.all(larger.values[16:] == 0)
    assert coeffs.tail_norm(2) == pytest.approx(np.linalg.norm(coeffs.values[4:]))


def test_coefficients_grid_layout():
    coeffs = HarmonicCoefficients.one_hot(3, 2, -1)
    grid = coeffs.as_grid()

    assert grid.shape == (3, 5)
    assert grid[2, -1 + 2] == 1.0
    assert np.count_nonzero(grid) == 1
    assert_allclose(HarmonicCoefficients.from_grid(grid).values, coeffs.values)


def test_coefficients_scaled_per_degree():
    coeffs = HarmonicCoefficients(2, np.ones(4))
    scaled = coeffs.scaled(np.array([2.0, 3.0]))
    assert_allclose(scaled.values, [2.0, 3.0, 3.0, 3.0])


def test_coefficients_reject_wrong_length():
    with pytest.raises(ShapeMismatchError):
        HarmonicCoefficients(3, np.zeros(8))


def test_sequence_rejects_wrong_length():
    with pytest.raises(ShapeMismatchError):
        CoefficientSequence(0, gauss_legendre_rule(4), np.zeros(3))


def test_sample_sequence_conversion():
    rule = spiral_rule(20)
    samples = np.linspace(0, 1, 20)

    seq = to_sequence(rule, samples, level=3)

    assert seq.level == 3
    assert_allclose(seq.values, np.sqrt(0.05) * samples)
    assert_allclose(to_samples(seq), samples)
    with pytest.raises(ShapeMismatchError):
        to_sequence(rule, samples[:5])


# ---------------------------------------------------------------------------
# F 与 F*
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("spec_degree,bandlimit", [(16, 8), (15, 8), (9, 5), (4, 6)])
def test_fast_synthesis_matches_dense(random_coefficients, spec_degree, bandlimit):
    # (4, 6) 让 |m| ≥ n_lon，覆盖经度混叠
    rule = gauss_legendre_rule(spec_degree)
    coeffs = random_coefficients(bandlimit)

    fast = synth(coeffs, rule)
    dense = synth(coeffs, rule, dense=True, chunk_size=7)
    h = harmonic_matrix(rule.theta, rule.phi, bandlimit, z=rule.xyz[:, 2])

    assert_allclose(fast.values, dense.values, atol=1e-11)
    assert_allclose(dense.values, rule.sqrt_weights * (h @ coeffs.values), atol=1e-11)
    assert fast.fourier is coeffs


@pytest.mark.parametrize("spec_degree,bandlimit", [(16, 8), (4, 6)])
def test_fast_adjoint_matches_dense(rng, spec_degree, bandlimit):
    rule = gauss_legendre_rule(spec_degree)
    seq = CoefficientSequence(0, rule, rng.standard_normal(rule.size) + 1j * rng.standard_normal(rule.size))

    fast = adjoint(seq, bandlimit)
    dense = adjoint(seq, bandlimit, dense=True, chunk_size=5)

    assert_allclose(fast.values, dense.values, atol=1e-11)


def test_adjoint_inverts_synthesis_on_exact_rule(random_coefficients):
    rule = gauss_legendre_rule(15)
    coeffs = random_coefficients(8)

    assert is_exact_for(rule, 8)
    assert_allclose(adjoint(synth(coeffs, rule), 8).values, coeffs.values, atol=1e-12)


def test_adjoint_is_adjoint_of_synthesis(rng, random_coefficients):
    rule = spiral_rule(150)
    coeffs = random_coefficients(6)
    seq = CoefficientSequence(0, rule, rng.standard_normal(rule.size) + 1j * rng.standard_normal(rule.size))

    lhs = np.vdot(seq.values, synth(coeffs, rule).values)
    rhs = np.vdot(adjoint(seq, 6).values, coeffs.values)

    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_is_exact_for_requires_double_degree():
    assert is_exact_for(gauss_legendre_rule(15), 8)
    assert not is_exact_for(gauss_legendre_rule(14), 8)
    assert not is_exact_for(spiral_rule(1000), 1)


# ---------------------------------------------------------------------------
# 最小二乘投影
# ---------------------------------------------------------------------------


def test_project_recovers_band_limited_data_on_spiral(random_coefficients):
    rule = spiral_rule(300)
    coeffs = random_coefficients(6)
    raw = synth(coeffs, rule).values

    seq, residual = project(raw, rule, 6)

    assert_allclose(seq.fourier.values, coeffs.values, atol=1e-8)
    assert np.linalg.norm(residual) < 1e-8 * np.linalg.norm(raw)
    assert seq.rule is rule


def test_project_residual_is_orthogonal_to_range(rng):
    rule = spiral_rule(200)
    raw = rng.standard_normal(rule.size)

    seq, residual = project(raw, rule, 5, level=2)

    assert seq.level == 2
    assert_allclose(adjoint(CoefficientSequence(0, rule, residual), 5).values, 0.0, atol=1e-9)
    assert_allclose(seq.values + residual, raw, atol=1e-14)


def test_project_rejects_underdetermined_bandlimit():
    with pytest.raises(ValueError, match="nodes"):
        project(np.ones(20), spiral_rule(20), 5)


def test_project_rejects_wrong_length():
    with pytest.raises(ShapeMismatchError):
        project(np.ones(19), spiral_rule(20), 2)


def test_project_raises_when_cg_does_not_converge(rng):
    rule = spiral_rule(100)
    raw = rng.standard_normal(rule.size)

    with pytest.raises(ConvergenceError) as excinfo:
        project(raw, rule, 8, max_iter=1)

    assert excinfo.value.iterations >= 1
    assert excinfo.value.residual_norm > 0


def test_analyse_uses_adjoint_on_exact_rule(random_coefficients):
    rule = gauss_legendre_rule(8)
    coeffs = random_coefficients(4)
    fresh = synth(coeffs, rule)
    seq = fresh.with_values(fresh.values)

    recovered, residual = analyse(seq, 4)

    assert residual == 0.0
    assert_allclose(recovered.values, coeffs.values, atol=1e-12)


def test_analyse_reports_residual_on_inexact_rule(rng):
    rule = spiral_rule(120)
    seq = CoefficientSequence(0, rule, rng.standard_normal(rule.size))

    _, residual = analyse(seq, 4)

    assert 0.0 < residual < 1.0
