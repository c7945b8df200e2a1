import numpy as np
import pytest
from numpy.testing import assert_allclose

from sphere_fmt.filterbank import (
    FilterBank,
    SymbolProfile,
    bank_by_name,
    chi_profile,
    example_banks,
    filter_curves,
    nu,
    paper_bank_s2,
    uep_sum,
    validate_partition_limit,
    validate_refinement,
    validate_uep,
)
from sphere_fmt.sht import eigenvalue

ALL_BANKS = ["paper", "eta1", "eta2", "eta3"]


def test_nu_endpoints_and_symmetry():
    t = np.linspace(0, 1, 101)
    assert nu(0.0) == 0.0
    assert nu(1.0) == pytest.approx(1.0)
    assert nu(0.5) == pytest.approx(0.5)
    assert_allclose(nu(t) + nu(1 - t), 1.0, atol=1e-14)


def test_bank_sizes():
    assert paper_bank_s2().r == 2
    assert [example_banks()[name].r for name in ("eta1", "eta2", "eta3")] == [1, 2, 3]


def test_unknown_bank_name():
    with pytest.raises(ValueError, match="unknown filter bank"):
        bank_by_name("haar")


def test_scalar_evaluation_returns_float():
    bank = paper_bank_s2()
    assert bank.lowpass(0.0) == 1.0
    assert bank.lowpass(-0.05) == 1.0
    assert isinstance(bank.highpass[0](0.2), float)


def test_paper_bank_values_at_breakpoints():
    bank = paper_bank_s2()
    a, b1, b2 = bank.lowpass, *bank.highpass

    assert a(1 / 8) == 1.0
    assert a(1 / 4) == 0.0
    assert b1(1 / 8) == 0.0
    assert b1(1 / 4) == pytest.approx(1.0)
    assert b2(1 / 2) == 1.0
    # 两段衔接处平方和为 1
    assert a(3 / 16) ** 2 + b1(3 / 16) ** 2 == pytest.approx(1.0)


@pytest.mark.parametrize("name", ALL_BANKS)
def test_uep_holds_on_whole_half_interval(name):
    bank = bank_by_name(name)
    xi = np.linspace(0.0, 0.5, 4001)
    assert_allclose(uep_sum(bank, xi), 1.0, atol=1e-12)


@pytest.mark.parametrize("name", ALL_BANKS)
def test_validators_pass_for_bundled_banks(name):
    bank = bank_by_name(name)

    uep = validate_uep(bank)
    refinement = validate_refinement(bank)
    partition = validate_partition_limit(bank, range(2, 8), eigenvalue(np.arange(128)))

    assert uep.passed, uep
    assert refinement.passed, refinement
    assert partition.passed, partition


@pytest.mark.parametrize("name", ALL_BANKS)
def test_profiles_vanish_outside_declared_support(name):
    bank = bank_by_name(name)
    for profile in (bank.lowpass, *bank.highpass, bank.phi, *bank.psi):
        assert profile.leak() == 0.0, profile.name


def test_generators_are_band_limited_to_one():
    for name in ALL_BANKS:
        bank = bank_by_name(name)
        assert bank.phi.support[1] == 0.5
        assert all(psi.support[1] <= 1.0 for psi in bank.psi)


def test_phi_limit_tends_to_one():
    bank = paper_bank_s2()
    lam = eigenvalue(np.arange(64))
    assert_allclose(bank.phi(lam / 2.0**10), 1.0)


def test_validate_uep_detects_missing_highpass():
    paper = paper_bank_s2()
    broken = FilterBank(
        name="broken",
        lowpass=paper.lowpass,
        highpass=(paper.highpass[1],),
        phi=paper.phi,
        psi=(paper.psi[1],),
    )

    report = validate_uep(broken)

    assert not report.passed
    assert report.max_deviation > 0.1


def test_validate_refinement_detects_inconsistent_generator():
    # η₃ 的前两个生成元与 paper 滤波器不匹配
    paper = paper_bank_s2()
    eta3 = example_banks()["eta3"]
    mixed = FilterBank(
        name="mixed",
        lowpass=paper.lowpass,
        highpass=paper.highpass,
        phi=paper.phi,
        psi=eta3.psi[:2],
    )

    assert not validate_refinement(mixed).passed


def test_filter_bank_requires_matching_generators():
    paper = paper_bank_s2()
    with pytest.raises(ValueError):
        FilterBank(name="x", lowpass=paper.lowpass, highpass=paper.highpass, phi=paper.phi, psi=())


def test_chi_profile_shape():
    chi = chi_profile(3 / 16, 9 / 16, 1 / 16, 1 / 16)

    assert chi(1 / 8) == 0.0
    assert chi(3 / 16) == pytest.approx(np.sin(np.pi / 4))
    assert chi(1 / 4) == 1.0
    assert chi(1 / 2) == 1.0
    assert chi(5 / 8) == 0.0
    assert chi.support == (1 / 8, 5 / 8)


def test_chi_profile_rejects_overlapping_transitions():
    with pytest.raises(ValueError):
        chi_profile(0.2, 0.25, 0.1, 0.1)


def test_filter_curves_columns():
    grid = np.linspace(0, 1, 9)

    header, data = filter_curves(paper_bank_s2(), grid)

    assert header == ["xi", "a", "b1", "b2", "phi", "psi1", "psi2"]
    assert data.shape == (9, 7)
    assert_allclose(data[:, 0], grid)
    assert data[0, 1] == 1.0


def test_example_banks_share_one_lowpass():
    xi = np.linspace(0.0, 1.0, 1025)
    banks = example_banks()
    reference = banks["eta1"]

    for bank in banks.values():
        assert_allclose(bank.lowpass(xi), reference.lowpass(xi), atol=0)
        assert_allclose(bank.phi(xi), reference.phi(xi), atol=0)


@pytest.mark.parametrize(
    ("name", "left", "right", "interval"),
    [
        ("eta1", "lowpass", 0, (1 / 8, 1 / 4)),
        ("eta2", 0, 1, (1 / 4, 1 / 2)),
        ("eta3", 1, 2, (3 / 8, 1 / 2)),
    ],
)
def test_adjacent_chi_filters_are_complementary_on_overlap(name, left, right, interval):
    bank = example_banks()[name]
    lo, hi = interval
    xi = np.linspace(lo, hi, 513)
    first = bank.lowpass if left == "lowpass" else bank.highpass[left]
    second = bank.highpass[right]

    assert_allclose(first(xi) ** 2 + second(xi) ** 2, 1.0, atol=1e-14)


def test_halved_highpass_breaks_uep_by_three_quarters_of_its_peak():
    paper = paper_bank_s2()
    b1 = paper.highpass[0]
    half = SymbolProfile(lambda xi: 0.5 * b1(xi), b1.support, "half-b1")
    damaged = FilterBank("half", paper.lowpass, (half, paper.highpass[1]), paper.phi, paper.psi)

    report = validate_uep(damaged)

    xi = np.linspace(0.0, 0.25, 2501)[:-1]
    assert not report.passed
    assert report.max_deviation == pytest.approx(0.75 * np.max(b1(xi) ** 2), rel=1e-6)
