"""滤波器组 - 低通/高通符号 â、b̂ⁿ 与生成元 φ̂、ψ̂ⁿ，以及紧框架条件校验"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from sphere_fmt.config import BANK_NAMES
from sphere_fmt.errors import ValidationError

logger = logging.getLogger(__name__)

_HALF_PI = math.pi / 2


def nu(t):
    """ν(t) = t⁴(35 − 84t + 70t² − 20t³)"""
    t = np.asarray(t, dtype=np.float64)
    value = t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
    return float(value) if value.ndim == 0 else value


def _rise(t: np.ndarray) -> np.ndarray:
    return np.sin(_HALF_PI * nu(np.clip(t, 0.0, 1.0)))


def _fall(t: np.ndarray) -> np.ndarray:
    return np.cos(_HALF_PI * nu(np.clip(t, 0.0, 1.0)))


@dataclass(frozen=True)
class SymbolProfile:
    """
    偶函数符号 ξ ↦ s(|ξ|)。

    func 只需定义在 ξ ≥ 0 上；support 为 [0,∞) 上的支撑区间。
    """

    func: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    name: str = ""
    smoothness: str = "C^{4-eps}"

    def __call__(self, xi):
        xi = np.abs(np.asarray(xi, dtype=np.float64))
        flat = np.atleast_1d(xi).ravel()
        value = np.asarray(self.func(flat), dtype=np.float64).reshape(xi.shape)
        return float(value) if value.ndim == 0 else value

    def leak(self, upper: float = 2.0, step: float = 1e-4) -> float:
        """声明支撑之外的最大绝对值"""
        xi = np.arange(0.0, upper + step / 2, step)
        lo, hi = self.support
        outside = (xi < lo) | (xi > hi)
        values = np.abs(self(xi[outside]))
        return float(values.max()) if values.size else 0.0


@dataclass(frozen=True)
class FilterBank:
    """η = {a; b¹..bʳ} 及其生成元 Ψ = {φ; ψ¹..ψʳ}"""

    name: str
    lowpass: SymbolProfile
    highpass: tuple[SymbolProfile, ...]
    phi: SymbolProfile
    psi: tuple[SymbolProfile, ...]

    def __post_init__(self):
        if len(self.highpass) != len(self.psi):
            raise ValueError(
                f"{len(self.highpass)} high-pass filters but {len(self.psi)} generators"
            )

    @property
    def r(self) -> int:
        return len(self.highpass)


# ---------------------------------------------------------------------------
# 显式构造的滤波器组
# ---------------------------------------------------------------------------


def _paper_a(xi: np.ndarray) -> np.ndarray:
    return np.select([xi <= 1 / 8, xi < 1 / 4], [1.0, _fall(8 * xi - 1)], 0.0)


def _paper_b1(xi: np.ndarray) -> np.ndarray:
    return np.select(
        [xi <= 1 / 8, xi < 1 / 4, xi < 1 / 2],
        [0.0, _rise(8 * xi - 1), _fall(4 * xi - 1)],
        0.0,
    )


def _paper_b2(xi: np.ndarray) -> np.ndarray:
    return np.select([xi <= 1 / 4, xi < 1 / 2, xi == 1 / 2], [0.0, _rise(4 * xi - 1), 1.0], 0.0)


def _paper_phi(xi: np.ndarray) -> np.ndarray:
    return np.select([xi <= 1 / 4, xi < 1 / 2], [1.0, _fall(4 * xi - 1)], 0.0)


def _paper_psi1(xi: np.ndarray) -> np.ndarray:
    return np.select(
        [xi <= 1 / 4, xi < 1 / 2, xi <= 1],
        [0.0, _rise(4 * xi - 1), _fall(2 * xi - 1) ** 2],
        0.0,
    )


def _paper_psi2(xi: np.ndarray) -> np.ndarray:
    return np.select([xi < 1 / 2, xi <= 1], [0.0, _fall(2 * xi - 1) * _rise(2 * xi - 1)], 0.0)


@lru_cache(maxsize=1)
def paper_bank_s2() -> FilterBank:
    """两个高通滤波器的显式带限滤波器组，â 支撑于 [0,1/4]"""
    return FilterBank(
        name="paper",
        lowpass=SymbolProfile(_paper_a, (0.0, 1 / 4), "a"),
        highpass=(
            SymbolProfile(_paper_b1, (1 / 8, 1 / 2), "b1"),
            SymbolProfile(_paper_b2, (1 / 4, 1 / 2), "b2"),
        ),
        phi=SymbolProfile(_paper_phi, (0.0, 1 / 2), "phi"),
        psi=(
            SymbolProfile(_paper_psi1, (1 / 4, 1.0), "psi1"),
            SymbolProfile(_paper_psi2, (1 / 2, 1.0), "psi2"),
        ),
    )


def chi_profile(c_left: float, c_right: float, eps_left: float, eps_right: float) -> SymbolProfile:
    """
    光滑鼓包 χ_[cL,cR];εL,εR：在 [cL−εL, cR+εR] 外为 0，平台区为 1，
    上升沿 sin(π/2·ν(·))、下降沿 cos(π/2·ν(·))，按 |ξ| 求值。
    """
    if not (
        eps_left > 0
        and eps_right > 0
        and c_left - eps_left < c_left + eps_left <= c_right - eps_right < c_right + eps_right
    ):
        raise ValueError(
            f"invalid chi parameters: cL={c_left}, cR={c_right}, epsL={eps_left}, epsR={eps_right}"
        )
    lo, up_end = c_left - eps_left, c_left + eps_left
    down_start, hi = c_right - eps_right, c_right + eps_right

    def func(xi: np.ndarray) -> np.ndarray:
        return np.select(
            [xi <= lo, xi < up_end, xi <= down_start, xi < hi],
            [0.0, _rise((xi - lo) / (2 * eps_left)), 1.0, _fall((xi - down_start) / (2 * eps_right))],
            0.0,
        )

    name = f"chi[{c_left:g},{c_right:g};{eps_left:g},{eps_right:g}]"
    return SymbolProfile(func, (max(lo, 0.0), hi), name)


def refinable_generators(
    lowpass: SymbolProfile, highpass: Sequence[SymbolProfile]
) -> tuple[SymbolProfile, tuple[SymbolProfile, ...]]:
    """
    由滤波器推出生成元：φ̂(ξ) = â(ξ/2)·1[|ξ| ≤ 1/2]，ψ̂ⁿ(ξ) = b̂ⁿ(ξ/2)·φ̂(ξ/2)。

    要求 â 在 [0,1/8] 上恒为 1 且支撑于 [0,1/4]，此时细化方程精确成立。
    """

    def phi_func(xi: np.ndarray) -> np.ndarray:
        return np.where(xi <= 0.5, lowpass(xi / 2), 0.0)

    phi = SymbolProfile(phi_func, (0.0, 0.5), "phi")

    def make_psi(b: SymbolProfile) -> SymbolProfile:
        def psi_func(xi: np.ndarray) -> np.ndarray:
            return b(xi / 2) * phi(xi / 2)

        lo, hi = b.support
        return SymbolProfile(psi_func, (2 * lo, min(2 * hi, 1.0)), f"psi[{b.name}]")

    return phi, tuple(make_psi(b) for b in highpass)


def _chi_bank(name: str, highpass: Sequence[SymbolProfile]) -> FilterBank:
    lowpass = chi_profile(-3 / 16, 3 / 16, 1 / 16, 1 / 16)
    phi, psi = refinable_generators(lowpass, highpass)
    bank = FilterBank(name=name, lowpass=lowpass, highpass=tuple(highpass), phi=phi, psi=psi)
    report = validate_uep(bank)
    if not report.passed:
        raise ValidationError(f"UEP of bank {name}", report.max_deviation)
    return bank


@lru_cache(maxsize=1)
def example_banks() -> dict[str, FilterBank]:
    """共享低通 â 的三个 χ 滤波器组，分别含 1、2、3 个高通滤波器"""
    return {
        "eta1": _chi_bank("eta1", [chi_profile(3 / 16, 9 / 16, 1 / 16, 1 / 16)]),
        "eta2": _chi_bank(
            "eta2",
            [chi_profile(3 / 16, 3 / 8, 1 / 16, 1 / 8), chi_profile(3 / 8, 9 / 16, 1 / 8, 1 / 16)],
        ),
        "eta3": _chi_bank(
            "eta3",
            [
                chi_profile(3 / 16, 5 / 16, 1 / 16, 1 / 16),
                chi_profile(5 / 16, 7 / 16, 1 / 16, 1 / 16),
                chi_profile(7 / 16, 9 / 16, 1 / 16, 1 / 16),
            ],
        ),
    }


def bank_by_name(name: str) -> FilterBank:
    if name == "paper":
        return paper_bank_s2()
    banks = example_banks()
    if name not in banks:
        raise ValueError(f"unknown filter bank {name!r}, expected one of {', '.join(BANK_NAMES)}")
    return banks[name]


# ---------------------------------------------------------------------------
# 校验
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    condition: str
    passed: bool
    max_deviation: float


def _grid(step: float, upper: float = 0.5) -> np.ndarray:
    if step <= 0:
        raise ValueError(f"grid_step must be > 0, got {step}")
    return np.linspace(0.0, upper, int(round(upper / step)) + 1)


def uep_sum(bank: FilterBank, xi: np.ndarray) -> np.ndarray:
    """|â(ξ)|² + Σₙ|b̂ⁿ(ξ)|²"""
    total = np.abs(bank.lowpass(xi)) ** 2
    for b in bank.highpass:
        total = total + np.abs(b(xi)) ** 2
    return total


def validate_uep(bank: FilterBank, grid_step: float = 1e-4, tol: float = 1e-10) -> CheckReport:
    """在 [0,1/2] 中 φ̂(2ξ) ≠ 0 的网格点上检查 |â|² + Σ|b̂ⁿ|² = 1"""
    xi = _grid(grid_step)
    xi = xi[np.abs(bank.phi(2 * xi)) > 0]
    deviation = float(np.max(np.abs(uep_sum(bank, xi) - 1.0))) if xi.size else 0.0
    passed = deviation <= tol
    logger.debug("UEP check for %s: max deviation %.3e", bank.name, deviation)
    return CheckReport("UEP", passed, deviation)


def validate_refinement(bank: FilterBank, grid_step: float = 1e-4, tol: float = 1e-12) -> CheckReport:
    """检查 φ̂(2ξ) = â(ξ)φ̂(ξ) 与 ψ̂ⁿ(2ξ) = b̂ⁿ(ξ)φ̂(ξ)，ξ ∈ [0,1/2]"""
    xi = _grid(grid_step)
    phi = bank.phi(xi)
    deviation = np.max(np.abs(bank.phi(2 * xi) - bank.lowpass(xi) * phi))
    for b, psi in zip(bank.highpass, bank.psi, strict=True):
        deviation = max(deviation, np.max(np.abs(psi(2 * xi) - b(xi) * phi)))
    deviation = float(deviation)
    return CheckReport("refinement", deviation <= tol, deviation)


def validate_partition_limit(
    bank: FilterBank,
    levels: Sequence[int],
    eigvals: np.ndarray,
    tol: float = 1e-12,
) -> CheckReport:
    """
    检查 |φ̂(λ/2^{j+1})|² = |φ̂(λ/2^j)|² + Σₙ|ψ̂ⁿ(λ/2^j)|²，
    并检查 |φ̂(λ/2^j)| 随 j 单调不减（j 足够大时趋于 1）。
    """
    lam = np.asarray(eigvals, dtype=np.float64)
    levels = list(levels)
    deviation = 0.0
    previous = None
    monotone = True
    for j in levels:
        fine = np.abs(bank.phi(lam / 2.0 ** (j + 1))) ** 2
        coarse = np.abs(bank.phi(lam / 2.0**j)) ** 2
        for psi in bank.psi:
            coarse = coarse + np.abs(psi(lam / 2.0**j)) ** 2
        if lam.size:
            deviation = max(deviation, float(np.max(np.abs(fine - coarse))))
        current = np.abs(bank.phi(lam / 2.0**j))
        if previous is not None and np.any(current < previous - tol):
            monotone = False
        previous = current
    passed = deviation <= tol and monotone
    return CheckReport("partition", passed, deviation)


def filter_curves(bank: FilterBank, grid: np.ndarray) -> tuple[list[str], np.ndarray]:
    """返回 (表头, 数据) ，列为 xi, a, b1..br, phi, psi1..psir"""
    grid = np.asarray(grid, dtype=np.float64)
    header = ["xi", "a"]
    header += [f"b{n}" for n in range(1, bank.r + 1)]
    header += ["phi"]
    header += [f"psi{n}" for n in range(1, bank.r + 1)]
    columns = [grid, bank.lowpass(grid)]
    columns += [b(grid) for b in bank.highpass]
    columns += [bank.phi(grid)]
    columns += [psi(grid) for psi in bank.psi]
    return header, np.column_stack(columns)
