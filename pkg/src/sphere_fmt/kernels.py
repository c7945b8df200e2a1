"""框架小波函数求值 - 核 K_γ(x,y) 与半离散框架小波 φ_{j,k}、ψⁿ_{j,k}"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from sphere_fmt.filterbank import FilterBank, SymbolProfile
from sphere_fmt.fmt import LevelLayout
from sphere_fmt.quadrature import SphericalPoint
from sphere_fmt.sht import HarmonicCoefficients, degree_of_flat, eigenvalue, harmonic_matrix

logger = logging.getLogger(__name__)

LOWPASS = "lowpass"


@dataclass(frozen=True)
class KernelSpec:
    profile: SymbolProfile
    scale: int

    @property
    def cutoff(self) -> int:
        """最小的 L，使 ℓ ≥ L 时 γ(λ_ℓ/2^j) 恒为 0"""
        hi = self.profile.support[1]
        if not math.isfinite(hi):
            raise ValueError(f"profile {self.profile.name!r} is not band-limited")
        bound = hi * 2.0**self.scale
        ell = int(math.floor(bound)) + 1
        while ell > 0 and eigenvalue(ell - 1) > bound:
            ell -= 1
        return ell

    def weights(self) -> np.ndarray:
        """γ(λ_ℓ/2^j)，ℓ < cutoff"""
        cutoff = self.cutoff
        if cutoff == 0:
            return np.zeros(0)
        return self.profile(eigenvalue(np.arange(cutoff)) / 2.0**self.scale)


def _as_xyz(points) -> np.ndarray:
    if isinstance(points, SphericalPoint):
        return points.xyz[None, :]
    xyz = np.asarray(points, dtype=np.float64)
    return xyz.reshape(-1, 3)


def _angles(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    theta = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(xyz[:, 1], xyz[:, 0]), 2 * np.pi)
    return theta, phi


def eval_kernel(spec: KernelSpec, x, y, method: str = "addition"):
    """
    K(x,y) = Σ_{ℓ<cutoff} γ(λ_ℓ/2^j) Σ_m conj(Y_ℓm(y)) Y_ℓm(x)。

    method="addition" 用加法定理 Σ_m Y_ℓm(x)conj(Y_ℓm(y)) = (2ℓ+1)P_ℓ(x·y)，
    method="direct" 逐 (ℓ,m) 求和。x 可以是单点或 (K,3) 数组。
    """
    gam = spec.weights()
    xs = _as_xyz(x)
    ys = _as_xyz(y)
    if ys.shape[0] != 1:
        raise ValueError("y must be a single point")
    if gam.size == 0:
        logger.debug("Kernel %s at scale %d has no degrees below its cutoff", spec.profile.name, spec.scale)
        values = np.zeros(xs.shape[0], dtype=np.complex128)
    elif method == "addition":
        ells = np.arange(gam.size)
        t = np.clip(xs @ ys[0], -1.0, 1.0)
        values = legendre.legval(t, gam * (2 * ells + 1)).astype(np.complex128)
    elif method == "direct":
        L = gam.size
        tx, px = _angles(xs)
        ty, py = _angles(ys)
        hx = harmonic_matrix(tx, px, L, z=xs[:, 2])
        hy = harmonic_matrix(ty, py, L, z=ys[:, 2])
        values = hx @ (gam[degree_of_flat(L)] * hy[0].conj())
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(values[0]) if isinstance(x, SphericalPoint) else values


def _framelet_spec(level: int, kind: str, bank: FilterBank) -> tuple[KernelSpec, int]:
    """返回 (核, 节点所在层)：低通用第 j 层规则，高通用第 j+1 层规则"""
    if kind == LOWPASS:
        return KernelSpec(bank.phi, level), level
    if kind.startswith("b") and kind[1:].isdigit():
        n = int(kind[1:])
        if not 1 <= n <= bank.r:
            raise ValueError(f"bank {bank.name} has no high-pass filter {n}")
        return KernelSpec(bank.psi[n - 1], level), level + 1
    raise ValueError(f"unknown framelet kind {kind!r}, expected 'lowpass' or 'b<n>'")


def _node(layout: LevelLayout, level: int, node: int):
    rule = layout[level].rule
    if not 0 <= node < rule.size:
        raise IndexError(f"node {node} out of range for level {level} ({rule.size} nodes)")
    return rule, rule.xyz[node]


def eval_framelet(level: int, node: int, kind: str, x, layout: LevelLayout, bank: FilterBank):
    """φ_{j,k}(x) = √ω_{j,k} K_φ̂(x, x_{j,k})；ψⁿ_{j,k}(x) = √ω_{j+1,k} K_ψ̂ⁿ(x, x_{j+1,k})"""
    spec, node_level = _framelet_spec(level, kind, bank)
    rule, y = _node(layout, node_level, node)
    logger.debug(
        "Evaluating %s framelet of %s at level %d node %d (rule %s, cutoff %d)",
        kind,
        bank.name,
        level,
        node,
        rule.describe(),
        spec.cutoff,
    )
    return rule.sqrt_weights[node] * eval_kernel(spec, x, y)


def framelet_coefficient(
    coeffs: HarmonicCoefficients,
    level: int,
    node: int,
    kind: str,
    layout: LevelLayout,
    bank: FilterBank,
) -> complex:
    """⟨f, φ_{j,k}⟩ = √ω Σ_ℓm γ(λ_ℓ/2^j) ĉ_ℓm Y_ℓm(x_{j,k})，在频域直接计算"""
    spec, node_level = _framelet_spec(level, kind, bank)
    rule, y = _node(layout, node_level, node)
    L = min(spec.cutoff, coeffs.bandlimit)
    if L == 0:
        return 0j
    gam = spec.weights()[:L]
    ty, py = _angles(y[None, :])
    hy = harmonic_matrix(ty, py, L, z=y[None, 2])[0]
    c = coeffs.resized(L).values
    return complex(rule.sqrt_weights[node] * np.sum(gam[degree_of_flat(L)] * c * hy))


def theta_profile(spec: KernelSpec, y: SphericalPoint, thetas: np.ndarray) -> np.ndarray:
    """沿 φ = 0 经线的 (θ, K(x(θ), y)) 表"""
    thetas = np.asarray(thetas, dtype=np.float64)
    xs = np.column_stack([np.sin(thetas), np.zeros_like(thetas), np.cos(thetas)])
    values = eval_kernel(spec, xs, y)
    return np.column_stack([thetas, values.real])


def latlon_grid(
    level: int,
    node: int,
    kind: str,
    layout: LevelLayout,
    bank: FilterBank,
    n_lat: int = 91,
    n_lon: int = 180,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """经纬网格上的框架小波取值 (theta, phi, values[n_lat, n_lon])"""
    theta = np.linspace(0.0, np.pi, n_lat)
    phi = np.linspace(0.0, 2 * np.pi, n_lon, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    xyz = np.column_stack(
        [(np.sin(tt) * np.cos(pp)).ravel(), (np.sin(tt) * np.sin(pp)).ravel(), np.cos(tt).ravel()]
    )
    values = np.asarray(eval_framelet(level, node, kind, xyz, layout, bank)).real
    return theta, phi, values.reshape(n_lat, n_lon)
