"""
球谐变换 - Y_ℓm 求值、离散傅里叶变换 F 及其伴随 F*、最小二乘投影

归一化约定：∫ Y_ℓm conj(Y_ℓ'm') dμ = δ（μ(S²)=1），含 Condon-Shortley 相位。
系数平铺顺序：ℓ 升序，每个 ℓ 内 m 从 −ℓ 到 ℓ，下标 ℓ² + ℓ + m。

GL 规则走可分离快速路径（经度 FFT + 每个 m 的纬度 Legendre 矩阵，O(L³)），
其余规则按节点分块稠密求值。
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from sphere_fmt.errors import ConvergenceError, ShapeMismatchError
from sphere_fmt.quadrature import QuadratureRule, SphericalPoint

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 512


# ---------------------------------------------------------------------------
# 下标与特征值
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicIndex:
    ell: int
    m: int

    def __post_init__(self):
        if self.ell < 0 or abs(self.m) > self.ell:
            raise ValueError(f"invalid harmonic index (ell={self.ell}, m={self.m})")

    @property
    def flat(self) -> int:
        return flat_index(self.ell, self.m)


def flat_index(ell: int, m: int) -> int:
    return ell * ell + ell + m


@lru_cache(maxsize=64)
def degree_of_flat(bandlimit: int) -> np.ndarray:
    """平铺下标 → ℓ"""
    ell = np.repeat(np.arange(bandlimit), 2 * np.arange(bandlimit) + 1)
    ell.setflags(write=False)
    return ell


@lru_cache(maxsize=64)
def order_of_flat(bandlimit: int) -> np.ndarray:
    """平铺下标 → m"""
    m = np.concatenate([np.arange(-ell, ell + 1) for ell in range(bandlimit)]).astype(np.int64)
    m.setflags(write=False)
    return m


def eigenvalue(ell):
    """λ_ℓ = √(ℓ(ℓ+1))，接受标量或数组"""
    ell = np.asarray(ell, dtype=np.float64)
    if np.any(ell < 0):
        raise ValueError("ell must be >= 0")
    lam = np.sqrt(ell * (ell + 1.0))
    return float(lam) if lam.ndim == 0 else lam


# ---------------------------------------------------------------------------
# 归一化连带 Legendre 函数
# ---------------------------------------------------------------------------


def legendre_table(bandlimit: int, z: np.ndarray) -> np.ndarray:
    """
    返回 P[ℓ, m, k] = p̄_ℓm(z_k)，0 ≤ m ≤ ℓ < bandlimit，其余位置为 0。

    先沿对角线递推 p̄_mm，再用 p̄_{m+1,m} 与三项递推逐次提升 ℓ，
    每一步对全部 m 与节点向量化，不使用阶乘比。
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    L = bandlimit
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    p = np.zeros((L, L, z.size))
    p[0, 0] = 1.0
    for m in range(1, L):
        p[m, m] = -math.sqrt((2 * m + 1) / (2 * m)) * s * p[m - 1, m - 1]
    if L > 1:
        m = np.arange(L - 1)
        p[m + 1, m] = np.sqrt(2.0 * m + 3.0)[:, None] * z * p[m, m]
    for ell in range(2, L):
        m = np.arange(ell - 1, dtype=np.float64)
        a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
        b = np.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
        p[ell, : ell - 1] = a[:, None] * (z * p[ell - 1, : ell - 1] - b[:, None] * p[ell - 2, : ell - 1])
    return p


def _negative_order_sign(bandlimit: int) -> np.ndarray:
    # p̄_{ℓ,−m} = (−1)^m p̄_{ℓ,m}
    return np.where(np.arange(bandlimit) % 2 == 1, -1.0, 1.0)


def harmonic_matrix(
    theta: np.ndarray, phi: np.ndarray, bandlimit: int, z: np.ndarray | None = None
) -> np.ndarray:
    """稠密矩阵 H[k, (ℓ,m)] = Y_ℓm(x_k)，用作校验与 Gram 计算"""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    phi = np.asarray(phi, dtype=np.float64).ravel()
    z = np.cos(theta) if z is None else np.asarray(z, dtype=np.float64).ravel()
    p = legendre_table(bandlimit, z)
    ell = degree_of_flat(bandlimit)
    m = order_of_flat(bandlimit)
    am = np.abs(m)
    sign = np.where((m < 0) & (am % 2 == 1), -1.0, 1.0)
    values = p[ell, am] * sign[:, None]
    return (values * np.exp(1j * np.outer(m, phi))).T


def eval_harmonic(idx: HarmonicIndex, pt: SphericalPoint) -> complex:
    row = harmonic_matrix(np.array([pt.theta]), np.array([pt.phi]), idx.ell + 1)
    return complex(row[0, idx.flat])


# ---------------------------------------------------------------------------
# 系数与序列
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HarmonicCoefficients:
    """ℓ < bandlimit 的复系数，长度 bandlimit²，平铺顺序"""

    bandlimit: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.bandlimit * self.bandlimit,):
            raise ShapeMismatchError(
                f"bandlimit {self.bandlimit} needs {self.bandlimit**2} coefficients, "
                f"got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, bandlimit: int) -> "HarmonicCoefficients":
        return cls(bandlimit, np.zeros(bandlimit * bandlimit, dtype=np.complex128))

    @classmethod
    def one_hot(cls, bandlimit: int, ell: int, m: int) -> "HarmonicCoefficients":
        values = np.zeros(bandlimit * bandlimit, dtype=np.complex128)
        values[flat_index(ell, m)] = 1.0
        return cls(bandlimit, values)

    @property
    def degrees(self) -> np.ndarray:
        return degree_of_flat(self.bandlimit)

    def resized(self, bandlimit: int) -> "HarmonicCoefficients":
        """截断或补零到新的带宽（平铺顺序下前 L'² 项即 ℓ < L'）"""
        size = bandlimit * bandlimit
        if size <= self.values.size:
            return HarmonicCoefficients(bandlimit, self.values[:size].copy())
        padded = np.zeros(size, dtype=np.complex128)
        padded[: self.values.size] = self.values
        return HarmonicCoefficients(bandlimit, padded)

    def scaled(self, per_degree: np.ndarray) -> "HarmonicCoefficients":
        """逐 ℓ 乘以因子 per_degree[ℓ]"""
        return HarmonicCoefficients(self.bandlimit, self.values * per_degree[self.degrees])

    def tail_norm(self, bandlimit: int) -> float:
        return float(np.linalg.norm(self.values[bandlimit * bandlimit :]))

    def as_grid(self) -> np.ndarray:
        """(L, 2L−1) 网格，列下标 m + L − 1"""
        L = self.bandlimit
        grid = np.zeros((L, 2 * L - 1), dtype=np.complex128)
        grid[degree_of_flat(L), order_of_flat(L) + L - 1] = self.values
        return grid

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "HarmonicCoefficients":
        L = grid.shape[0]
        return cls(L, grid[degree_of_flat(L), order_of_flat(L) + L - 1])


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    """
    规则节点上的序列 v_k = √w_k f(x_k)。

    fourier 为可选的傅里叶系数缓存；存在时 synth(fourier) 复现 values。
    """

    level: int
    rule: QuadratureRule
    values: np.ndarray
    fourier: HarmonicCoefficients | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.rule.size,):
            raise ShapeMismatchError(
                f"sequence has {values.size} entries but rule {self.rule.describe()} "
                f"has {self.rule.size} nodes"
            )
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.rule.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_values(self, values: np.ndarray) -> "CoefficientSequence":
        """替换数值并丢弃傅里叶缓存"""
        return CoefficientSequence(self.level, self.rule, values)


def to_sequence(rule: QuadratureRule, samples: np.ndarray, level: int = 0) -> CoefficientSequence:
    """函数采样 f(x_k) → 序列 √w_k f(x_k)"""
    samples = np.asarray(samples)
    if samples.shape != (rule.size,):
        raise ShapeMismatchError(f"{samples.size} samples for rule with {rule.size} nodes")
    return CoefficientSequence(level, rule, rule.sqrt_weights * samples)


def to_samples(seq: CoefficientSequence) -> np.ndarray:
    return seq.values / seq.rule.sqrt_weights


# ---------------------------------------------------------------------------
# F 与 F*
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _ring_table(rule: QuadratureRule, bandlimit: int) -> np.ndarray:
    logger.debug("Building ring Legendre table for %s, L=%d", rule.describe(), bandlimit)
    return legendre_table(bandlimit, rule.ring_z)


def _synth_grid(grid: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    L = grid.shape[0]
    n = rule.n_lon
    p = _ring_table(rule, L)
    sign = _negative_order_sign(L)
    g_pos = np.einsum("lm,lmt->tm", grid[:, L - 1 :], p)
    g_neg = np.einsum("lm,lmt->tm", grid[:, L - 1 :: -1] * sign, p)

    ms = np.arange(L)
    spectrum = np.zeros((rule.n_lat, n), dtype=np.complex128)
    # |m| ≥ n 时频率混叠到 m mod n，add.at 负责累加
    np.add.at(spectrum, (slice(None), ms % n), g_pos)
    np.add.at(spectrum, (slice(None), (-ms[1:]) % n), g_neg[:, 1:])
    rings = n * np.fft.ifft(spectrum, axis=1)
    return (rings * rule.sqrt_weights.reshape(rule.n_lat, n)).ravel()


def _adjoint_grid(values: np.ndarray, rule: QuadratureRule, bandlimit: int) -> np.ndarray:
    L = bandlimit
    n = rule.n_lon
    p = _ring_table(rule, L)
    u = (values * rule.sqrt_weights).reshape(rule.n_lat, n)
    spectrum = np.fft.fft(u, axis=1)
    ms = np.arange(L)
    grid = np.zeros((L, 2 * L - 1), dtype=np.complex128)
    grid[:, L - 1 :] = np.einsum("lmt,tm->lm", p, spectrum[:, ms % n])
    grid[:, L - 1 :: -1] = np.einsum("lmt,tm->lm", p, spectrum[:, (-ms) % n]) * _negative_order_sign(L)
    return grid


def _synth_dense(grid: np.ndarray, rule: QuadratureRule, chunk_size: int) -> np.ndarray:
    L = grid.shape[0]
    sign = _negative_order_sign(L)
    c_pos = grid[:, L - 1 :]
    c_neg = grid[:, L - 1 :: -1] * sign
    out = np.empty(rule.size, dtype=np.complex128)
    ms = np.arange(L)
    for start in range(0, rule.size, chunk_size):
        sl = slice(start, start + chunk_size)
        p = legendre_table(L, rule.xyz[sl, 2])
        e = np.exp(1j * np.outer(ms, rule.phi[sl]))
        g_pos = np.einsum("lm,lmk->mk", c_pos, p)
        g_neg = np.einsum("lm,lmk->mk", c_neg, p)
        out[sl] = (g_pos * e).sum(axis=0) + (g_neg[1:] * e[1:].conj()).sum(axis=0)
    return out * rule.sqrt_weights


def _adjoint_dense(values: np.ndarray, rule: QuadratureRule, bandlimit: int, chunk_size: int) -> np.ndarray:
    L = bandlimit
    u = values * rule.sqrt_weights
    ms = np.arange(L)
    c_pos = np.zeros((L, L), dtype=np.complex128)
    c_neg = np.zeros((L, L), dtype=np.complex128)
    for start in range(0, rule.size, chunk_size):
        sl = slice(start, start + chunk_size)
        p = legendre_table(L, rule.xyz[sl, 2])
        e = np.exp(1j * np.outer(ms, rule.phi[sl]))
        c_pos += np.einsum("lmk,mk->lm", p, u[sl] * e.conj())
        c_neg += np.einsum("lmk,mk->lm", p, u[sl] * e)
    grid = np.zeros((L, 2 * L - 1), dtype=np.complex128)
    grid[:, L - 1 :] = c_pos
    grid[:, L - 1 :: -1] = c_neg * _negative_order_sign(L)
    return grid


def synth(
    coeffs: HarmonicCoefficients,
    rule: QuadratureRule,
    level: int = 0,
    *,
    dense: bool = False,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> CoefficientSequence:
    """离散傅里叶变换 F：v_k = Σ ĉ_ℓm √w_k Y_ℓm(x_k)，结果携带系数缓存"""
    grid = coeffs.as_grid()
    if rule.is_grid and not dense:
        values = _synth_grid(grid, rule)
    else:
        values = _synth_dense(grid, rule, chunk_size)
    return CoefficientSequence(level, rule, values, fourier=coeffs)


def adjoint(
    seq: CoefficientSequence,
    bandlimit: int,
    *,
    dense: bool = False,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> HarmonicCoefficients:
    """伴随变换 F*：ĉ_ℓm = Σ_k v_k √w_k conj(Y_ℓm(x_k))"""
    if bandlimit < 1:
        raise ValueError(f"bandlimit must be >= 1, got {bandlimit}")
    rule = seq.rule
    if rule.is_grid and not dense:
        grid = _adjoint_grid(seq.values, rule, bandlimit)
    else:
        grid = _adjoint_dense(seq.values, rule, bandlimit, chunk_size)
    return HarmonicCoefficients.from_grid(grid)


# ---------------------------------------------------------------------------
# 最小二乘
# ---------------------------------------------------------------------------


def is_exact_for(rule: QuadratureRule, bandlimit: int) -> bool:
    """Π_L 中两函数之积属于 Π_{2L−1}，规则对其精确时 F*F = I"""
    return rule.exactness_degree >= 2 * bandlimit - 1


def _least_squares(
    rule: QuadratureRule,
    values: np.ndarray,
    bandlimit: int,
    cg_tol: float,
    max_iter: int,
    chunk_size: int,
) -> HarmonicCoefficients:
    dim = bandlimit * bandlimit
    rhs = adjoint(CoefficientSequence(0, rule, values), bandlimit, chunk_size=chunk_size).values
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return HarmonicCoefficients.zeros(bandlimit)

    def normal(c: np.ndarray) -> np.ndarray:
        seq = synth(HarmonicCoefficients(bandlimit, c), rule, chunk_size=chunk_size)
        return adjoint(seq, bandlimit, chunk_size=chunk_size).values

    op = LinearOperator((dim, dim), matvec=normal, dtype=np.complex128)
    iterations = 0

    def _count(_xk: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    solution, info = cg(
        op, rhs, x0=np.zeros(dim, dtype=np.complex128), rtol=cg_tol, atol=0.0,
        maxiter=max_iter, callback=_count,
    )
    if info != 0:
        residual = float(np.linalg.norm(normal(solution) - rhs) / rhs_norm)
        raise ConvergenceError(max(iterations, max_iter), residual)
    logger.debug("CG converged in %d iterations (L=%d, N=%d)", iterations, bandlimit, rule.size)
    return HarmonicCoefficients(bandlimit, solution)


def project(
    raw: np.ndarray,
    rule: QuadratureRule,
    bandlimit: int,
    cg_tol: float = 1e-12,
    max_iter: int = 200,
    level: int = 0,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> tuple[CoefficientSequence, np.ndarray]:
    """
    最小二乘投影到 Π_L：v = F(F*F)⁻¹F* raw，在法方程上用共轭梯度求解。

    返回 (带系数缓存的序列, 残差 raw − v)。
    """
    raw = np.asarray(raw, dtype=np.complex128)
    if raw.shape != (rule.size,):
        raise ShapeMismatchError(f"{raw.size} values for rule with {rule.size} nodes")
    if bandlimit < 1:
        raise ValueError(f"bandlimit must be >= 1, got {bandlimit}")
    if bandlimit * bandlimit > rule.size:
        raise ValueError(
            f"bandlimit {bandlimit} needs {bandlimit**2} coefficients but rule "
            f"{rule.describe()} has only {rule.size} nodes"
        )
    coeffs = _least_squares(rule, raw, bandlimit, cg_tol, max_iter, chunk_size)
    seq = synth(coeffs, rule, level, chunk_size=chunk_size)
    return seq, raw - seq.values


def analyse(
    seq: CoefficientSequence,
    bandlimit: int,
    cg_tol: float = 1e-12,
    max_iter: int = 200,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> tuple[HarmonicCoefficients, float]:
    """
    求序列的傅里叶系数：精确规则用伴随变换，否则用最小二乘逆变换。

    返回 (系数, 相对残差)；精确规则上残差记为 0。
    """
    if is_exact_for(seq.rule, bandlimit):
        return adjoint(seq, bandlimit, chunk_size=chunk_size), 0.0
    if bandlimit * bandlimit > seq.rule.size:
        raise ValueError(
            f"bandlimit {bandlimit} exceeds what {seq.rule.size} nodes can resolve"
        )
    coeffs = _least_squares(seq.rule, seq.values, bandlimit, cg_tol, max_iter, chunk_size)
    fitted = synth(coeffs, seq.rule, chunk_size=chunk_size).values
    norm = np.linalg.norm(seq.values)
    residual = float(np.linalg.norm(seq.values - fitted) / norm) if norm > 0 else 0.0
    return coeffs, residual
