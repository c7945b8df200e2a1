"""求积规则 - 球面上带权点集的构造、读写与多项式精确性校验

所有规则的权重归一化为总和 1（球面测度 μ(S²)=1）。
"精确度 n" 指对 Π_n = span{Y_ℓm : ℓ < n} 中的函数积分精确。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre

from sphere_fmt.errors import PointSetParseError, ResourceLimitError, ValidationError

logger = logging.getLogger(__name__)

FAMILIES = ("GL", "SD", "SP", "GENERIC")

_UNIT_TOL = 1e-8
_DEFAULT_GRAM_BYTES = 512 * 1024 * 1024


@dataclass(frozen=True)
class SphericalPoint:
    """球面点：余纬 theta ∈ [0,π]，经度 phi ∈ [0,2π)"""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta out of range: {self.theta}")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi out of range: {self.phi}")

    @property
    def xyz(self) -> np.ndarray:
        s = math.sin(self.theta)
        return np.array([s * math.cos(self.phi), s * math.sin(self.phi), math.cos(self.theta)])

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float) -> "SphericalPoint":
        r = math.sqrt(x * x + y * y + z * z)
        if abs(r - 1.0) > _UNIT_TOL:
            raise ValueError(f"not a unit vector (norm {r!r})")
        theta = math.acos(min(1.0, max(-1.0, z / r)))
        phi = math.atan2(y, x) % (2 * math.pi)
        return cls(theta, phi)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    球面求积规则 Q_N = {(w_k, x_k)}，构造后不可变。

    eq=False：按对象身份哈希，便于按规则缓存变换计划。
    GL 规则额外记录环结构（n_lat 条纬线环 × n_lon 个等距经度），
    节点按纬线环优先排列：k = t * n_lon + i。
    """

    xyz: np.ndarray
    weights: np.ndarray
    exactness_degree: int = 0
    family: str = "GENERIC"
    spec: str = ""
    n_lat: int = 0
    n_lon: int = 0
    ring_z: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must have shape (N, 3), got {xyz.shape}")
        if weights.shape != (xyz.shape[0],):
            raise ValueError(f"{weights.shape[0]} weights for {xyz.shape[0]} points")
        if xyz.shape[0] == 0:
            raise ValueError("rule has no points")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown rule family {self.family!r}")
        if self.exactness_degree < 0:
            raise ValueError("exactness_degree must be >= 0")
        xyz.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.xyz.shape[0]

    @property
    def is_grid(self) -> bool:
        """是否具有可分离的 GL 环结构（启用 FFT 快速路径）"""
        return self.family == "GL" and self.ring_z is not None

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arccos(np.clip(self.xyz[:, 2], -1.0, 1.0))

    @cached_property
    def phi(self) -> np.ndarray:
        return np.mod(np.arctan2(self.xyz[:, 1], self.xyz[:, 0]), 2 * np.pi)

    def point(self, k: int) -> SphericalPoint:
        if not 0 <= k < self.size:
            raise IndexError(f"node {k} out of range for rule with {self.size} nodes")
        return SphericalPoint(float(self.theta[k]), float(self.phi[k]))

    def with_degree(self, degree: int) -> "QuadratureRule":
        return replace(self, exactness_degree=degree)

    def describe(self) -> str:
        return self.spec or f"{self.family.lower()}[{self.size}]"


def _xyz_from_angles(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    s = np.sin(theta)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), np.cos(theta)])


def gauss_legendre_rule(degree: int) -> QuadratureRule:
    """
    Gauss-Legendre 张量积规则：cosθ 方向 ⌊(n−1)/2⌋+1 个 GL 节点，经度方向 n 个等距节点。

    节点数 N = n·(⌊(n−1)/2⌋+1)，对 Π_n 积分精确。
    """
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    n_lon = degree
    n_lat = (degree - 1) // 2 + 1
    z, wt = roots_legendre(n_lat)
    # 北极到南极：z 降序
    z = z[::-1].copy()
    wt = wt[::-1].copy()

    theta = np.repeat(np.arccos(z), n_lon)
    phi = np.tile(2 * np.pi * np.arange(n_lon) / n_lon, n_lat)
    xyz = _xyz_from_angles(theta, phi)
    # 极点处保持 z 的精确值
    xyz[:, 2] = np.repeat(z, n_lon)
    weights = np.repeat(wt / (2 * n_lon), n_lon)

    return QuadratureRule(
        xyz=xyz,
        weights=weights,
        exactness_degree=degree,
        family="GL",
        spec=f"gl:{degree}",
        n_lat=n_lat,
        n_lon=n_lon,
        ring_z=z,
    )


def spiral_rule(count: int) -> QuadratureRule:
    """广义螺旋点：θ_k = arccos(1 − (2k−1)/N)，φ_k = 1.8√N θ_k，等权 1/N"""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    k = np.arange(1, count + 1, dtype=np.float64)
    theta = np.arccos(np.clip(1.0 - (2 * k - 1) / count, -1.0, 1.0))
    phi = np.mod(1.8 * math.sqrt(count) * theta, 2 * np.pi)
    return QuadratureRule(
        xyz=_xyz_from_angles(theta, phi),
        weights=np.full(count, 1.0 / count),
        exactness_degree=0,
        family="SP",
        spec=f"sp:{count}",
    )


def load_pointset(path: str | Path, weight_mode: str = "from_file") -> QuadratureRule:
    """
    读取点集文件：每行 `x y z` 或 `x y z w`，以 # 开头的行忽略。

    weight_mode="from_file" 要求每行 4 列；"equal" 赋等权 1/N（忽略第 4 列）。
    """
    if weight_mode not in ("from_file", "equal"):
        raise ValueError(f"unknown weight_mode {weight_mode!r}")
    path = Path(path)
    name = str(path)
    if not path.is_file():
        raise FileNotFoundError(f"point set file not found: {name}")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise PointSetParseError(name, None, f"cannot read file: {e}") from e

    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) not in (3, 4):
            raise PointSetParseError(name, lineno, f"expected 3 or 4 columns, got {len(tokens)}")
        if weight_mode == "from_file" and len(tokens) != 4:
            raise PointSetParseError(name, lineno, "weight column required in from_file mode")
        try:
            values = [float(t) for t in tokens]
        except ValueError as e:
            raise PointSetParseError(name, lineno, f"not a number: {e}") from e
        norm = math.sqrt(values[0] ** 2 + values[1] ** 2 + values[2] ** 2)
        if abs(norm - 1.0) > _UNIT_TOL:
            raise PointSetParseError(name, lineno, f"not a unit vector (norm {norm!r})")
        if weight_mode == "from_file" and values[3] <= 0:
            raise PointSetParseError(name, lineno, f"non-positive weight {values[3]!r}")
        rows.append(values)

    if not rows:
        raise PointSetParseError(name, None, "no points found")

    data = np.array([r[:3] for r in rows])
    if weight_mode == "equal":
        weights = np.full(len(rows), 1.0 / len(rows))
    else:
        weights = np.array([r[3] for r in rows])
        total = weights.sum()
        if abs(total - 1.0) > 1e-12:
            logger.info("Normalizing weights of %s (sum was %.15g)", name, total)
            weights = weights / total

    suffix = ":equal" if weight_mode == "equal" else ""
    logger.debug("Loaded %d points from %s", len(rows), name)
    return QuadratureRule(xyz=data, weights=weights, family="GENERIC", spec=f"file:{name}{suffix}")


def save_pointset(rule: QuadratureRule, path: str | Path, with_weights: bool = True) -> None:
    """以规范格式写出点集（repr 浮点数、单空格分隔），load → save 对规范文件逐字节一致"""
    lines = []
    for k in range(rule.size):
        cols = [float(v) for v in rule.xyz[k]]
        if with_weights:
            cols.append(float(rule.weights[k]))
        lines.append(" ".join(repr(c) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def rule_from_spec(spec: str) -> QuadratureRule:
    """解析规则描述：gl:<degree> | sp:<N> | file:<path>[:equal]"""
    kind, sep, arg = spec.partition(":")
    if not sep or not arg:
        raise ValueError(f"invalid rule spec {spec!r}")
    if kind == "gl":
        return gauss_legendre_rule(_positive_int(arg, spec))
    if kind == "sp":
        return spiral_rule(_positive_int(arg, spec))
    if kind == "file":
        if arg.endswith(":equal"):
            return load_pointset(arg[: -len(":equal")], weight_mode="equal")
        return load_pointset(arg, weight_mode="from_file")
    raise ValueError(f"unknown rule kind {kind!r} in {spec!r}")


def _positive_int(text: str, spec: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"invalid integer in rule spec {spec!r}") from None
    if value < 1:
        raise ValueError(f"rule size must be >= 1 in {spec!r}")
    return value


# ---------------------------------------------------------------------------
# 精确性校验
# ---------------------------------------------------------------------------


def gram_matrix(
    rule: QuadratureRule,
    bandlimit: int,
    memory_bytes: int = _DEFAULT_GRAM_BYTES,
    chunk_size: int = 512,
) -> np.ndarray:
    """U[(ℓ,m),(ℓ',m')] = Σ_k w_k Y_ℓm(x_k) conj(Y_ℓ'm'(x_k))，ℓ,ℓ' < bandlimit"""
    from sphere_fmt.sht import harmonic_matrix

    if bandlimit < 1:
        raise ValueError(f"bandlimit must be >= 1, got {bandlimit}")
    dim = bandlimit * bandlimit
    needed = dim * dim * 16
    if needed > memory_bytes:
        raise ResourceLimitError(
            f"Gram matrix for bandlimit {bandlimit} needs {needed} bytes "
            f"(limit {memory_bytes})"
        )

    gram = np.zeros((dim, dim), dtype=np.complex128)
    for start in range(0, rule.size, chunk_size):
        sl = slice(start, start + chunk_size)
        h = harmonic_matrix(rule.theta[sl], rule.phi[sl], bandlimit, z=rule.xyz[sl, 2])
        gram += (h.T * rule.weights[sl]) @ h.conj()
    return gram


@dataclass(frozen=True)
class ExactnessReport:
    degree: int
    passed: bool
    max_error: float


def quadrature_moments(rule: QuadratureRule, degree: int, chunk_size: int = 512) -> np.ndarray:
    """m_ℓm = Σ_k w_k conj(Y_ℓm(x_k))，ℓ < degree，按平铺下标排列"""
    from sphere_fmt.sht import CoefficientSequence, adjoint

    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    seq = CoefficientSequence(0, rule, rule.sqrt_weights)
    return adjoint(seq, degree, chunk_size=chunk_size).values


def verify_exactness(
    rule: QuadratureRule,
    degree: int,
    tol: float = 1e-10,
    chunk_size: int = 512,
) -> ExactnessReport:
    """
    检查规则对 Π_degree 是否精确：比较矩 Σ_k w_k conj(Y_ℓm(x_k)) 与 δ_ℓ0，ℓ < degree。

    ℓ + ℓ' < degree 的乘积 Y_ℓm·conj(Y_ℓ'm') 张成的正是 Π_degree，
    因此与 Gram 矩阵相应块等于单位阵等价，但内存只随 degree² 增长。
    GL 规则走可分离的快速伴随变换。
    """
    moments = quadrature_moments(rule, degree, chunk_size)
    moments[0] -= 1.0
    max_error = float(np.max(np.abs(moments)))
    passed = max_error <= tol
    logger.debug(
        "Exactness of %s at degree %d: max error %.3e (%s)",
        rule.describe(),
        degree,
        max_error,
        "pass" if passed else "fail",
    )
    return ExactnessReport(degree=degree, passed=passed, max_error=max_error)


def certify_exactness(rule: QuadratureRule, degree: int, tol: float = 1e-10) -> QuadratureRule:
    """校验通过后返回声明了精确度的新规则，否则抛出 ValidationError"""
    report = verify_exactness(rule, degree, tol)
    if not report.passed:
        raise ValidationError(
            f"quadrature exactness (degree {degree})", report.max_error, rule.describe()
        )
    return rule.with_degree(degree)
