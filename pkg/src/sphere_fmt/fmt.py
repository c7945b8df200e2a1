"""
快速框架小波滤波器组变换 - 单层/多层分解与重构

所有卷积都在频域执行：序列的傅里叶系数逐 ℓ 乘以 ŝ(λ_ℓ/2^j)。
第 j 层带宽 L_j = 2^{j−1}（c = 2），即 Λ_j = L_j² 个系数。
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from sphere_fmt.config import NumericsConfig
from sphere_fmt.errors import ShapeMismatchError
from sphere_fmt.events import EventEmitter
from sphere_fmt.filterbank import FilterBank, SymbolProfile
from sphere_fmt.quadrature import QuadratureRule, gauss_legendre_rule, rule_from_spec, spiral_rule
from sphere_fmt.sht import (
    CoefficientSequence,
    HarmonicCoefficients,
    analyse,
    eigenvalue,
    is_exact_for,
    synth,
)

logger = logging.getLogger(__name__)

TRANSFORM_EVENTS = ("stage_residual", "truncation")


def level_bandlimit(j: int) -> int:
    if j < 1:
        raise ValueError(f"level must be >= 1, got {j}")
    return 2 ** (j - 1)


@dataclass(frozen=True)
class Level:
    j: int
    rule: QuadratureRule

    @property
    def bandlimit(self) -> int:
        return level_bandlimit(self.j)

    @property
    def dim(self) -> int:
        """Λ_j"""
        return self.bandlimit**2

    @property
    def size(self) -> int:
        """N_j"""
        return self.rule.size

    @property
    def exact(self) -> bool:
        return is_exact_for(self.rule, self.bandlimit)


@dataclass(frozen=True)
class LevelLayout:
    """层 J₀..J 的求积规则与带宽"""

    levels: tuple[Level, ...]
    c: int = 2

    def __post_init__(self):
        if not self.levels:
            raise ValueError("layout needs at least one level")
        js = [lv.j for lv in self.levels]
        if js != list(range(js[0], js[0] + len(js))):
            raise ValueError(f"levels must be contiguous, got {js}")
        if js[0] < 1:
            raise ValueError("lowest level must be >= 1")
        for lv in self.levels:
            if lv.dim > lv.size:
                raise ValueError(
                    f"level {lv.j}: {lv.dim} coefficients exceed {lv.size} nodes of "
                    f"{lv.rule.describe()}"
                )

    @property
    def j0(self) -> int:
        return self.levels[0].j

    @property
    def j_max(self) -> int:
        return self.levels[-1].j

    @property
    def exact(self) -> bool:
        return all(lv.exact for lv in self.levels)

    def __getitem__(self, j: int) -> Level:
        if not self.j0 <= j <= self.j_max:
            raise KeyError(f"level {j} outside layout [{self.j0}, {self.j_max}]")
        return self.levels[j - self.j0]

    def __iter__(self):
        return iter(self.levels)


def _rule_below(top: QuadratureRule, top_j: int, j: int) -> QuadratureRule:
    if top.family == "GL":
        degree = max(2**j, math.ceil((top.exactness_degree + 1) / 2 ** (top_j - j)) - 1)
        return gauss_legendre_rule(degree)
    if top.family == "SP":
        return spiral_rule(math.ceil(top.size / 4 ** (top_j - j)))
    return gauss_legendre_rule(2**j)


def build_layout(j0: int, j_max: int, top_rule: str | QuadratureRule | None = None) -> LevelLayout:
    """
    构造层布局。默认每层 gl:2^j；给定顶层规则时按族推导下层：
    GL 次数 d → ⌈(d+1)/2^{J−j}⌉−1（不低于 2^j），SP 点数 N → ⌈N/4^{J−j}⌉，
    文件点集下层回落到 gl:2^j。
    """
    if j0 < 1:
        raise ValueError(f"J0 must be >= 1, got {j0}")
    if j_max < j0:
        raise ValueError(f"J must be >= J0, got J={j_max}, J0={j0}")
    if top_rule is None:
        rules = [gauss_legendre_rule(2**j) for j in range(j0, j_max + 1)]
    else:
        top = rule_from_spec(top_rule) if isinstance(top_rule, str) else top_rule
        rules = [_rule_below(top, j_max, j) for j in range(j0, j_max)] + [top]

    layout = LevelLayout(tuple(Level(j, rule) for j, rule in zip(range(j0, j_max + 1), rules, strict=True)))
    for lv in layout:
        if not lv.exact:
            logger.info(
                "Level %d rule %s is not exact for bandlimit %d; least-squares analysis will be used",
                lv.j,
                lv.rule.describe(),
                lv.bandlimit,
            )
    return layout


def redundancy(layout: LevelLayout, r: int, j0: int | None = None) -> tuple[int, float]:
    """输出系数总数 N_{J₀} + r·Σ_{j=J₀+1}^{J} N_j 及其与 N_J 之比"""
    j0 = layout.j0 if j0 is None else j0
    count = layout[j0].size + r * sum(layout[j].size for j in range(j0 + 1, layout.j_max + 1))
    return count, count / layout[layout.j_max].size


def hard_threshold(
    values: np.ndarray, threshold: float, scale: np.ndarray | None = None
) -> tuple[np.ndarray, int]:
    """硬阈值：|v_k|/scale_k ≤ threshold 的项置零，返回 (新数组, 置零个数)"""
    values = np.asarray(values)
    magnitude = np.abs(values) if scale is None else np.abs(values) / scale
    killed = magnitude <= threshold
    out = np.where(killed, 0, values).astype(values.dtype, copy=False)
    return out, int(np.count_nonzero(killed & (values != 0)))


@dataclass(frozen=True, eq=False)
class FrameletDecomposition:
    """
    多层分解结果：J₀ 层低通序列与 w_j^n（j ∈ [J₀, J−1]，位于第 j+1 层规则上）。

    residuals 记录非精确规则上各层最小二乘分析的相对残差。
    """

    layout: LevelLayout
    bank: FilterBank
    j0: int
    lowpass: CoefficientSequence
    details: dict[tuple[int, int], CoefficientSequence]
    residuals: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.lowpass.size != self.layout[self.j0].size:
            raise ShapeMismatchError(
                f"lowpass has {self.lowpass.size} entries, level {self.j0} rule has "
                f"{self.layout[self.j0].size}"
            )
        for j in range(self.j0, self.j_max):
            for n in range(1, self.bank.r + 1):
                if (j, n) not in self.details:
                    raise ShapeMismatchError(f"missing detail sequence w_{j}^{n}")
                expected = self.layout[j + 1].size
                got = self.details[(j, n)].size
                if got != expected:
                    raise ShapeMismatchError(
                        f"detail w_{j}^{n} has {got} entries, level {j + 1} rule has {expected}"
                    )

    @property
    def j_max(self) -> int:
        return self.layout.j_max

    @property
    def r(self) -> int:
        return self.bank.r

    @property
    def total_size(self) -> int:
        return self.lowpass.size + sum(seq.size for seq in self.details.values())

    def detail(self, j: int, n: int) -> CoefficientSequence:
        return self.details[(j, n)]


@dataclass(frozen=True)
class MultiscaleLevel:
    """v_j = low + Σₙ details[n−1]"""

    j: int
    approximation: CoefficientSequence
    low: CoefficientSequence
    details: tuple[CoefficientSequence, ...]


class FrameletTransform:
    """
    球面框架小波的快速多层变换。

    Events:
        stage_residual(int, float): 非精确规则上最小二乘分析 (层, 相对残差)
        truncation(int, float, float): 降采样丢弃了能量 (层, 截断范数, 总范数)
    """

    def __init__(self, layout: LevelLayout, bank: FilterBank, numerics: NumericsConfig | None = None):
        self.events = EventEmitter(TRANSFORM_EVENTS)
        self.layout = layout
        self.bank = bank
        self._numerics = numerics or NumericsConfig()

    # -- 频域工具 -----------------------------------------------------------

    def _xi(self, j: int, bandlimit: int) -> np.ndarray:
        return eigenvalue(np.arange(bandlimit)) / 2.0**j

    def _fourier(
        self, seq: CoefficientSequence, residuals: dict[int, float] | None = None
    ) -> HarmonicCoefficients:
        """
        取序列的傅里叶系数：优先用缓存，否则按规则精确性选择伴随或最小二乘。

        residuals 由调用方持有，记录本次调用中各层的最大最小二乘残差。
        """
        bandlimit = level_bandlimit(seq.level)
        if seq.fourier is not None:
            return seq.fourier.resized(bandlimit)
        num = self._numerics
        coeffs, residual = analyse(
            seq, bandlimit, num.cg_tol, num.cg_max_iter, chunk_size=num.chunk_size
        )
        if not is_exact_for(seq.rule, bandlimit):
            if residuals is not None:
                residuals[seq.level] = max(residuals.get(seq.level, 0.0), residual)
            logger.info("Level %d least-squares analysis residual %.3e", seq.level, residual)
            self.events.emit("stage_residual", seq.level, residual)
        return coeffs

    def _synth(self, coeffs: HarmonicCoefficients, j: int) -> CoefficientSequence:
        return synth(coeffs, self.layout[j].rule, j, chunk_size=self._numerics.chunk_size)

    def _truncate(self, coeffs: HarmonicCoefficients, j: int) -> HarmonicCoefficients:
        """截断到第 j 层带宽，丢弃能量超过容差时告警"""
        bandlimit = level_bandlimit(j)
        tail = coeffs.tail_norm(bandlimit)
        total = float(np.linalg.norm(coeffs.values))
        if total > 0 and tail > self._numerics.truncation_tol * total:
            logger.warning(
                "Downsampling to level %d discards %.3e of %.3e coefficient norm", j, tail, total
            )
            self.events.emit("truncation", j, tail, total)
        return coeffs.resized(bandlimit)

    def _check_level(self, seq: CoefficientSequence) -> None:
        lv = self.layout[seq.level]
        if seq.size != lv.size:
            raise ShapeMismatchError(
                f"sequence at level {seq.level} has {seq.size} entries, rule "
                f"{lv.rule.describe()} has {lv.size}"
            )

    def _require_highpass(self) -> None:
        if self.bank.r < 1:
            raise ValueError(f"bank {self.bank.name} has no high-pass filters")

    # -- 单步算子 -----------------------------------------------------------

    def convolve(self, seq: CoefficientSequence, symbol: SymbolProfile, conj: bool = False) -> CoefficientSequence:
        """离散卷积：傅里叶系数乘以 ŝ(λ_ℓ/2^j)（conj 时取共轭，即 star 滤波器）"""
        self._check_level(seq)
        coeffs = self._fourier(seq)
        factor = symbol(self._xi(seq.level, coeffs.bandlimit))
        if conj:
            factor = np.conj(factor)
        return self._synth(coeffs.scaled(factor), seq.level)

    def downsample(self, seq: CoefficientSequence) -> CoefficientSequence:
        """第 j 层 → 第 j−1 层：在粗规则上重新合成截断后的系数"""
        self._check_level(seq)
        j = seq.level
        if j - 1 < self.layout.j0:
            raise ValueError(f"layout has no level {j - 1}")
        return self._synth(self._truncate(self._fourier(seq), j - 1), j - 1)

    def upsample(self, seq: CoefficientSequence) -> CoefficientSequence:
        """第 j−1 层 → 第 j 层：系数补零后在细规则上重新合成"""
        self._check_level(seq)
        j = seq.level + 1
        if j > self.layout.j_max:
            raise ValueError(f"layout has no level {j}")
        return self._synth(self._fourier(seq).resized(level_bandlimit(j)), j)

    def decompose_one(
        self, v: CoefficientSequence
    ) -> tuple[CoefficientSequence, list[CoefficientSequence]]:
        """v_{j−1} = (v_j ⊛ a*)↓，w_{j−1}^n = v_j ⊛ (bⁿ)*（w 留在第 j 层规则上）"""
        self._require_highpass()
        self._check_level(v)
        j = v.level
        if j - 1 < self.layout.j0:
            raise ValueError(f"layout has no level {j - 1}")
        coeffs = self._fourier(v)
        xi = self._xi(j, coeffs.bandlimit)
        details = [self._synth(coeffs.scaled(np.conj(b(xi))), j) for b in self.bank.highpass]
        low = self._truncate(coeffs.scaled(np.conj(self.bank.lowpass(xi))), j - 1)
        return self._synth(low, j - 1), details

    def reconstruct_one(
        self, low: CoefficientSequence, details: Sequence[CoefficientSequence]
    ) -> CoefficientSequence:
        """v_j = (v_{j−1}↑) ⊛ a + Σₙ w_{j−1}^n ⊛ bⁿ"""
        self._require_highpass()
        self._check_level(low)
        j = low.level + 1
        if len(details) != self.bank.r:
            raise ShapeMismatchError(f"expected {self.bank.r} detail sequences, got {len(details)}")
        for w in details:
            if w.level != j:
                raise ShapeMismatchError(f"detail sequence at level {w.level}, expected {j}")
            self._check_level(w)
        return self._synth(self._merge(self._fourier(low), [self._fourier(w) for w in details], j), j)

    def _merge(
        self, low: HarmonicCoefficients, details: Sequence[HarmonicCoefficients], j: int
    ) -> HarmonicCoefficients:
        bandlimit = level_bandlimit(j)
        xi = self._xi(j, bandlimit)
        total = low.resized(bandlimit).scaled(self.bank.lowpass(xi)).values
        for b, w in zip(self.bank.highpass, details, strict=True):
            total = total + w.resized(bandlimit).scaled(b(xi)).values
        return HarmonicCoefficients(bandlimit, total)

    # -- 多层算法 -----------------------------------------------------------

    def decompose(self, v: CoefficientSequence, j0: int | None = None) -> FrameletDecomposition:
        """
        多层分解：在第 J 层做一次分析，之后每层只在频域逐点相乘，
        每个输出序列各合成一次。
        """
        self._require_highpass()
        j0 = self.layout.j0 if j0 is None else j0
        j_max = self.layout.j_max
        if v.level != j_max:
            raise ShapeMismatchError(f"input sequence is at level {v.level}, expected {j_max}")
        self._check_level(v)
        if not self.layout.j0 <= j0 < j_max:
            raise ValueError(f"J0 must satisfy {self.layout.j0} <= J0 < {j_max}, got {j0}")

        residuals: dict[int, float] = {}
        coeffs = self._fourier(v, residuals)
        details: dict[tuple[int, int], CoefficientSequence] = {}
        for j in range(j_max, j0, -1):
            xi = self._xi(j, coeffs.bandlimit)
            for n, b in enumerate(self.bank.highpass, start=1):
                details[(j - 1, n)] = self._synth(coeffs.scaled(np.conj(b(xi))), j)
            coeffs = self._truncate(coeffs.scaled(np.conj(self.bank.lowpass(xi))), j - 1)
        lowpass = self._synth(coeffs, j0)
        logger.debug("Decomposed level %d into %d detail sequences down to %d", j_max, len(details), j0)
        return FrameletDecomposition(
            layout=self.layout,
            bank=self.bank,
            j0=j0,
            lowpass=lowpass,
            details=details,
            residuals=residuals,
        )

    def reconstruct(self, dec: FrameletDecomposition) -> CoefficientSequence:
        """多层重构：逐层在频域合并低通与高通系数，最后在第 J 层合成一次"""
        self._require_highpass()
        if dec.bank.r != self.bank.r:
            raise ShapeMismatchError(f"decomposition has r={dec.bank.r}, bank has r={self.bank.r}")
        coeffs = self._fourier(dec.lowpass)
        for j in range(dec.j0 + 1, self.layout.j_max + 1):
            details = [self._fourier(dec.detail(j - 1, n)) for n in range(1, self.bank.r + 1)]
            coeffs = self._merge(coeffs, details, j)
        return self._synth(coeffs, self.layout.j_max)

    def multiscale_parts(self, dec: FrameletDecomposition) -> list[MultiscaleLevel]:
        """逐层拆分 v_j = (v_{j−1}↑)⊛a + Σₙ w_{j−1}ⁿ⊛bⁿ，各部分单独合成"""
        self._require_highpass()
        parts: list[MultiscaleLevel] = []
        coeffs = self._fourier(dec.lowpass)
        for j in range(dec.j0 + 1, self.layout.j_max + 1):
            bandlimit = level_bandlimit(j)
            xi = self._xi(j, bandlimit)
            low = coeffs.resized(bandlimit).scaled(self.bank.lowpass(xi))
            detail_coeffs = [
                self._fourier(dec.detail(j - 1, n)).resized(bandlimit).scaled(b(xi))
                for n, b in enumerate(self.bank.highpass, start=1)
            ]
            total = low.values + sum((d.values for d in detail_coeffs), np.zeros_like(low.values))
            coeffs = HarmonicCoefficients(bandlimit, total)
            parts.append(
                MultiscaleLevel(
                    j=j,
                    approximation=self._synth(coeffs, j),
                    low=self._synth(low, j),
                    details=tuple(self._synth(d, j) for d in detail_coeffs),
                )
            )
        return parts


def threshold_details(
    dec: FrameletDecomposition, threshold: float, sample_units: bool = True
) -> tuple[FrameletDecomposition, dict[tuple[int, int], int]]:
    """
    对全部高通序列做硬阈值，低通保持不变。

    sample_units 为真时比较 |w_k|/√ω_k（ω_k 为所在节点权重），即函数采样单位。
    被修改的序列丢弃傅里叶缓存，重构时重新分析。
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    details: dict[tuple[int, int], CoefficientSequence] = {}
    kills: dict[tuple[int, int], int] = {}
    for key, seq in dec.details.items():
        scale = seq.rule.sqrt_weights if sample_units else None
        values, killed = hard_threshold(seq.values, threshold, scale)
        kills[key] = killed
        details[key] = seq if killed == 0 else seq.with_values(values)
    thresholded = FrameletDecomposition(
        layout=dec.layout,
        bank=dec.bank,
        j0=dec.j0,
        lowpass=dec.lowpass,
        details=details,
        residuals=dict(dec.residuals),
    )
    return thresholded, kills
