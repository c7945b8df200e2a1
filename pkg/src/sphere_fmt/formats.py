"""文本文件格式 - 系数/序列/节点值 CSV 与分解结果目录"""

import csv
import logging
import re
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from sphere_fmt.errors import PointSetParseError, ShapeMismatchError
from sphere_fmt.filterbank import bank_by_name
from sphere_fmt.fmt import FrameletDecomposition, Level, LevelLayout
from sphere_fmt.quadrature import QuadratureRule, rule_from_spec
from sphere_fmt.sht import CoefficientSequence, HarmonicCoefficients, degree_of_flat, order_of_flat

logger = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
LOWPASS_FILE = "lowpass.csv"
# rule 取到行尾，文件点集路径可以含空格
_SEQ_HEADER = re.compile(r"#\s*level=(-?\d+)\s+N=(\d+)\s+rule=(.+)")
_DETAIL_NAME = re.compile(r"detail_j(\d+)_n(\d+)\.csv")


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_rows(path: Path) -> list[list[str]]:
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    with path.open(encoding="utf-8", newline="") as f:
        return [row for row in csv.reader(f) if row]


def _parse_float(path: Path, lineno: int, token: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise PointSetParseError(str(path), lineno, f"not a number: {token!r}") from None


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


# ---------------------------------------------------------------------------
# 节点值 k,value
# ---------------------------------------------------------------------------


def write_values(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        values = values.real
    write_table(path, ["k", "value"], ([str(k), v] for k, v in enumerate(values)))


def read_values(path: str | Path) -> np.ndarray:
    path = Path(path)
    rows = _open_rows(path)
    if not rows or rows[0] != ["k", "value"]:
        raise PointSetParseError(str(path), 1, "expected header 'k,value'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise PointSetParseError(str(path), lineno, f"expected 2 columns, got {len(row)}")
        if row[0].strip() != str(lineno - 2):
            raise PointSetParseError(str(path), lineno, f"node index {row[0]!r} out of order")
        values.append(_parse_float(path, lineno, row[1]))
    if not values:
        raise PointSetParseError(str(path), None, "no values found")
    return np.array(values)


# ---------------------------------------------------------------------------
# 球谐系数 ell,m,re,im
# ---------------------------------------------------------------------------


def write_coefficients(path: str | Path, coeffs: HarmonicCoefficients) -> None:
    ell = degree_of_flat(coeffs.bandlimit)
    m = order_of_flat(coeffs.bandlimit)
    rows = ([str(a), str(b), c.real, c.imag] for a, b, c in zip(ell, m, coeffs.values, strict=True))
    write_table(path, ["ell", "m", "re", "im"], rows)


def read_coefficients(path: str | Path) -> HarmonicCoefficients:
    path = Path(path)
    rows = _open_rows(path)
    if not rows or rows[0] != ["ell", "m", "re", "im"]:
        raise PointSetParseError(str(path), 1, "expected header 'ell,m,re,im'")
    body = rows[1:]
    bandlimit = int(round(len(body) ** 0.5))
    if bandlimit * bandlimit != len(body) or bandlimit == 0:
        raise ShapeMismatchError(f"{path}: {len(body)} coefficients is not a square count")
    ell = degree_of_flat(bandlimit)
    m = order_of_flat(bandlimit)
    values = np.empty(len(body), dtype=np.complex128)
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != 4:
            raise PointSetParseError(str(path), lineno, f"expected 4 columns, got {len(row)}")
        if (row[0].strip(), row[1].strip()) != (str(ell[i]), str(m[i])):
            raise PointSetParseError(str(path), lineno, f"expected (ell, m) = ({ell[i]}, {m[i]})")
        values[i] = complex(_parse_float(path, lineno, row[2]), _parse_float(path, lineno, row[3]))
    return HarmonicCoefficients(bandlimit, values)


# ---------------------------------------------------------------------------
# 序列 k,re,im
# ---------------------------------------------------------------------------


def write_sequence(path: str | Path, seq: CoefficientSequence) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(f"# level={seq.level} N={seq.size} rule={seq.rule.describe()}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["k", "re", "im"])
        for k, v in enumerate(seq.values):
            writer.writerow([str(k), _fmt(v.real), _fmt(v.imag)])


def read_sequence(path: str | Path, rule: QuadratureRule) -> CoefficientSequence:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise PointSetParseError(str(path), None, "empty file")
    match = _SEQ_HEADER.fullmatch(lines[0].strip())
    if match is None:
        raise PointSetParseError(str(path), 1, "expected '# level=<j> N=<N> rule=<tag>'")
    level, count = int(match.group(1)), int(match.group(2))
    if match.group(3) != rule.describe():
        logger.warning("%s was written for rule %s, reading it on %s", path, match.group(3), rule.describe())
    if count != rule.size:
        raise ShapeMismatchError(f"{path}: N={count} but rule {rule.describe()} has {rule.size} nodes")
    if len(lines) < 2 or lines[1].strip() != "k,re,im":
        raise PointSetParseError(str(path), 2, "expected header 'k,re,im'")
    rows = [row for row in csv.reader(lines[2:]) if row]
    if len(rows) != count:
        raise ShapeMismatchError(f"{path}: header says N={count}, found {len(rows)} rows")
    values = np.empty(count, dtype=np.complex128)
    for i, row in enumerate(rows):
        lineno = i + 3
        if len(row) != 3:
            raise PointSetParseError(str(path), lineno, f"expected 3 columns, got {len(row)}")
        values[i] = complex(_parse_float(path, lineno, row[1]), _parse_float(path, lineno, row[2]))
    return CoefficientSequence(level, rule, values)


# ---------------------------------------------------------------------------
# 分解目录
# ---------------------------------------------------------------------------


def write_decomposition(directory: str | Path, dec: FrameletDecomposition) -> list[Path]:
    """写出 lowpass.csv、detail_j<j>_n<n>.csv 与 manifest.txt，返回写出的文件"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    manifest = [f"J={dec.j_max}", f"J0={dec.j0}", f"r={dec.r}", f"bank={dec.bank.name}"]
    manifest += [f"rule_j{lv.j}={lv.rule.describe()}" for lv in dec.layout if lv.j >= dec.j0]
    (directory / MANIFEST).write_text("\n".join(manifest) + "\n", encoding="utf-8")
    written.append(directory / MANIFEST)

    write_sequence(directory / LOWPASS_FILE, dec.lowpass)
    written.append(directory / LOWPASS_FILE)
    for (j, n), seq in sorted(dec.details.items()):
        path = directory / f"detail_j{j}_n{n}.csv"
        write_sequence(path, seq)
        written.append(path)
    logger.debug("Wrote decomposition with %d files to %s", len(written), directory)
    return written


def read_manifest(directory: str | Path) -> dict[str, str]:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    entries = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PointSetParseError(str(path), lineno, "expected key=value")
        entries[key.strip()] = value.strip()
    for key in ("J", "J0", "r", "bank"):
        if key not in entries:
            raise PointSetParseError(str(path), None, f"missing key {key!r}")
    return entries


def read_decomposition(directory: str | Path) -> FrameletDecomposition:
    directory = Path(directory)
    manifest = read_manifest(directory)
    j_max, j0, r = int(manifest["J"]), int(manifest["J0"]), int(manifest["r"])
    bank = bank_by_name(manifest["bank"])
    if bank.r != r:
        raise ShapeMismatchError(f"manifest says r={r} but bank {bank.name} has r={bank.r}")

    levels = []
    for j in range(j0, j_max + 1):
        spec = manifest.get(f"rule_j{j}")
        if spec is None:
            raise PointSetParseError(str(directory / MANIFEST), None, f"missing key 'rule_j{j}'")
        levels.append(Level(j, rule_from_spec(spec)))
    layout = LevelLayout(tuple(levels))

    lowpass = read_sequence(directory / LOWPASS_FILE, layout[j0].rule)
    details = {}
    for j in range(j0, j_max):
        for n in range(1, r + 1):
            details[(j, n)] = read_sequence(directory / f"detail_j{j}_n{n}.csv", layout[j + 1].rule)
    extra = [
        p.name
        for p in directory.iterdir()
        if (m := _DETAIL_NAME.fullmatch(p.name)) and (int(m.group(1)), int(m.group(2))) not in details
    ]
    if extra:
        logger.warning("Ignoring unexpected detail files in %s: %s", directory, ", ".join(sorted(extra)))
    return FrameletDecomposition(layout=layout, bank=bank, j0=j0, lowpass=lowpass, details=details)
