"""sphere-fmt 命令行入口"""

import argparse
import logging
import math
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sphere_fmt.bench import ratio_table, run_bench, scaling_exponent
from sphere_fmt.config import BANK_NAMES, AppConfig, NumericsConfig
from sphere_fmt.errors import (
    ConfigError,
    ConvergenceError,
    PointSetParseError,
    ResourceLimitError,
    ShapeMismatchError,
    ValidationError,
)
from sphere_fmt.filterbank import (
    bank_by_name,
    filter_curves,
    validate_partition_limit,
    validate_refinement,
    validate_uep,
)
from sphere_fmt.fmt import FrameletTransform, build_layout, level_bandlimit, redundancy
from sphere_fmt.formats import (
    read_decomposition,
    read_values,
    write_decomposition,
    write_table,
    write_values,
)
from sphere_fmt.kernels import KernelSpec, eval_framelet, latlon_grid, theta_profile
from sphere_fmt.quadrature import (
    SphericalPoint,
    gram_matrix,
    rule_from_spec,
    save_pointset,
    verify_exactness,
)
from sphere_fmt.sht import CoefficientSequence, adjoint, eigenvalue, project, synth, to_samples
from sphere_fmt.signals import (
    DenoiseConfig,
    add_noise,
    denoise,
    sample_test_function,
    snr,
    textured_signal,
)
from sphere_fmt.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3
EXIT_INTERNAL = 4


@dataclass
class RunConfig:
    """解析并校验后的命令参数"""

    command: str
    bank: str
    j0: int
    j_max: int
    rule: str | None
    seed: int
    out_dir: Path
    numerics: NumericsConfig


def _map_command_error(e: Exception) -> tuple[str, int]:
    """将异常映射为 (用户可读消息, 退出码)。"""
    if isinstance(e, ValidationError):
        return (f"validation failed: {e}", EXIT_VALIDATION)
    if isinstance(e, FileNotFoundError):
        return (f"missing file: {e}", EXIT_INPUT)
    if isinstance(e, PointSetParseError):
        return (f"cannot parse {e.path}: {e}", EXIT_INPUT)
    if isinstance(e, ShapeMismatchError):
        return (f"shape mismatch: {e}", EXIT_INPUT)
    if isinstance(e, ConfigError):
        return (f"invalid option: {e}", EXIT_INPUT)
    if isinstance(e, ResourceLimitError):
        return (f"resource limit: {e} (raise numerics.gram_memory_bytes in the config)", EXIT_INPUT)
    if isinstance(e, ConvergenceError):
        return (f"least-squares solve failed: {e}", EXIT_CONVERGENCE)
    if isinstance(e, ValueError):
        return (f"invalid input: {e}", EXIT_INPUT)
    return (f"unexpected error: {e}", EXIT_INTERNAL)


def _parse_levels(text: str) -> tuple[int, int]:
    j0_text, sep, j_text = text.partition(":")
    try:
        if not sep:
            raise ValueError
        j0, j_max = int(j0_text), int(j_text)
    except ValueError:
        raise ConfigError(f"--levels must look like J0:J, got {text!r}") from None
    if j0 < 1:
        raise ConfigError(f"--levels: J0 must be >= 1, got {j0}")
    if j_max <= j0:
        raise ConfigError(f"--levels: J must exceed J0, got {text!r}")
    return j0, j_max


def _build_run_config(args: argparse.Namespace, app: AppConfig) -> RunConfig:
    defaults = app.defaults
    bank = args.bank or defaults.bank
    if bank not in BANK_NAMES:
        raise ConfigError(f"--bank must be one of {', '.join(BANK_NAMES)}, got {bank!r}")
    j0, j_max = _parse_levels(args.levels or defaults.levels)
    rule = args.rule if args.rule is not None else defaults.rule
    if rule is not None and rule.partition(":")[0] not in ("gl", "sp", "file"):
        raise ConfigError(f"--rule must be gl:<degree>, sp:<N> or file:<path>, got {rule!r}")
    seed = args.seed if args.seed is not None else defaults.seed
    out_dir = Path(args.out or defaults.out_dir)
    return RunConfig(
        command=args.command,
        bank=bank,
        j0=j0,
        j_max=j_max,
        rule=rule,
        seed=seed,
        out_dir=out_dir,
        numerics=app.numerics,
    )


def _prepare_out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


# ---------------------------------------------------------------------------
# 命令实现
# ---------------------------------------------------------------------------


def cmd_decompose(cfg: RunConfig, args: argparse.Namespace) -> int:
    layout = build_layout(cfg.j0, cfg.j_max, cfg.rule)
    top = layout[cfg.j_max]
    samples = read_values(args.input)
    if samples.size != top.size:
        raise ShapeMismatchError(
            f"{args.input} has {samples.size} values but level-{cfg.j_max} rule "
            f"{top.rule.describe()} has {top.size} nodes (check --rule/--levels)"
        )
    num = cfg.numerics
    seq, residual = project(
        top.rule.sqrt_weights * samples, top.rule, top.bandlimit,
        num.cg_tol, num.cg_max_iter, level=cfg.j_max, chunk_size=num.chunk_size,
    )
    transform = FrameletTransform(layout, bank_by_name(cfg.bank), num)
    dec = transform.decompose(seq)

    out = _prepare_out(cfg)
    write_decomposition(out, dec)
    input_norm = np.linalg.norm(top.rule.sqrt_weights * samples)
    projection_residual = float(np.linalg.norm(residual) / input_norm) if input_norm > 0 else 0.0
    report = [f"projection_residual={projection_residual!r}"]
    report += [f"stage_residual_j{j}={r!r}" for j, r in sorted(dec.residuals.items())]
    count, rate = redundancy(layout, dec.r, dec.j0)
    report += [f"coefficients={count}", f"redundancy={rate!r}"]
    (out / "report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
    print(f"Wrote {1 + len(dec.details)} sequences to {out}")
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig, args: argparse.Namespace) -> int:
    dec = read_decomposition(args.input)
    transform = FrameletTransform(dec.layout, dec.bank, cfg.numerics)
    residuals: list[tuple[int, float]] = []
    transform.events.on("stage_residual", lambda j, r: residuals.append((j, r)))
    seq = transform.reconstruct(dec)
    out = _prepare_out(cfg)
    write_values(out / "reconstructed.csv", to_samples(seq).real)
    for j, r in residuals:
        print(f"level {j}: least-squares residual {r:.3e}")
    print(f"Wrote {seq.size} values to {out / 'reconstructed.csv'}")
    return EXIT_OK


def cmd_denoise(cfg: RunConfig, args: argparse.Namespace) -> int:
    layout = build_layout(cfg.j0, cfg.j_max, cfg.rule)
    top = layout[cfg.j_max]
    reference = None
    sigma = None
    if args.input:
        noisy = read_values(args.input)
        if noisy.size != top.size:
            raise ShapeMismatchError(
                f"{args.input} has {noisy.size} values, level-{cfg.j_max} rule has {top.size} nodes"
            )
        if args.reference:
            reference = read_values(args.reference)
            if reference.size != noisy.size:
                raise ShapeMismatchError(f"{args.reference} and {args.input} differ in length")
    else:
        reference = sample_test_function(4, top.rule, normalized=False)
        noisy, sigma = add_noise(reference, args.theta, cfg.seed)

    dcfg = DenoiseConfig(
        theta=args.theta, seed=cfg.seed, j0=cfg.j0, j_max=cfg.j_max, bank=cfg.bank,
        rule=cfg.rule, sigma=sigma,
    )
    restored, report = denoise(noisy, dcfg, reference=reference, layout=layout, numerics=cfg.numerics)
    out = _prepare_out(cfg)
    write_values(out / "restored.csv", restored)
    (out / "report.txt").write_text("\n".join(report.lines()) + "\n", encoding="utf-8")
    if report.snr_restored is not None:
        print(f"SNR noisy {report.snr_noisy:.2f} dB, restored {report.snr_restored:.2f} dB")
    print(f"Wrote {out / 'restored.csv'}")
    return EXIT_OK


def cmd_approx_error(cfg: RunConfig, args: argparse.Namespace) -> int:
    bandlimit = 2**cfg.j_max
    rule = rule_from_spec(cfg.rule or f"gl:{2 * bandlimit - 1}")
    num = cfg.numerics
    rows = []
    for n in args.functions:
        raw = rule.sqrt_weights * sample_test_function(n, rule)
        if args.method == "adjoint":
            seq = synth(adjoint(CoefficientSequence(0, rule, raw), bandlimit), rule)
            residual = raw - seq.values
        else:
            _, residual = project(
                raw, rule, bandlimit, num.cg_tol, num.cg_max_iter, chunk_size=num.chunk_size
            )
        error = float(np.linalg.norm(residual) / np.linalg.norm(raw))
        rows.append([str(n), error])
        print(f"f{n}: relative L2 error {error:.4e}")
    out = _prepare_out(cfg)
    write_table(out / "approx_error.csv", ["n", "relative_error"], rows)
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args: argparse.Namespace) -> int:
    j_values = list(range(cfg.j0 + 1, cfg.j_max + 1))
    rows = run_bench(cfg.j0, j_values, bank_by_name(cfg.bank), args.repeats, cfg.seed, cfg.numerics)
    header, table = ratio_table(rows)
    out = _prepare_out(cfg)
    write_table(out / "bench.csv", header, table)
    if len(rows) >= 2:
        print(f"scaling exponent (decompose): {scaling_exponent(rows, 'decompose'):.3f}")
        print(f"scaling exponent (pointwise): {scaling_exponent(rows, 'pointwise'):.3f}")
    count, rate = redundancy(build_layout(cfg.j0, cfg.j_max, None), bank_by_name(cfg.bank).r)
    print(f"redundancy at J={cfg.j_max}: {count} coefficients ({rate:.3f} x N_J)")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    num = cfg.numerics
    bank = bank_by_name(cfg.bank)
    checks = [
        validate_uep(bank, num.uep_grid_step, num.uep_tol),
        validate_refinement(bank, num.uep_grid_step, num.uep_tol),
        validate_partition_limit(
            bank, range(cfg.j0, cfg.j_max + 1), eigenvalue(np.arange(2**cfg.j_max)), num.uep_tol
        ),
    ]
    for check in checks:
        print(f"{check.condition}: max deviation {check.max_deviation:.3e} ({'ok' if check.passed else 'FAIL'})")
        if not check.passed:
            raise ValidationError(check.condition, check.max_deviation, f"bank {bank.name}")

    layout = build_layout(cfg.j0, cfg.j_max, cfg.rule)
    for lv in layout:
        report = verify_exactness(lv.rule, 2**lv.j, num.exactness_tol, num.chunk_size)
        status = "ok" if report.passed else "FAIL"
        print(f"level {lv.j} {lv.rule.describe()}: exactness max error {report.max_error:.3e} ({status})")
        if not report.passed:
            raise ValidationError(
                f"quadrature exactness at level {lv.j}", report.max_error, lv.rule.describe()
            )
        if args.gram:
            gram = gram_matrix(lv.rule, lv.bandlimit, num.gram_memory_bytes, num.chunk_size)
            gram_error = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
            print(f"level {lv.j} {lv.rule.describe()}: gram max error {gram_error:.3e}")
            if gram_error > num.exactness_tol:
                raise ValidationError(f"Gram matrix at level {lv.j}", gram_error, lv.rule.describe())
    return EXIT_OK


def cmd_emit_filter_curves(cfg: RunConfig, args: argparse.Namespace) -> int:
    if args.step <= 0 or args.max_xi <= 0:
        raise ConfigError("--step and --max-xi must be positive")
    grid = np.linspace(0.0, args.max_xi, int(round(args.max_xi / args.step)) + 1)
    header, data = filter_curves(bank_by_name(cfg.bank), grid)
    out = _prepare_out(cfg)
    write_table(out / f"filter_curves_{cfg.bank}.csv", header, data)
    print(f"Wrote {len(grid)} rows to {out}")
    return EXIT_OK


def cmd_emit_framelet(cfg: RunConfig, args: argparse.Namespace) -> int:
    bank = bank_by_name(cfg.bank)
    j = args.j
    if args.kind == "lowpass":
        profile = bank.phi
    elif not (args.kind.startswith("b") and args.kind[1:].isdigit()):
        raise ConfigError(f"--kind must be lowpass or b<n>, got {args.kind!r}")
    else:
        n = int(args.kind[1:])
        if not 1 <= n <= bank.r:
            raise ConfigError(f"--kind {args.kind}: bank {bank.name} has {bank.r} high-pass filters")
        profile = bank.psi[n - 1]
    out = _prepare_out(cfg)
    thetas = np.linspace(0.0, np.pi, args.n_theta)

    if args.node is None:
        # 连续框架小波，中心取极点
        centre = SphericalPoint(0.0, 0.0) if args.node_at == "north" else SphericalPoint(math.pi, 0.0)
        rows = theta_profile(KernelSpec(profile, j), centre, thetas)
        write_table(out / "framelet_profile.csv", ["theta", "value"], rows)
        print(f"Wrote profile of the j={j} {args.kind} framelet centred at the {args.node_at} pole")
        return EXIT_OK

    layout = build_layout(max(1, j - 1), j + 1, None)
    xs = np.column_stack([np.sin(thetas), np.zeros_like(thetas), np.cos(thetas)])
    values = np.asarray(eval_framelet(j, args.node, args.kind, xs, layout, bank)).real
    write_table(out / "framelet_profile.csv", ["theta", "value"], np.column_stack([thetas, values]))
    theta, phi, grid = latlon_grid(j, args.node, args.kind, layout, bank, args.n_lat, args.n_lon)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    write_table(
        out / "framelet_grid.csv",
        ["theta", "phi", "value"],
        np.column_stack([tt.ravel(), pp.ravel(), grid.ravel()]),
    )
    print(f"Wrote framelet profile and grid for node {args.node} to {out}")
    return EXIT_OK


def cmd_gen_signal(cfg: RunConfig, args: argparse.Namespace) -> int:
    rule = rule_from_spec(cfg.rule or f"gl:{2**cfg.j_max}")
    if args.function == "textured":
        values = textured_signal(rule, cfg.seed)
    else:
        values = sample_test_function(int(args.function[1:]), rule, normalized=not args.unscaled)
    if args.theta:
        values, sigma = add_noise(values, args.theta, cfg.seed)
        print(f"Added Gaussian noise with sigma={sigma:.6g}")
    out = _prepare_out(cfg)
    write_values(out / "values.csv", values)
    save_pointset(rule, out / "points.txt")
    print(f"Wrote {rule.size} samples of {args.function} on {rule.describe()} to {out}")
    return EXIT_OK


def cmd_multiscale(cfg: RunConfig, args: argparse.Namespace) -> int:
    layout = build_layout(cfg.j0, cfg.j_max, cfg.rule)
    top = layout[cfg.j_max]
    if args.input:
        samples = read_values(args.input)
        if samples.size != top.size:
            raise ShapeMismatchError(f"{args.input} has {samples.size} values, rule has {top.size} nodes")
    else:
        bandlimit = level_bandlimit(cfg.j_max)
        samples = textured_signal(top.rule, cfg.seed, band=(bandlimit // 2, bandlimit))
    num = cfg.numerics
    seq, _ = project(
        top.rule.sqrt_weights * samples, top.rule, top.bandlimit, num.cg_tol, num.cg_max_iter,
        level=cfg.j_max, chunk_size=num.chunk_size,
    )
    transform = FrameletTransform(layout, bank_by_name(cfg.bank), num)
    parts = transform.multiscale_parts(transform.decompose(seq))
    out = _prepare_out(cfg)
    for part in parts:
        write_values(out / f"multiscale_j{part.j}_approx.csv", to_samples(part.approximation))
        write_values(out / f"multiscale_j{part.j}_low.csv", to_samples(part.low))
        for n, detail in enumerate(part.details, start=1):
            write_values(out / f"multiscale_j{part.j}_detail{n}.csv", to_samples(detail))
    print(f"Wrote multiscale parts for levels {parts[0].j}..{parts[-1].j} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------


_COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "decompose": cmd_decompose,
    "reconstruct": cmd_reconstruct,
    "denoise": cmd_denoise,
    "approx-error": cmd_approx_error,
    "bench": cmd_bench,
    "validate": cmd_validate,
    "emit-filter-curves": cmd_emit_filter_curves,
    "emit-framelet": cmd_emit_framelet,
    "gen-signal": cmd_gen_signal,
    "multiscale": cmd_multiscale,
}


def _wendland_index(text: str) -> int:
    value = int(text)
    if not 0 <= value <= 4:
        raise argparse.ArgumentTypeError(f"Wendland index must be in 0..4, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphere-fmt", description="Tight framelets and fast framelet transforms on the sphere"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="debug logging, mirrored to stderr")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bank", choices=BANK_NAMES, help="filter bank (default from config)")
    common.add_argument("--levels", help="level range J0:J")
    common.add_argument("--rule", help="top-level rule gl:<degree> | sp:<N> | file:<path>[:equal]")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="project and decompose node values")
    p.add_argument("--input", required=True, help="CSV k,value of samples on the level-J rule")

    p = sub.add_parser("reconstruct", parents=[common], help="reconstruct from a decomposition directory")
    p.add_argument("--input", required=True, help="decomposition directory")

    p = sub.add_parser("denoise", parents=[common], help="hard-threshold denoising")
    p.add_argument("--theta", type=float, required=True, help="noise level as a fraction of max f")
    p.add_argument("--input", help="noisy samples; a noisy Wendland f4 is generated when omitted")
    p.add_argument("--reference", help="clean samples for SNR reporting")

    p = sub.add_parser("approx-error", parents=[common], help="relative projection errors for f0..f4")
    p.add_argument("--functions", type=_wendland_index, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--method", choices=("lsq", "adjoint"), default="lsq")

    p = sub.add_parser("bench", parents=[common], help="time decompose/reconstruct per level")
    p.add_argument("--repeats", type=int, default=3)

    p = sub.add_parser("validate", parents=[common], help="check UEP, refinement, partition, exactness")
    p.add_argument("--gram", action="store_true", help="also compare the dense Gram matrix with the identity")

    p = sub.add_parser("emit-filter-curves", parents=[common], help="write filter and generator curves")
    p.add_argument("--step", type=float, default=1 / 1024)
    p.add_argument("--max-xi", type=float, default=1.0)

    p = sub.add_parser("emit-framelet", parents=[common], help="write framelet profiles for plotting")
    p.add_argument("--j", type=int, default=6)
    p.add_argument("--kind", default="lowpass", help="lowpass or b<n>")
    p.add_argument("--node", type=int, help="node index; omit for the framelet centred at a pole")
    p.add_argument("--node-at", choices=("north", "south"), default="north")
    p.add_argument("--n-theta", type=int, default=181)
    p.add_argument("--n-lat", type=int, default=91)
    p.add_argument("--n-lon", type=int, default=180)

    p = sub.add_parser("gen-signal", parents=[common], help="sample a test signal on a rule")
    p.add_argument("--function", choices=("f0", "f1", "f2", "f3", "f4", "textured"), default="f4")
    p.add_argument("--theta", type=float, help="add Gaussian noise at this level")
    p.add_argument("--unscaled", action="store_true", help="use the unscaled Wendland functions (denoising signal)")

    p = sub.add_parser("multiscale", parents=[common], help="write the per-level multiscale split")
    p.add_argument("--input", help="samples on the level-J rule; textured f4 when omitted")

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """解析参数并执行命令，返回退出码（不配置日志）"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "theta", None) is not None and not math.isfinite(args.theta):
            raise ConfigError("--theta must be finite")
        cfg = _build_run_config(args, AppConfig.load())
        return _COMMANDS[args.command](cfg, args)
    except Exception as e:
        message, code = _map_command_error(e)
        if code == EXIT_INTERNAL:
            logger.exception("Command %s failed", args.command)
        else:
            logger.error("Command %s failed: %s", args.command, e)
        print(message, file=sys.stderr)
        return code


def main(argv: Sequence[str] | None = None) -> None:
    from sphere_fmt.config import CONFIG_DIR

    verbose = "--verbose" in (sys.argv[1:] if argv is None else argv)
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    handlers: list[logging.Handler] = [logging.FileHandler(CONFIG_DIR / "run.log", encoding="utf-8")]
    if verbose:
        handlers.append(logging.StreamHandler(sys.stderr))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
        handlers=handlers,
    )
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
