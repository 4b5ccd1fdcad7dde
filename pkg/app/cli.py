"""
Command-line entry point: group, numerology, spectral, laguerre, multiplier,
kernel, plancherel and oracle subcommands.

Exit codes: 0 success, 2 rejected input, 3 numerical-quality failure, 1 anything else.
"""

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from . import conf, discrete_oracle, group_core, kernel, laguerre, multiplier, numerology, plancherel_probe, spectral
from .exceptions import (
    GridResolutionError,
    GroupSpecError,
    MalformedExpressionError,
    NumericalQualityError,
    ValidationError,
)
from .logger import get_logger, set_level
from .models import GroupSpecDocument, QuadratureSpec, RunManifest

logger = get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _version() -> str:
    try:
        return metadata.version("metivier-lab")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _split_fields(body: str, offset: int):
    """(text, position) for each comma-separated field of body."""
    position = offset
    for text in body.split(","):
        yield text, position
        position += len(text) + 1


def _number(text: str, expr: str, position: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedExpressionError(f"expected a number, got {text!r}", expr, position) from None


def load_multiplier(expr: str) -> multiplier.SampledMultiplier:
    """
    Parse a multiplier expression:
    br:delta=<d>,t=<t>  |  bump:<a>,<b>  |  file:<path to lambda,value csv>
    """
    kind, sep, body = expr.partition(":")
    if not sep:
        raise MalformedExpressionError("missing ':' after the multiplier kind", expr, len(expr))
    offset = len(kind) + 1
    if kind == "br":
        params = {}
        for text, position in _split_fields(body, offset):
            key, eq, value = text.partition("=")
            if not eq or key not in ("delta", "t"):
                raise MalformedExpressionError("expected delta=<number> or t=<number>", expr, position)
            if key in params:
                raise MalformedExpressionError(f"repeated parameter {key}", expr, position)
            params[key] = _number(value, expr, position + len(key) + 1)
        if "delta" not in params:
            raise MalformedExpressionError("Bochner-Riesz needs delta", expr, offset)
        return multiplier.bochner_riesz(params["delta"], params.get("t", 1.0))
    if kind == "bump":
        fields = list(_split_fields(body, offset))
        if len(fields) != 2:
            raise MalformedExpressionError("bump needs exactly two endpoints a,b", expr, offset)
        a, b = (_number(text, expr, position) for text, position in fields)
        return multiplier.smooth_bump(a, b)
    if kind == "file":
        return _multiplier_from_csv(Path(body), expr, offset)
    raise MalformedExpressionError(f"unknown multiplier kind {kind!r}", expr, 0)


def _multiplier_from_csv(path: Path, expr: str, offset: int) -> multiplier.SampledMultiplier:
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedExpressionError(f"cannot read {path}: {exc.strerror}", expr, offset) from exc
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if rows and not _is_numeric(rows[0][0]):
        rows = rows[1:]
    try:
        data = np.array([[float(row[0]), float(row[1])] for row in rows])
    except (ValueError, IndexError) as exc:
        raise MalformedExpressionError("file rows must be lambda,value pairs", expr, offset) from exc
    if len(data) < 4:
        raise MalformedExpressionError("file needs at least four samples", expr, offset)
    grid, values = data[:, 0], data[:, 1]
    if np.any(np.abs(np.diff(grid, 2)) > 1e-9 * max(1.0, np.max(np.abs(grid)))):
        raise MalformedExpressionError("file grid must be uniform", expr, offset)
    nonzero = grid[values != 0]
    support = (float(nonzero.min()), float(nonzero.max())) if len(nonzero) else (float(grid[0]), float(grid[0]))
    return multiplier.SampledMultiplier(grid, values, support, "none", expr)


def _is_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_group(source: str) -> group_core.GroupSpec:
    """A JSON document path, heisenberg:<n>, or metivier43:<nine entries of A, row major>."""
    kind, sep, body = source.partition(":")
    if sep and kind == "heisenberg":
        return group_core.heisenberg(int(_number(body, source, len(kind) + 1)))
    if sep and kind == "metivier43":
        return group_core.metivier_4_3(_matrix_a(body, source, len(kind) + 1))
    path = Path(source)
    try:
        document = GroupSpecDocument.model_validate_json(path.read_text())
    except OSError as exc:
        raise GroupSpecError(f"cannot read group document {path}: {exc.strerror}") from exc
    except PydanticValidationError as exc:
        raise GroupSpecError(f"invalid group document {path}: {exc}") from exc
    return group_core.from_document(document)


def _matrix_a(body: str, expr: str, offset: int) -> np.ndarray:
    fields = list(_split_fields(body, offset))
    if len(fields) != 9:
        raise MalformedExpressionError("A needs nine comma-separated entries", expr, offset)
    return np.array([_number(text, expr, position) for text, position in fields]).reshape(3, 3)


def _load_a(source: str) -> np.ndarray:
    path = Path(source)
    if path.suffix == ".json":
        try:
            return np.asarray(json.loads(path.read_text()), dtype=float).reshape(3, 3)
        except (OSError, ValueError) as exc:
            raise GroupSpecError(f"cannot read A from {path}: {exc}") from exc
    return _matrix_a(source, source, 0)


def _vector(text: str) -> np.ndarray:
    return np.array([_number(t, text, p) for t, p in _split_fields(text, 0)])


def _ell_values(text: str) -> list[int]:
    """'0..4' (inclusive) or '0,1,3'."""
    lo, dots, hi = text.partition("..")
    if dots:
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def _ell(text: str) -> int | None:
    return None if text.lower() == "none" else int(text)


def _quad(name: str) -> QuadratureSpec:
    return QuadratureSpec.fine() if name == "fine" else QuadratureSpec.default()


def _jsonable(value):
    if isinstance(value, BaseModel):
        return value.model_dump()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _render(payload, fmt: str, manifest_id: str) -> str:
    data = _jsonable(payload)
    if fmt == "json":
        return json.dumps({"manifest_id": manifest_id, "result": data}, indent=2)
    rows = data if isinstance(data, list) else [data]
    rows = [row if isinstance(row, dict) else {"value": row} for row in rows]
    columns = list(dict.fromkeys(key for row in rows for key in row)) + ["manifest_id"]
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**{k: _cell(v) for k, v in row.items()}, "manifest_id": manifest_id})
        return buffer.getvalue()
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(_cell(row.get(c, manifest_id if c == "manifest_id" else "")) for c in columns) + " |")
    return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if isinstance(value, (dict, list)):
        return json.dumps(value)
    return str(value)


@contextmanager
def _pool(threads: int):
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as executor:
        yield executor.map


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=conf.THREADS, help="worker threads for mu-side quadrature")
    common.add_argument("--seed", type=int, default=conf.SEED, help="scramble seed for low-discrepancy samplers")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv", "md"), default=None)
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--quiet", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="metivier-lab", description="Spectral multipliers on Metivier groups.")
    parser.add_argument("--version", action="version", version=_version())
    sections = parser.add_subparsers(dest="section", required=True)

    def leaf(group, name, func, fmt="json", **kwargs):
        sub = group.add_parser(name, parents=[common], **kwargs)
        sub.set_defaults(func=func, default_format=fmt)
        return sub

    grp = sections.add_parser("group").add_subparsers(dest="command", required=True)
    sub = leaf(grp, "classify", _cmd_group_classify)
    sub.add_argument("--group", required=True)
    sub.add_argument("--samples", type=int, default=256)
    sub = leaf(grp, "show", _cmd_group_show)
    sub.add_argument("--group", required=True)

    num = sections.add_parser("numerology").add_subparsers(dest="command", required=True)
    sub = leaf(num, "table", _cmd_numerology_table, "md")
    sub.add_argument("--d1-max", type=int, default=16)
    sub = leaf(num, "thresholds", _cmd_numerology_thresholds)
    sub.add_argument("--d1", type=int, required=True)
    sub.add_argument("--d2", type=int, required=True)
    sub = leaf(num, "exceptional", _cmd_numerology_exceptional)
    sub.add_argument("--d1-max", type=int, default=64)
    sub = leaf(num, "theta", _cmd_numerology_theta, "md")
    sub.add_argument("--d1", type=int, required=True)
    sub.add_argument("--d2", type=int, required=True)

    spec = sections.add_parser("spectral").add_subparsers(dest="command", required=True)
    sub = leaf(spec, "decompose", _cmd_spectral_decompose)
    sub.add_argument("--group", required=True)
    sub.add_argument("--mu", required=True)
    sub = leaf(spec, "probe-bounds", _cmd_spectral_probe, "csv")
    sub.add_argument("--A", dest="a_matrix", required=True, help="a.json or nine comma-separated entries")
    sub.add_argument("--alpha", type=int, choices=(1, 2), default=2)
    sub.add_argument("--v", default=None)
    sub.add_argument("--samples", type=int, default=256)
    sub.add_argument("--h", type=float, default=1e-4)

    lag = sections.add_parser("laguerre").add_subparsers(dest="command", required=True)
    sub = leaf(lag, "table", _cmd_laguerre_table, "csv")
    sub.add_argument("--kmax", type=int, default=4)
    sub.add_argument("--m", type=int, default=1)
    sub.add_argument("--lam", type=float, default=1.0)
    sub.add_argument("--rho-max", type=float, default=6.0)
    sub.add_argument("--points", type=int, default=61)

    mult = sections.add_parser("multiplier").add_subparsers(dest="command", required=True)
    sub = leaf(mult, "norms", _cmd_multiplier_norms)
    sub.add_argument("--spec", dest="mult", required=True)
    sub.add_argument("--s", type=float, default=0.6)
    sub.add_argument("--M", type=float, default=8.0)
    sub.add_argument("--t-grid", default="-4..4", help="dyadic exponents j for t = 2^j")

    ker = sections.add_parser("kernel").add_subparsers(dest="command", required=True)
    sub = leaf(ker, "eval", _cmd_kernel_eval)
    sub.add_argument("--group", required=True)
    sub.add_argument("--mult", required=True)
    sub.add_argument("--ell", default="none")
    sub.add_argument("--point", required=True)
    sub.add_argument("--quad", choices=("default", "fine"), default="default")
    sub = leaf(ker, "mass", _cmd_kernel_mass, "csv")
    sub.add_argument("--group", required=True)
    sub.add_argument("--mult", required=True)
    sub.add_argument("--alpha", type=int, default=0)
    sub.add_argument("--ell", default="0..4")
    sub.add_argument("--quad", choices=("default", "fine"), default="default")

    pl = sections.add_parser("plancherel").add_subparsers(dest="command", required=True)
    sub = leaf(pl, "scan", _cmd_plancherel_scan, "csv")
    sub.add_argument("--group", required=True)
    sub.add_argument("--mult", required=True)
    sub.add_argument("--alpha", default="0")
    sub.add_argument("--ell", default="0..4")
    sub.add_argument("--quad", choices=("default", "fine"), default="default")
    sub = leaf(pl, "second-layer", _cmd_plancherel_second, "csv")
    sub.add_argument("--A", dest="a_matrix", required=True)
    sub.add_argument("--mult", required=True)
    sub.add_argument("--alpha", type=int, choices=(0, 1), default=1)
    sub.add_argument("--ell", default="0..3")
    sub.add_argument("--fd-step", type=float, default=1e-4)
    sub.add_argument("--quad", choices=("default", "fine"), default="default")
    sub = leaf(pl, "restriction", _cmd_plancherel_restriction, "csv")
    sub.add_argument("--group", default="heisenberg:1")
    sub.add_argument("--mult", required=True)
    sub.add_argument("--p", default="1")
    sub.add_argument("--ell", default="0..3")
    sub.add_argument("--widths", default="1")

    orc = sections.add_parser("oracle").add_subparsers(dest="command", required=True)
    sub = leaf(orc, "compare", _cmd_oracle_compare, "csv")
    sub.add_argument("--levels", default="24,32,40")
    sub.add_argument("--box", type=float, default=12.0)
    sub.add_argument("--mult", default="bump:0.5,2")
    sub.add_argument("--degree", type=int, default=1024)
    return parser


def _cmd_group_classify(args, pmap):
    g = load_group(args.group)
    verdict = group_core.is_metivier(g, n_samples=args.samples, seed=args.seed)
    payload = {
        "d1": g.d1,
        "d2": g.d2,
        "Q": g.Q,
        "metivier": verdict,
        "heisenberg_type": group_core.is_heisenberg_type(g),
        "admissible": numerology.admissible(g.d1, g.d2),
    }
    return payload, {"group_sha256": group_core.spec_sha256(g)}


def _cmd_group_show(args, pmap):
    g = load_group(args.group)
    payload = {
        "document": group_core.to_document(g),
        "sha256": group_core.spec_sha256(g),
        "Q": g.Q,
        "unit_ball_volume": group_core.ball_volume(g, seed=args.seed),
    }
    return payload, {"group_sha256": payload["sha256"]}


def _cmd_numerology_table(args, pmap):
    return numerology.numerology_table(args.d1_max), {}


def _cmd_numerology_thresholds(args, pmap):
    return numerology.numerology_row(args.d1, args.d2), {}


def _cmd_numerology_exceptional(args, pmap):
    return [{"d1": d1, "d2": d2} for d1, d2 in numerology.exceptional_pairs(args.d1_max)], {}


def _cmd_numerology_theta(args, pmap):
    return numerology.theta_table(args.d1, args.d2), {}


def _cmd_spectral_decompose(args, pmap):
    g = load_group(args.group)
    dec = spectral.decompose_j(g, _vector(args.mu))
    payload = {"N": dec.N, "b": dec.b, "r": list(dec.r), "r0": dec.r0, "gap": dec.gap, "P": list(dec.P)}
    return payload, {"group_sha256": group_core.spec_sha256(g)}


def _cmd_spectral_probe(args, pmap):
    A = _load_a(args.a_matrix)
    v = None if args.v is None else _vector(args.v)
    probes = spectral.mu_derivative_bounds_probe(
        A, v, sphere_samples=args.samples, h=args.h, alpha_set=(args.alpha,), seed=args.seed
    )
    probe = probes[args.alpha]
    logger.info("kappa_b=%.4g kappa_P=%.4g skipped=%d", probe.kappa_b, probe.kappa_P, probe.skipped)
    return probe.rows, {}


def _cmd_laguerre_table(args, pmap):
    radii = np.linspace(0.0, args.rho_max, args.points)
    return laguerre.profile_table(args.kmax, args.m, args.lam, radii), {}


def _cmd_multiplier_norms(args, pmap):
    F = load_multiplier(args.mult)
    t_grid = [2.0**j for j in _ell_values(args.t_grid)]
    resolved = True
    try:
        sobolev = multiplier.sobolev_norm(F, args.s)
        sloc = multiplier.sloc_norm(F, args.s, t_grid)
    except GridResolutionError as exc:
        logger.warning("Sobolev norms are not resolved on this grid: %s", exc)
        resolved = False
        sobolev = multiplier.sobolev_norm(F, args.s, tail_tol=None)
        sloc = multiplier.sloc_norm(F, args.s, t_grid, tail_tol=None)
    payload = {
        "l2": multiplier.l2_norm(F),
        "sobolev": sobolev,
        "sloc_lower_bound": sloc,
        "cowling_sikora_lower_bound": multiplier.cowling_sikora_norm(F, args.M),
        "sandwich_constant": multiplier.sandwich_constant(F, args.M, args.s) if resolved else None,
        "s": args.s,
        "M": args.M,
        "sobolev_resolved": resolved,
    }
    return payload, {"multiplier": args.mult}


def _cmd_kernel_eval(args, pmap):
    g = load_group(args.group)
    F = load_multiplier(args.mult)
    coords = _vector(args.point)
    if len(coords) != g.d1 + g.d2:
        raise ValidationError(f"point needs {g.d1 + g.d2} coordinates, got {len(coords)}")
    point = group_core.Point.of(coords[: g.d1], coords[g.d1 :])
    quad = _quad(args.quad)
    result = kernel.eval_kernel(g, F, _ell(args.ell), point, quad, pmap)
    return result, {"group_sha256": group_core.spec_sha256(g), "multiplier": args.mult, "quadrature": quad}


def _cmd_kernel_mass(args, pmap):
    g = load_group(args.group)
    F = load_multiplier(args.mult)
    quad = _quad(args.quad)
    rows = []
    for ell in _ell_values(args.ell):
        mass, est = kernel.first_layer_mass(g, F, ell, args.alpha, quad, pmap)
        rows.append({"ell": ell, "alpha": args.alpha, "mass": mass, "error_est": est})
    return rows, {"group_sha256": group_core.spec_sha256(g), "multiplier": args.mult, "quadrature": quad}


def _scan_rows(reports):
    return [row for report in reports for row in report.rows]


def _cmd_plancherel_scan(args, pmap):
    g = load_group(args.group)
    F = load_multiplier(args.mult)
    quad = _quad(args.quad)
    alphas = [int(a) for a in args.alpha.split(",")]
    reports = plancherel_probe.first_layer_scan(g, F, alphas, _ell_values(args.ell), quad, pmap)
    for alpha, report in reports.items():
        logger.info(
            "alpha=%d slope %.4f (target %g) residual %.3g two_sided=%s",
            alpha, report.fitted_slope, report.slope_target, report.residual, report.two_sided,
        )
    payload = list(reports.values()) if args.format == "json" else _scan_rows(reports.values())
    return payload, {"group_sha256": group_core.spec_sha256(g), "multiplier": args.mult, "quadrature": quad}


def _cmd_plancherel_second(args, pmap):
    A = _load_a(args.a_matrix)
    F = load_multiplier(args.mult)
    quad = _quad(args.quad)
    report = plancherel_probe.second_layer_scan_43(
        A, F, args.alpha, _ell_values(args.ell), quad, args.fd_step, pmap=pmap
    )
    logger.info("slope %.4f (target %g) residual %.3g", report.fitted_slope, report.slope_target, report.residual)
    payload = report if args.format == "json" else report.rows
    g = group_core.metivier_4_3(A)
    return payload, {"group_sha256": group_core.spec_sha256(g), "multiplier": args.mult, "quadrature": quad}


def _cmd_plancherel_restriction(args, pmap):
    g = load_group(args.group)
    F = load_multiplier(args.mult)
    widths = [float(w) for w in args.widths.split(",")]
    rows = plancherel_probe.restriction_scaling_probe(
        g, F, Fraction(args.p), _ell_values(args.ell), widths, pmap=pmap
    )
    return rows, {"group_sha256": group_core.spec_sha256(g), "multiplier": args.mult}


def _cmd_oracle_compare(args, pmap):
    F = load_multiplier(args.mult)
    levels = [(int(n), args.box) for n in args.levels.split(",")]
    report = discrete_oracle.kernel_oracle_compare(F, levels, args.degree, pmap=pmap)
    if not report.monotone:
        logger.warning("Oracle convergence is not monotone")
    payload = report if args.format == "json" else report.levels
    return payload, {"multiplier": args.mult, "quadrature": discrete_oracle.ORACLE_QUAD}


def manifest_id(manifest: RunManifest) -> str:
    """sha256 of the manifest content without its id and wall-clock fields."""
    content = manifest.model_dump_json(exclude={"id", "wall_time_s"})
    return hashlib.sha256(content.encode()).hexdigest()


def _write_manifest(manifest: RunManifest, out: str | None):
    if out:
        target = Path(f"{out}.manifest.json")
    elif conf.OUT_DIR:
        target = Path(conf.OUT_DIR) / f"{manifest.id}.manifest.json"
    else:
        logger.info("Run manifest %s", manifest.model_dump_json())
        return
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(manifest.model_dump_json(indent=2))


def _handle_command_exception(action: str, exc: Exception) -> int:
    """
    Convert failures into exit codes while logging appropriately.
    """
    if isinstance(exc, (ValidationError, ValueError)):
        logger.warning("%s failed with invalid input: %s", action, exc)
        return EXIT_INVALID

    if isinstance(exc, NumericalQualityError):
        logger.error("%s failed a numerical-quality check: %s", action, exc)
        return EXIT_NUMERICAL

    logger.exception("Unexpected error while attempting to %s", action, exc_info=exc)
    return EXIT_FAILURE


def dispatch(argv: Sequence[str]) -> int:
    parser = build_parser()
    argv = list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID

    if args.verbose:
        set_level(10)
    elif args.quiet:
        set_level(30)
    fmt = args.format or args.default_format
    args.format = fmt
    action = f"run {args.section} {args.command}"
    started = time.perf_counter()
    try:
        with _pool(args.threads) as pmap:
            payload, context = args.func(args, pmap)
    except Exception as exc:  # noqa: BLE001 - centralised error translation handles specifics
        return _handle_command_exception(action, exc)

    manifest = RunManifest(
        id="",
        command_line=["metivier-lab", *argv],
        group_sha256=context.get("group_sha256"),
        multiplier=context.get("multiplier"),
        quadrature=context.get("quadrature"),
        bump=multiplier.BUMP_ID,
        version=_version(),
        wall_time_s=time.perf_counter() - started,
    )
    manifest = manifest.model_copy(update={"id": manifest_id(manifest)})
    text = _render(payload, fmt, manifest.id)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    _write_manifest(manifest, args.out)
    return EXIT_OK


def main():
    sys.exit(dispatch(sys.argv[1:]))
