"""Command-line front end.

Exit codes: 0 pass, 1 usage or runtime error, 2 inconclusive, 3 fail.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bundle_geometry as bg
from . import potential as pot
from .frames import FrameParseError, load_frame
from .similarity import ReportConfig, assemble_report, model_operator
from .space_core import SpaceParams, backward_shift, forward_shift, is_k_hypercontraction
from .verify import run_lemma_suite

EXIT_PASS, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_FAIL = 0, 1, 2, 3
VERDICT_EXIT = {"pass": EXIT_PASS, "inconclusive": EXIT_INCONCLUSIVE, "fail": EXIT_FAIL}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    frame: str | None = None
    n: int | None = None
    degrees: tuple = (50, 100, 200)
    degree_given: bool = False
    grid: tuple = (256, 256, pot.DEFAULT_R)
    rings: tuple = tuple(1.0 - 2.0 ** -k for k in range(1, 7))
    levels: tuple = tuple(range(0, 9))
    tol: float = 1e-10
    seed: int = 0
    out: str | None = None
    density: str = "defect"
    operator: str = "backward-shift"
    k: int | None = None
    # fault injection for self-tests of verify-lemmas; not exposed as a flag
    order_offset: int = 0
    extra: dict = field(default_factory=dict)


# --- argument parsing -------------------------------------------------------


def parse_grid(text: str) -> tuple:
    try:
        dims, _, radius = text.partition("@")
        nr, nt = dims.lower().split("x")
        nr, nt = int(nr), int(nt)
        R = float(radius) if radius else pot.DEFAULT_R
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}; expected NRxNT@R") from exc
    if nr < 1 or nt < 1 or not 0 < R < 1:
        raise UsageError(f"--grid out of range: {text!r}")
    return nr, nt, R


def parse_levels(text: str) -> tuple:
    try:
        a, _, b = text.partition("..")
        a, b = int(a), int(b) if b else int(a)
    except ValueError as exc:
        raise UsageError(f"bad --levels {text!r}; expected A..B") from exc
    if b < a or a < -2:
        raise UsageError(f"--levels out of range: {text!r}")
    return tuple(range(a, b + 1))


def parse_float_list(text: str, name: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"bad {name} {text!r}") from exc


def parse_int_list(text: str, name: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"bad {name} {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bergsim", description="Numerical similarity diagnostics for Bergman-space shifts.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, frame_required=False):
        p.add_argument("--frame", required=frame_required, help="frame JSON file")
        p.add_argument("--n", type=int, help="Bergman order (default: from the frame file, else 1)")
        p.add_argument("--degree", help="truncation degree or comma list, e.g. 50,100,200")
        p.add_argument("--grid", help="polar grid NRxNT@R")
        p.add_argument("--rings", help="comma list of ring radii")
        p.add_argument("--levels", help="dyadic levels A..B")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")

    common(sub.add_parser("verify-lemmas", help="run the identity suite"))
    common(sub.add_parser("curvature", help="curvature defect field as CSV"), frame_required=True)
    for name in ("green", "carleson"):
        p = sub.add_parser(name, help=f"{name} diagnostics")
        common(p)
        p.add_argument("--density", default=None, choices=["defect", "shift", "one", "zero"])
    common(sub.add_parser("similarity", help="full similarity report"), frame_required=True)
    p = sub.add_parser("hypercontraction", help="binomial defect test")
    common(p)
    p.add_argument("--operator", default="backward-shift", choices=["backward-shift", "forward-shift", "model"])
    p.add_argument("--k", type=int, help="highest defect level (default n)")
    return parser


def config_from_args(argv=None) -> RunConfig:
    a = build_parser().parse_args(argv)
    cfg = RunConfig(command=a.command, frame=a.frame, n=a.n, tol=a.tol, seed=a.seed, out=a.out)
    if a.degree:
        cfg.degrees = parse_int_list(a.degree, "--degree")
        cfg.degree_given = True
        if not cfg.degrees or min(cfg.degrees) < 0:
            raise UsageError("--degree needs nonnegative integers")
    if a.grid:
        cfg.grid = parse_grid(a.grid)
    if a.rings:
        cfg.rings = parse_float_list(a.rings, "--rings")
    if a.levels:
        cfg.levels = parse_levels(a.levels)
    if cfg.n is not None and cfg.n < 1:
        raise UsageError("--n must be >= 1")
    if hasattr(a, "density"):
        cfg.density = a.density or ("defect" if a.frame else "one")
        if cfg.density == "defect" and not a.frame:
            raise UsageError("--density defect needs --frame")
    if hasattr(a, "operator"):
        cfg.operator = a.operator
        cfg.k = a.k
        if cfg.operator == "model" and not a.frame:
            raise UsageError("--operator model needs --frame")
    return cfg


# --- output -----------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit(cfg: RunConfig, files: dict, stdout_key: str | None = None):
    """Write all outputs once at the end; without --out print the main document."""
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    elif stdout_key:
        sys.stdout.write(files[stdout_key])


def _order(cfg: RunConfig, frame=None) -> int:
    if cfg.n is not None:
        return cfg.n
    return frame.n if frame is not None else 1


def _grid(cfg: RunConfig):
    nr, nt, R = cfg.grid
    return pot.make_grid(nr, nt, R)


def _density(cfg: RunConfig, frame, n):
    if cfg.density == "one":
        return lambda z: np.ones(np.shape(z))
    if cfg.density == "zero":
        return lambda z: np.zeros(np.shape(z))
    if cfg.density == "shift":
        m = frame.m if frame is not None else 1
        return lambda z: bg.shift_curvature(n, m, z)
    return lambda z: np.nan_to_num(bg.curvature_values(frame, z))


# --- commands ---------------------------------------------------------------


def cmd_verify_lemmas(cfg: RunConfig) -> int:
    report = run_lemma_suite(cfg.seed, order_offset=cfg.order_offset)
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']}: max residual {c['max_residual']:.3e} (tol {c['tolerance']:.0e})")
    emit(cfg, {"lemmas.json": _dumps(report)})
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def cmd_curvature(cfg: RunConfig) -> int:
    frame = load_frame(cfg.frame)
    grid = _grid(cfg)
    fieldv = bg.curvature_field(frame, grid.z, _order(cfg, frame))
    csv = pot.field_csv(grid.z, fieldv.defect, extra=("rank_deficient", fieldv.rank_deficient))
    emit(cfg, {"curvature.csv": csv}, "curvature.csv")
    return EXIT_PASS


def cmd_green(cfg: RunConfig) -> int:
    frame = load_frame(cfg.frame) if cfg.frame else None
    n = _order(cfg, frame)
    dens = _density(cfg, frame, n)
    grid = _grid(cfg)
    G = pot.GreenEvaluator(dens, grid)
    center = G(0.0)
    fieldv = pot.bounded_solution_estimate(dens, cfg.rings, grid)
    z = np.concatenate(([0.0], fieldv.lams))
    vals = np.concatenate(([center], fieldv.values))
    report = {"density": cfg.density, "n": n, "center_value": center, **fieldv.to_dict()}
    print(f"G(0) = {center:.12f}; trend {fieldv.verdict}", file=sys.stderr)
    emit(cfg, {"green.csv": pot.field_csv(z, vals), "green.json": _dumps(report)}, "green.json")
    return {"bounded-looking": EXIT_PASS, "growing": EXIT_FAIL}.get(fieldv.verdict, EXIT_INCONCLUSIVE)


def cmd_carleson(cfg: RunConfig) -> int:
    frame = load_frame(cfg.frame) if cfg.frame else None
    n = _order(cfg, frame)
    dens = _density(cfg, frame, n)
    grid = _grid(cfg)
    res = pot.carleson_constant(lambda z: dens(z) * (1 - np.abs(z)), grid, cfg.levels)
    stable_levels = [k for k in cfg.levels if k >= 3] or list(cfg.levels)
    stable = res.stable_within(2.0, stable_levels)
    report = {
        "density": cfg.density,
        "weight": "(1-|z|)",
        **res.to_dict(),
        "stable": {"value": stable, "factor": 2.0, "levels": stable_levels},
    }
    lines = ["level,arc_length,max_ratio,running_max"] + [
        f"{r['level']},{r['arc_length']:.16e},{r['max_ratio']:.16e},{r['running_max']:.16e}" for r in res.table
    ]
    print(f"Carleson constant {res.constant:.6g}; stable {stable}", file=sys.stderr)
    emit(cfg, {"carleson.csv": "\n".join(lines) + "\n", "carleson.json": _dumps(report)}, "carleson.json")
    return EXIT_PASS if stable else EXIT_INCONCLUSIVE


def cmd_similarity(cfg: RunConfig) -> int:
    frame = load_frame(cfg.frame)
    n = _order(cfg, frame)
    nr, nt, R = cfg.grid
    rc = ReportConfig(
        degrees=tuple(cfg.degrees),
        grid_nr=nr,
        grid_ntheta=nt,
        grid_R=R,
        rings=tuple(cfg.rings),
        levels=tuple(cfg.levels),
        stable_levels=tuple(k for k in cfg.levels if k >= 3) or tuple(cfg.levels),
        tol=cfg.tol,
    )
    report = assemble_report(frame, SpaceParams(n, max(cfg.degrees), frame.m), rc)
    doc = report.to_dict()
    grid = _grid(cfg)
    fieldv = bg.curvature_field(frame, grid.z, n)
    files = {
        "report.json": _dumps(doc),
        "defect.csv": pot.field_csv(grid.z, fieldv.defect, extra=("rank_deficient", fieldv.rank_deficient)),
    }
    for key, flag in doc["verdict"]["statements"].items():
        print(f"statement ({key}): {flag['flag']}  [{flag['evidence']}]", file=sys.stderr)
    print(f"overall: {report.verdict}", file=sys.stderr)
    emit(cfg, files, "report.json")
    return VERDICT_EXIT[report.verdict]


def cmd_hypercontraction(cfg: RunConfig) -> int:
    frame = load_frame(cfg.frame) if cfg.frame else None
    n = _order(cfg, frame)
    N = max(cfg.degrees) if cfg.degree_given else 120
    k = cfg.k or n
    if cfg.operator == "model":
        T = model_operator(frame, SpaceParams(n, N, frame.m)).matrix
    elif cfg.operator == "forward-shift":
        T = forward_shift(SpaceParams(n, N))
    else:
        T = backward_shift(SpaceParams(n, N))
    res = is_k_hypercontraction(T, k, cfg.tol)
    report = {"operator": cfg.operator, "n": n, "N": N, **res.to_dict()}
    for row in report["levels"]:
        print(f"level {row['k']}: min eigenvalue {row['min_eigenvalue']:.6e} {'PASS' if row['pass'] else 'FAIL'}", file=sys.stderr)
    emit(cfg, {"hypercontraction.json": _dumps(report)}, "hypercontraction.json")
    return EXIT_PASS if res.passed else EXIT_FAIL


COMMANDS = {
    "verify-lemmas": cmd_verify_lemmas,
    "curvature": cmd_curvature,
    "green": cmd_green,
    "carleson": cmd_carleson,
    "similarity": cmd_similarity,
    "hypercontraction": cmd_hypercontraction,
}


def run(cfg: RunConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except (FrameParseError, OSError, ValueError) as exc:
        print(f"bergsim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except UsageError as exc:
        print(f"bergsim: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

