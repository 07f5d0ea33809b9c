"""Model operators built from frames, canonical intertwiners and the diagnostic report.

Given a frame F: D -> L(C^m, E), the subspace N = clos ran T_{Q_F} of M_{n,E}
is invariant under the backward shift and T = S*_{n,E}|N has eigenvectors
k_{conj lam} (x) F(lam) e. The co-analytic Toeplitz operator A = T_{Q_F}
intertwines S*_{n,C^m} with T; its condition number is what similarity is
about. All condition numbers are relative to the supplied frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import bundle_geometry as bg
from . import potential as pot
from .frames import Frame, frame_bounds
from .space_core import (
    SpaceParams,
    backward_shift,
    hypercontraction_defect,
    interior_rows,
    is_k_hypercontraction,
    kernel_vector,
    min_eigenvalue,
    symbol_degree,
    toeplitz_coanalytic,
)

RANK_RTOL = 1e-10
COND_MAX = 1e12
STABLE_RTOL = 0.01
LEFT_INVERSE_TOL = 1e-8


class FrameUnsuitableError(ValueError):
    """The intertwiner's columns collapse at this truncation."""


class LeftInverseError(ValueError):
    """The supplied left inverse G does not satisfy G F = I."""


def canonical_intertwiner(F: Frame, p: SpaceParams) -> np.ndarray:
    """A = T_{Q_F}: M_{n,C^m} -> M_{n,E}, truncated at degree p.N."""
    return toeplitz_coanalytic(F.taylor(p.N), p.with_fiber(F.m))


def eigenvector_residual(F: Frame, p: SpaceParams, lam, e=None) -> float:
    """max |A(k (x) e) - k (x) F(lam) e| over degrees <= N - deg F (exact for polynomials)."""
    e = np.ones(F.m) / math.sqrt(F.m) if e is None else np.asarray(e, dtype=complex)
    A = canonical_intertwiner(F, p)
    k = kernel_vector(p.with_fiber(1), lam)
    lhs = A @ np.kron(k, e)
    rhs = np.kron(k, F(lam) @ e)
    rows = interior_rows(p, symbol_degree(F.taylor(p.N)), F.e_dim)
    return float(np.max(np.abs(lhs - rhs)[rows], initial=0.0))


@dataclass
class ModelOperator:
    params: SpaceParams
    frame: Frame
    basis: np.ndarray
    matrix: np.ndarray
    invariance_residual: float

    def embed(self, y):
        return self.basis @ y

    def coords(self, v):
        return self.basis.conj().T @ v


def model_operator(F: Frame, p: SpaceParams) -> ModelOperator:
    """T = Q* S*_{n,E} Q with Q an orthonormal basis of ran A (pivoted QR)."""
    A = canonical_intertwiner(F, p)
    Q, Rm, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(Rm))
    if d.size == 0 or d[0] == 0:
        raise FrameUnsuitableError("intertwiner is zero")
    rank = int(np.sum(d > RANK_RTOL * d[0]))
    if rank < A.shape[1] or d[0] / d[-1] > COND_MAX:
        raise FrameUnsuitableError(
            f"intertwiner columns collapse (rank {rank}/{A.shape[1]}, diag ratio {d[0] / max(d[-1], 1e-300):.3g})"
        )
    S = backward_shift(p.with_fiber(F.e_dim))
    SQ = S @ Q
    T = Q.conj().T @ SQ
    resid = float(np.linalg.norm(SQ - Q @ T, 2))
    return ModelOperator(p.with_fiber(F.e_dim), F, Q, T, resid)


@dataclass
class IntertwinerReport:
    degrees: list
    sigma_max: list
    sigma_min: list
    condition: list
    left_inverse_norm: list = field(default_factory=list)
    left_inverse_residual: list = field(default_factory=list)

    @property
    def stabilized(self) -> bool:
        if len(self.condition) < 2:
            return False
        a, b = self.condition[-2:]
        return math.isfinite(a) and math.isfinite(b) and abs(b - a) <= STABLE_RTOL * a

    def to_dict(self) -> dict:
        rows = []
        for k, N in enumerate(self.degrees):
            row = {
                "N": N,
                "sigma_max": self.sigma_max[k],
                "sigma_min": self.sigma_min[k],
                "condition": self.condition[k],
            }
            if self.left_inverse_norm:
                row["left_inverse_norm"] = self.left_inverse_norm[k]
                row["left_inverse_residual"] = self.left_inverse_residual[k]
            rows.append(row)
        return {
            "relative_to": "supplied frame",
            "table": rows,
            "stabilized": {"value": self.stabilized, "tolerance": STABLE_RTOL},
        }


def check_left_inverse(F: Frame, G: Frame, n_points: int = 64, seed: int = 0) -> float:
    """max ||G(z) F(z) - I|| over random interior points."""
    if G.e_dim != F.m or G.m != F.e_dim:
        raise LeftInverseError(f"left inverse must be {F.m} x {F.e_dim}, got {G.e_dim} x {G.m}")
    rng = np.random.default_rng(seed)
    z = 0.95 * np.sqrt(rng.random(n_points)) * np.exp(2j * np.pi * rng.random(n_points))
    resid = np.linalg.norm(G(z) @ F(z) - np.eye(F.m), ord=2, axis=(-2, -1))
    return float(resid.max())


def intertwiner_sweep(F: Frame, p: SpaceParams, degrees: Sequence[int], left_inverse: Frame | None = None) -> IntertwinerReport:
    degrees = [int(N) for N in degrees]
    if any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValueError("degrees must be increasing")
    G = left_inverse if left_inverse is not None else F.left_inverse
    if G is not None:
        r = check_left_inverse(F, G)
        if r > LEFT_INVERSE_TOL:
            raise LeftInverseError(f"G F differs from the identity by {r:.3g}")
    rep = IntertwinerReport(degrees, [], [], [])
    for N in degrees:
        q = SpaceParams(p.n, N, F.m)
        A = canonical_intertwiner(F, q)
        try:
            s = np.linalg.svd(A, compute_uv=False)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"SVD failed at N={N}: {exc}") from exc
        rep.sigma_max.append(float(s[0]))
        rep.sigma_min.append(float(s[-1]))
        rep.condition.append(float(s[0] / s[-1]) if s[-1] > 0 else math.inf)
        if G is not None:
            B = toeplitz_coanalytic(G.taylor(N), SpaceParams(p.n, N, F.e_dim))
            rep.left_inverse_norm.append(float(np.linalg.norm(B, 2)))
            rep.left_inverse_residual.append(float(np.max(np.abs(B @ A - np.eye(A.shape[1])))))
    return rep


def power_decay_check(T: ModelOperator, vectors, K: int):
    """Rows ``[||T^k h|| for k = 0..K]`` for each test vector h (subspace coordinates)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    M = T.matrix
    table = []
    for h in vectors:
        v = np.asarray(h, dtype=complex)
        norms = [float(np.linalg.norm(v))]
        for _ in range(K):
            v = M @ v
            norms.append(float(np.linalg.norm(v)))
        table.append(norms)
    return table


@dataclass
class Corollary22Report:
    norm: float
    min_eigenvalues: list
    level_n_psd: bool
    lower_levels_psd: bool
    tolerance: float

    @property
    def consistent(self) -> bool:
        # level n PSD for a contraction forces every lower level PSD
        return (not self.level_n_psd) or self.lower_levels_psd

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "tolerance": self.tolerance,
            "levels": [
                {"k": k + 1, "min_eigenvalue": e, "pass": e >= -self.tolerance} for k, e in enumerate(self.min_eigenvalues)
            ],
            "level_n_psd": self.level_n_psd,
            "lower_levels_psd": self.lower_levels_psd,
            "consistent": self.consistent,
        }


class NotAContractionError(ValueError):
    pass


def corollary22_check(T, n: int, tol: float = 1e-10) -> Corollary22Report:
    M = T.matrix if isinstance(T, ModelOperator) else np.asarray(T)
    norm = float(np.linalg.norm(M, 2))
    if norm > 1 + tol:
        raise NotAContractionError(f"||T|| = {norm:.6g} exceeds 1 + {tol:g}")
    mins = [min_eigenvalue(hypercontraction_defect(M, k)) for k in range(1, n + 1)]
    return Corollary22Report(norm, mins, mins[-1] >= -tol, all(e >= -tol for e in mins[:-1]), tol)


# --- report -----------------------------------------------------------------


@dataclass
class ReportConfig:
    degrees: tuple = (50, 100, 200)
    grid_nr: int = 256
    grid_ntheta: int = 256
    grid_R: float = pot.DEFAULT_R
    bounds_nr: int = 128
    bounds_ntheta: int = 256
    bounds_R: float = 1.0 - 1e-9
    rings: tuple = tuple(1.0 - 2.0 ** -k for k in range(1, 7))
    ring_angles: int = 32
    levels: tuple = tuple(range(0, 9))
    stable_levels: tuple = tuple(range(3, 9))
    carleson_factor: float = 2.0
    hyper_degree: int = 60
    tol: float = 1e-10


def _flag(flag, evidence, **ctx) -> dict:
    return {"flag": flag, "evidence": evidence, **ctx}


def _json_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    if isinstance(obj, (np.bool_,)):
        obj = bool(obj)
    return _json_float(obj)


@dataclass
class SimilarityReport:
    sections: dict

    @property
    def verdict(self) -> str:
        return self.sections["verdict"]["overall"]

    def to_dict(self) -> dict:
        return _clean(self.sections)


def assemble_report(F: Frame, p: SpaceParams, config: ReportConfig | None = None) -> SimilarityReport:
    """Run every diagnostic and emit per-statement flags.

    Statements: (1) similarity via the intertwiner sweep, (2) two-sided frame
    bounds, (3) bounded Green potential, (4) Carleson measure
    defect (1-|z|) dA, (5) pointwise bound defect^{1/2} (1-|z|) bounded.
    A failing sub-analysis is recorded in its section; the report is still
    produced.
    """
    cfg = config or ReportConfig()
    n, m = p.n, F.m
    sec: dict = {"params": {"n": n, "m": m, "e_dim": F.e_dim}}
    flags: dict = {}

    # frame bounds, on a grid pushed toward the circle
    try:
        fb = frame_bounds(F, pot.make_grid(cfg.bounds_nr, cfg.bounds_ntheta, cfg.bounds_R))
        sec["frame_bounds"] = fb.to_dict()
        flags["2"] = _flag(
            "fail" if fb.rank_deficient else "pass",
            "frame_bounds.c",
            value=fb.c,
        )
    except Exception as exc:  # noqa: BLE001 - recorded in the report
        sec["frame_bounds"] = {"error": str(exc)}
        flags["2"] = _flag("inconclusive", "frame_bounds.error")

    grid = pot.make_grid(cfg.grid_nr, cfg.grid_ntheta, cfg.grid_R)

    def defect(z):
        return bg.curvature_values(F, z)

    # defect field + statement (5)
    try:
        vals = defect(grid.z)
        finite = np.isfinite(vals)
        ring_rows = []
        for r in cfg.rings:
            d = defect(pot.ring_points(r, 4 * cfg.ring_angles))
            ring_rows.append({"radius": r, "value": float(np.sqrt(np.max(np.clip(d, 0, None))) * (1 - r))})
        trend, ratios = pot.trend_verdict([row["value"] for row in ring_rows])
        sec["defect"] = {
            "sup": float(np.max(vals[finite])) if finite.any() else None,
            "min": float(np.min(vals[finite])) if finite.any() else None,
            "integral": float(np.sum((vals * grid.weights)[finite])),
            "rank_deficient_nodes": int(np.sum(~finite)),
            "nonnegativity_tolerance": 1e-8,
            "nonnegative": bool(np.all(vals[finite] >= -1e-8)),
            "pointwise_bound": {"rings": ring_rows, "ratios": ratios, "trend": trend},
        }
        if not finite.all():
            flags["5"] = _flag("fail", "defect.rank_deficient_nodes")
        else:
            flags["5"] = _flag(
                {"bounded-looking": "pass", "growing": "fail"}.get(trend, "inconclusive"),
                "defect.pointwise_bound.trend",
            )
    except Exception as exc:  # noqa: BLE001
        sec["defect"] = {"error": str(exc)}
        flags["5"] = _flag("inconclusive", "defect.error")

    # statement (4)
    try:
        car = pot.carleson_constant(lambda z: np.nan_to_num(defect(z)) * (1 - np.abs(z)), grid, cfg.levels)
        stable = car.stable_within(cfg.carleson_factor, cfg.stable_levels)
        sec["carleson"] = {
            **car.to_dict(),
            "stable": {"value": stable, "factor": cfg.carleson_factor, "levels": list(cfg.stable_levels)},
        }
        flags["4"] = _flag("pass" if stable and math.isfinite(car.constant) else "inconclusive", "carleson.stable")
    except Exception as exc:  # noqa: BLE001
        sec["carleson"] = {"error": str(exc)}
        flags["4"] = _flag("inconclusive", "carleson.error")

    # statement (3)
    try:
        field_ = pot.bounded_solution_estimate(defect, cfg.rings, grid, cfg.ring_angles)
        sec["green"] = field_.to_dict()
        flags["3"] = _flag(
            {"bounded-looking": "pass", "growing": "fail"}.get(field_.verdict, "inconclusive"), "green.verdict"
        )
    except Exception as exc:  # noqa: BLE001
        sec["green"] = {"error": str(exc)}
        flags["3"] = _flag("inconclusive", "green.error")

    # statement (1)
    try:
        rep = intertwiner_sweep(F, p, cfg.degrees)
        sec["intertwiner"] = rep.to_dict()
        flags["1"] = _flag("pass" if rep.stabilized else "inconclusive", "intertwiner.stabilized")
    except Exception as exc:  # noqa: BLE001
        sec["intertwiner"] = {"error": str(exc)}
        flags["1"] = _flag("inconclusive", "intertwiner.error")

    # hypercontraction of the model operator
    try:
        T = model_operator(F, SpaceParams(n, cfg.hyper_degree, m))
        hc = is_k_hypercontraction(T.matrix, n, cfg.tol)
        sec["hypercontraction"] = {
            "N": cfg.hyper_degree,
            "invariance_residual": {"value": T.invariance_residual, "tolerance": cfg.tol},
            **hc.to_dict(),
        }
    except Exception as exc:  # noqa: BLE001
        sec["hypercontraction"] = {"error": str(exc)}

    values = [flags[k]["flag"] for k in sorted(flags)]
    if "fail" in values:
        overall = "fail"
    elif all(v == "pass" for v in values):
        overall = "pass"
    else:
        overall = "inconclusive"
    sec["verdict"] = {
        "statements": {k: flags[k] for k in sorted(flags)},
        "overall": overall,
        "consistent": len(set(values)) == 1,
        "notes": [
            pot.BOUNDEDNESS_CAVEAT,
            "Similarity at finite N is judged by the intertwiner condition number changing by "
            f"at most {STABLE_RTOL:.0%} between the last two degrees.",
        ],
    }
    return SimilarityReport(sec)
