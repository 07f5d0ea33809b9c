"""Projections onto bundle fibers and their holomorphic derivatives.

For a full-rank analytic frame F the fiber projection and its d/dz are

    P  = F (F*F)^{-1} F*
    dP = (I - P) F' (F*F)^{-1} F*

and ``||dP||_HS^2`` is the curvature density of the bundle. Everything here
uses the closed form; finite differences only appear in oracles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .frames import Frame
from .space_core import SpaceParams, deriv_kernel_vector, kernel_norm_sq, kernel_vector

GRAM_COND_MAX = 1e12
TENSOR_ROW_CAP = 2048


class RankDeficiencyError(ValueError):
    """The frame Gram matrix F*F is singular or too ill-conditioned at ``z``."""

    def __init__(self, z, cond):
        super().__init__(f"frame Gram matrix ill-conditioned at z={z} (cond={cond:.3g})")
        self.z = z
        self.cond = cond


@dataclass
class ProjectionPoint:
    z: complex
    proj: np.ndarray
    dproj: np.ndarray
    hs_sq: float


def _adj(A):
    return np.swapaxes(A.conj(), -1, -2)


def batched_projection(Fz: np.ndarray, dFz: np.ndarray, cond_max: float = GRAM_COND_MAX):
    """Projection, its d/dz and HS^2 for stacks of frame values.

    Returns ``(proj, dproj, hs_sq, cond)``; nodes whose Gram condition exceeds
    ``cond_max`` come back as NaN.
    """
    Fh = _adj(Fz)
    gram = Fh @ Fz
    ev = np.linalg.eigvalsh(gram)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(ev[..., 0] > 0, ev[..., -1] / ev[..., 0], np.inf)
    bad = ~(cond <= cond_max)
    if np.any(bad):
        gram = gram.copy()
        gram[bad] = np.eye(gram.shape[-1])
    X = np.linalg.solve(gram, Fh)  # (F*F)^{-1} F*
    proj = Fz @ X
    proj = 0.5 * (proj + _adj(proj))
    eye = np.eye(Fz.shape[-2])
    dproj = (eye - proj) @ dFz @ X
    hs = np.sum(np.abs(dproj) ** 2, axis=(-2, -1))
    if np.any(bad):
        proj[bad] = np.nan
        dproj[bad] = np.nan
        hs = np.where(bad, np.nan, hs)
    return proj, dproj, hs, cond


def _frame_formula(F1, dF1, z) -> ProjectionPoint:
    proj, dproj, hs, cond = batched_projection(F1, dF1)
    if not cond <= GRAM_COND_MAX:
        raise RankDeficiencyError(z, float(cond))
    return ProjectionPoint(complex(z), proj, dproj, float(hs))


def projection_from_frame(F: Frame, z) -> ProjectionPoint:
    return _frame_formula(F(z), F.deriv(z), z)


def lemma31_check(F: Frame, z):
    """Residuals ``(||P dP||, ||(I-P) dP P - dP||)``; both vanish for a holomorphic bundle."""
    pt = projection_from_frame(F, z)
    P, dP = pt.proj, pt.dproj
    r1 = np.linalg.norm(P @ dP, 2)
    r2 = np.linalg.norm((np.eye(len(P)) - P) @ dP @ P - dP, 2)
    return float(r1), float(r2)


def shift_bundle_projection(p: SpaceParams, lam, tail_tol: float = 1e-8) -> ProjectionPoint:
    """Rank-one projection onto span{k_{conj lam}} in the truncated scalar space.

    The derivative uses the analytic frame lam -> k_{conj lam} and its
    lam-derivative k~_{conj lam}.
    """
    p = p.with_fiber(1)
    k = kernel_vector(p, lam)
    tail = 1.0 - float(np.vdot(k, k).real) / kernel_norm_sq(p, lam)
    if tail > tail_tol:
        warnings.warn(
            f"kernel truncation tail {tail:.2e} exceeds {tail_tol:g} at |lam|={abs(lam):.4f}, N={p.N}",
            RuntimeWarning,
            stacklevel=2,
        )
    return _frame_formula(k[:, None], deriv_kernel_vector(p, lam)[:, None], lam)


def curvature_defect(F: Frame, z) -> float:
    """||dP_2/dz||_HS^2 of the frame bundle.

    By the tensor split this equals ||dP/dz||_HS^2 - m n / (1-|z|^2)^2 for the
    full eigenvector bundle k_{conj z} (x) ran F(z).
    """
    return projection_from_frame(F, z).hs_sq


def curvature_values(F: Frame, z) -> np.ndarray:
    """Vectorized :func:`curvature_defect`; NaN where the frame is rank deficient."""
    z = np.asarray(z, dtype=complex)
    _, _, hs, _ = batched_projection(F(z), F.deriv(z))
    return hs


def shift_curvature(n: int, m: int, z):
    """m n / (1 - |z|^2)^2, the model-space part of the curvature."""
    return m * n / (1.0 - np.abs(np.asarray(z)) ** 2) ** 2


@dataclass
class CurvatureField:
    z: np.ndarray
    defect: np.ndarray
    shift_part: np.ndarray
    rank_deficient: np.ndarray

    @property
    def total(self):
        return self.defect + self.shift_part


def curvature_field(F: Frame, z, n: int | None = None) -> CurvatureField:
    z = np.asarray(z, dtype=complex)
    defect = curvature_values(F, z)
    return CurvatureField(z, defect, shift_curvature(n or F.n, F.m, z), np.isnan(defect))


@dataclass
class TensorSplit:
    residual: float
    total: float
    shift_part: float
    frame_part: float


def tensor_split_check(F: Frame, p: SpaceParams, lam, row_cap: int = TENSOR_ROW_CAP) -> TensorSplit:
    """Compare ||dP||^2 of the full bundle with m ||dP_1||^2 + ||dP_2||^2.

    The full projection is computed from the tensor frame
    lam -> k_{conj lam} (x) F(lam), differentiated by the product rule on the
    frame, so it shares no intermediate with the factor projections.
    """
    rows = (p.N + 1) * F.e_dim
    if rows > row_cap:
        raise MemoryError(f"tensor model has {rows} rows, above the cap {row_cap}")
    q = p.with_fiber(1)
    k, dk = kernel_vector(q, lam), deriv_kernel_vector(q, lam)
    Fl, dFl = F(lam), F.deriv(lam)
    full = _frame_formula(np.kron(k[:, None], Fl), np.kron(dk[:, None], Fl) + np.kron(k[:, None], dFl), lam)
    shift = shift_bundle_projection(q, lam, tail_tol=np.inf).hs_sq
    frame = projection_from_frame(F, lam).hs_sq
    return TensorSplit(abs(full.hs_sq - F.m * shift - frame), full.hs_sq, shift, frame)


def line_bundle_oracle(F: Frame, z, h: float = 1e-3) -> float:
    """Normalized 5-point Laplacian of log ||F||^2 (m = 1 only).

    For a line bundle this is the curvature defect, computed without any
    projection algebra.
    """
    from .potential import laplacian_fd

    if F.m != 1:
        raise ValueError("line_bundle_oracle needs a single-column frame")
    if h <= 1e-12:
        raise ValueError(f"step h={h} underflows the finite-difference stencil")
    return laplacian_fd(lambda w: float(np.log(np.sum(np.abs(F(w)) ** 2))), z, h)
