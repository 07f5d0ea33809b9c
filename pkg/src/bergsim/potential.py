"""Disk quadrature, Green potentials, Carleson boxes and the growth estimates.

Laplacians use the normalized convention Delta = d dbar = (1/4)(d_xx + d_yy),
so Delta |z|^2 = 1 and the Green potential

    G_f(lam) = (2/pi) iint_D log|(z - lam)/(1 - conj(lam) z)| f(z) dx dy

solves Delta G_f = f.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_R = 1.0 - 2.0**-10
TREND_RATIO = 1.05
BOUNDEDNESS_CAVEAT = (
    "Boundedness is judged from a per-ring trend on a compact subdisk; "
    "finite-radius numerics cannot certify a supremum over the open disk."
)


# --- grids ------------------------------------------------------------------


@dataclass(frozen=True)
class DiskGrid:
    """Tensor polar midpoint rule on the disk of radius ``R``.

    Node ``(k, j)`` sits at the radial midpoint of ``[r_edges[k], r_edges[k+1]]``
    and angle ``(j + 1/2) dtheta`` with weight ``r dr dtheta``.
    """

    r_edges: np.ndarray
    ntheta: int

    @property
    def R(self) -> float:
        return float(self.r_edges[-1])

    @property
    def nr(self) -> int:
        return len(self.r_edges) - 1

    @property
    def radii(self) -> np.ndarray:
        return 0.5 * (self.r_edges[1:] + self.r_edges[:-1])

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.ntheta

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.ntheta) + 0.5) * self.dtheta

    @property
    def z2d(self) -> np.ndarray:
        return self.radii[:, None] * np.exp(1j * self.theta)[None, :]

    @property
    def weights2d(self) -> np.ndarray:
        w = self.radii * np.diff(self.r_edges) * self.dtheta
        return np.repeat(w[:, None], self.ntheta, axis=1)

    @property
    def z(self) -> np.ndarray:
        return self.z2d.ravel()

    @property
    def weights(self) -> np.ndarray:
        return self.weights2d.ravel()


def _graded_edges(nr: int, R: float) -> np.ndarray:
    # half the cells uniform in r, half uniform in log(1 - r)
    a = (nr / 2) / R
    b = (nr / 2) / math.log(1.0 / (1.0 - R))

    def count(r):
        return a * r - b * np.log1p(-r)

    target = np.arange(nr + 1) * (count(R) / nr)
    lo, hi = np.zeros(nr + 1), np.full(nr + 1, R)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = count(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    edges = 0.5 * (lo + hi)
    edges[0], edges[-1] = 0.0, R
    return edges


def make_grid(nr: int, ntheta: int, R: float = DEFAULT_R, radial: str = "graded") -> DiskGrid:
    """Polar midpoint grid on |z| < R.

    ``radial`` is ``"uniform"``, ``"geometric"`` (1 - r geometric toward R) or
    ``"graded"`` (uniform in the interior, geometric near the boundary).
    """
    if nr < 1 or ntheta < 1:
        raise ValueError("nr and ntheta must be >= 1")
    if not 0 < R < 1:
        raise ValueError(f"outer radius must satisfy 0 < R < 1, got {R}")
    if radial == "uniform" or nr == 1:
        edges = np.linspace(0.0, R, nr + 1)
    elif radial == "geometric":
        edges = 1.0 - (1.0 - R) ** (np.arange(nr + 1) / nr)
        edges[-1] = R
    elif radial == "graded":
        edges = _graded_edges(nr, R)
    else:
        raise ValueError(f"unknown radial spacing {radial!r}")
    return DiskGrid(np.asarray(edges, dtype=float), int(ntheta))


def disk_integral(values, grid: DiskGrid) -> float:
    return float(np.sum(np.asarray(values) * grid.weights))


# --- finite differences -----------------------------------------------------


def laplacian_fd(u: Callable, z, h: float, radius: float = 1.0) -> float:
    """(u(z+h) + u(z-h) + u(z+ih) + u(z-ih) - 4u(z)) / (4h^2)."""
    z = complex(z)
    if h <= 0:
        raise ValueError("step must be positive")
    if abs(z) + h >= radius:
        raise ValueError(f"stencil at z={z} with h={h} leaves the disk of radius {radius}")
    s = u(z + h) + u(z - h) + u(z + 1j * h) + u(z - 1j * h) - 4.0 * u(z)
    return float(np.real(s)) / (4.0 * h * h)


# --- Green potentials -------------------------------------------------------


def _disk_log_potential(lam, R):
    # iint_{|z|<R} log|z - lam| dA for |lam| < R
    return math.pi * R * R * math.log(R) - 0.5 * math.pi * (R * R - abs(lam) ** 2)


class GreenEvaluator:
    """Green potential of a fixed density on a fixed grid.

    ``method="subtract"`` integrates log|z - lam| (f(z) - f(lam)) by the
    midpoint rule and adds f(lam) times the exact log potential of the disk
    |z| < R. ``method="cell"`` replaces the cell containing lam by the exact
    integral over an equal-area disk centred at lam, times f(lam).
    """

    def __init__(self, density: Callable, grid: DiskGrid, method: str = "subtract"):
        if method not in ("subtract", "cell"):
            raise ValueError(f"unknown method {method!r}")
        self.density = density
        self.grid = grid
        self.method = method
        self.z = grid.z
        self.w = grid.weights
        f = np.asarray(density(self.z), dtype=float)
        if f.shape != self.z.shape:
            f = np.broadcast_to(f, self.z.shape).astype(float)
        if np.any(np.isnan(f)):
            k = int(np.argmax(np.isnan(f)))
            raise ValueError(f"density is NaN at node z={self.z[k]}")
        self.f = f
        self.wf = self.w * f

    def _f_at(self, lam) -> float:
        v = float(np.asarray(self.density(np.asarray([lam], dtype=complex))).ravel()[0])
        if math.isnan(v):
            raise ValueError(f"density is NaN at lam={lam}")
        return v

    def _kernels(self, lam):
        R = self.grid.R
        if not abs(lam) < R:
            raise ValueError(f"|lam| must be below the grid radius {R}")
        with np.errstate(divide="ignore", invalid="ignore"):
            log_near = np.log(np.abs(self.z - lam))
        log_far = np.log(np.abs(1.0 - np.conj(lam) * self.z))
        return np.where(np.isfinite(log_near), log_near, 0.0), log_far

    def _total(self, lam, near, far, f, fl) -> float:
        if self.method == "subtract":
            total = np.sum(self.w * near * (f - fl)) + fl * _disk_log_potential(lam, self.grid.R) - np.sum(self.w * f * far)
        else:
            k = self._cell_index(lam)
            terms = self.w * f * (near - far)
            rho = math.sqrt(self.w[k] / math.pi)
            disk = math.pi * rho * rho * math.log(rho) - 0.5 * math.pi * rho * rho
            terms[k] = fl * disk - self.w[k] * f[k] * far[k]
            total = np.sum(terms)
        return float(2.0 / math.pi * total)

    def __call__(self, lam) -> float:
        lam = complex(lam)
        near, far = self._kernels(lam)
        return self._total(lam, near, far, self.f, self._f_at(lam))

    def exhausted(self, lam, radii: Sequence[float]) -> np.ndarray:
        """Potentials of the density cut off to |z| < rho, one per rho in ``radii``.

        For a nonnegative density these decrease monotonically in rho, and
        the potential is bounded exactly when they stay bounded as rho -> 1.
        """
        lam = complex(lam)
        near, far = self._kernels(lam)
        fl = self._f_at(lam)
        r = np.abs(self.z)
        out = []
        for rho in radii:
            f = np.where(r < rho, self.f, 0.0)
            out.append(self._total(lam, near, far, f, fl if abs(lam) < rho else 0.0))
        return np.array(out)

    def _cell_index(self, lam) -> int:
        g = self.grid
        kr = int(np.clip(np.searchsorted(g.r_edges, abs(lam), side="right") - 1, 0, g.nr - 1))
        kt = int(math.floor((math.atan2(lam.imag, lam.real) % (2 * math.pi)) / g.dtheta)) % g.ntheta
        return kr * g.ntheta + kt


def green_potential(density: Callable, lam, grid: DiskGrid, method: str = "subtract") -> float:
    return GreenEvaluator(density, grid, method)(lam)


def poisson_residual(density: Callable, grid: DiskGrid, lam_sample: Sequence, h: float, method: str = "subtract") -> float:
    """sup over the sample of |Delta_h G_f(lam) - f(lam)|."""
    G = GreenEvaluator(density, grid, method)
    worst = 0.0
    for lam in lam_sample:
        lap = laplacian_fd(G, lam, h, radius=grid.R)
        f = float(np.asarray(density(np.asarray([lam], dtype=complex))).ravel()[0])
        worst = max(worst, abs(lap - f))
    return worst


def ring_points(radius: float, n_angles: int) -> np.ndarray:
    return radius * np.exp(2j * math.pi * np.arange(n_angles) / n_angles)


@dataclass
class PotentialField:
    rings: list
    lams: np.ndarray
    values: np.ndarray
    ring_sup: list
    exhaustion_sup: list
    ratios: list
    verdict: str
    note: str = BOUNDEDNESS_CAVEAT

    @property
    def sup_abs(self) -> float:
        return max(self.ring_sup + self.exhaustion_sup, default=0.0)

    def to_dict(self) -> dict:
        return {
            "rings": [
                {"radius": r, "sup_abs": s, "exhaustion_sup_abs": e}
                for r, s, e in zip(self.rings, self.ring_sup, self.exhaustion_sup)
            ],
            "ratios": self.ratios,
            "ratio_threshold": TREND_RATIO,
            "sup_abs": self.sup_abs,
            "verdict": self.verdict,
            "note": self.note,
        }


def trend_verdict(sups: Sequence[float], threshold: float = TREND_RATIO, floor: float = 1e-12):
    """Classify a per-ring sequence of suprema.

    ``bounded-looking`` when the last two successive ratios are below
    ``threshold``; ``growing`` when both are at or above it; otherwise
    ``inconclusive``.
    """
    sups = [float(s) for s in sups]
    ratios = [b / a if a > floor else (math.inf if b > floor else 1.0) for a, b in zip(sups, sups[1:])]
    if not sups or max(sups) <= floor:
        return "bounded-looking", ratios
    if len(ratios) < 2:
        return "inconclusive", ratios
    last = ratios[-2:]
    if all(r < threshold for r in last):
        return "bounded-looking", ratios
    if all(r >= threshold for r in last):
        return "growing", ratios
    return "inconclusive", ratios


def bounded_solution_estimate(
    density: Callable, rings: Sequence[float], grid: DiskGrid, n_angles: int = 32, method: str = "subtract"
) -> PotentialField:
    """Green potential on rings plus an exhaustion trend.

    ``ring_sup[k]`` is sup |G| on ring k for the density on the whole grid.
    On a grid truncated at R these always shrink toward the boundary, so the
    verdict instead uses ``exhaustion_sup[k]``: sup |G| over the origin and
    all ring points for the density cut off to |z| < rings[k].
    """
    rings = [float(r) for r in rings]
    if any(b <= a for a, b in zip(rings, rings[1:])):
        raise ValueError("rings must be increasing")
    if rings and rings[-1] >= grid.R:
        raise ValueError("rings must stay inside the grid radius")
    G = GreenEvaluator(density, grid, method)
    lams, values, sups = [], [], []
    exhaustion = np.abs(G.exhausted(0.0, rings)) if rings else np.zeros(0)
    for r in rings:
        pts = ring_points(r, n_angles)
        vals = np.empty(n_angles)
        for j, lam in enumerate(pts):
            cut = G.exhausted(lam, rings + [grid.R])
            vals[j] = cut[-1]
            exhaustion = np.maximum(exhaustion, np.abs(cut[:-1]))
        lams.append(pts)
        values.append(vals)
        sups.append(float(np.max(np.abs(vals))))
    exhaustion = [float(e) for e in exhaustion]
    verdict, ratios = trend_verdict(exhaustion)
    return PotentialField(
        rings,
        np.concatenate(lams) if lams else np.zeros(0, complex),
        np.concatenate(values) if values else np.zeros(0),
        sups,
        exhaustion,
        ratios,
        verdict,
    )


# --- Carleson boxes ---------------------------------------------------------


@dataclass(frozen=True)
class CarlesonBox:
    """Q(I) = {z : arg z in I, 1 - |z| <= |I|} for the arc I centred at theta0."""

    theta0: float
    length: float

    def __post_init__(self):
        if not 0 < self.length <= 2 * math.pi:
            raise ValueError("arc length must lie in (0, 2 pi]")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        d = np.angle(z * np.exp(-1j * self.theta0))
        return (np.abs(d) <= self.length / 2) & (1 - np.abs(z) <= self.length)


@dataclass
class CarlesonResult:
    constant: float
    table: list = field(default_factory=list)

    def running_max(self, levels=None) -> list:
        rows = [r for r in self.table if levels is None or r["level"] in levels]
        return [r["running_max"] for r in rows]

    def stable_within(self, factor: float, levels) -> bool:
        vals = self.running_max(levels)
        if not vals or max(vals) == 0:
            return True
        lo = min(vals)
        return lo > 0 and max(vals) / lo <= factor

    def to_dict(self) -> dict:
        return {"constant": self.constant, "table": self.table}


def _node_values(density, grid: DiskGrid) -> np.ndarray:
    if callable(density):
        vals = np.asarray(density(grid.z), dtype=float)
        vals = np.broadcast_to(vals, grid.z.shape)
    else:
        vals = np.asarray(density, dtype=float).ravel()
    if vals.shape != grid.z.shape:
        raise ValueError("density values do not match the grid")
    return vals.reshape(grid.nr, grid.ntheta)


def box_mass(masses: np.ndarray, grid: DiskGrid, start: np.ndarray, length: float) -> np.ndarray:
    """Mass of Q(I) for arcs [start, start+length], cell masses spread uniformly in area."""
    e = grid.r_edges
    inner = np.clip(1.0 - length, e[:-1], e[1:])
    frac = (e[1:] ** 2 - inner**2) / (e[1:] ** 2 - e[:-1] ** 2)
    col = frac @ masses  # per angular cell
    total = col.sum()
    cum = np.concatenate(([0.0], np.cumsum(col)))
    edges = np.arange(grid.ntheta + 1) * grid.dtheta

    def C(theta):
        turns = np.floor(theta / (2 * math.pi))
        return turns * total + np.interp(theta - turns * 2 * math.pi, edges, cum)

    return C(start + length) - C(start)


def carleson_constant(density, grid: DiskGrid, levels: Sequence[int] = range(0, 9)) -> CarlesonResult:
    """sup over arcs I of mu(Q(I)) / |I| for d mu = density dA.

    Level k uses arcs of length 2^-k whose starts are spaced by half an arc,
    so every arc of length 2^-(k+1) lies inside one of them.
    """
    masses = _node_values(density, grid) * grid.weights2d
    if not np.all(np.isfinite(masses)):
        raise ValueError("density is not finite on the grid")
    table, running = [], 0.0
    for k in sorted(levels):
        s = 2.0 ** (-k)
        if s > 2 * math.pi:
            raise ValueError(f"level {k} gives an arc longer than the circle")
        starts = np.arange(int(math.ceil(4 * math.pi / s))) * (s / 2)
        mass = box_mass(masses, grid, starts, s)
        if not np.all(np.isfinite(mass)):
            raise ValueError(f"non-finite box integral at level {k}")
        j = int(np.argmax(mass))
        ratio = float(mass[j] / s)
        running = max(running, ratio)
        table.append(
            {
                "level": int(k),
                "arc_length": s,
                "max_ratio": ratio,
                "running_max": running,
                "arc_center": float((starts[j] + s / 2) % (2 * math.pi)),
            }
        )
    return CarlesonResult(running, table)


# --- frame estimates --------------------------------------------------------


def derivative_growth_check(F, radii: Sequence[float], n_angles: int = 256):
    """sup over circles of ||F'(z)|| (1 - |z|), operator norm; returns (sup, table)."""
    table = []
    for r in radii:
        if not 0 <= r < 1:
            raise ValueError("radii must lie in [0, 1)")
        dF = F.deriv(ring_points(r, n_angles))
        norms = np.linalg.norm(dF, ord=2, axis=(-2, -1))
        table.append({"radius": float(r), "value": float(norms.max() * (1 - r))})
    return max((row["value"] for row in table), default=0.0), table


def uchiyama_check(F, grid: DiskGrid, h: float = 1e-3, sample=None, levels=range(0, 9)):
    """FD check of Delta ||F||_HS^2 = ||F'||_HS^2 plus the Carleson table of ||F'||^2 (1-|z|) dA.

    Returns ``(residual, CarlesonResult)``.
    """
    if sample is None:
        sample = [r * np.exp(1j * t) for r in (0.0, 0.3, 0.6, 0.9) for t in (0.1, 1.7, 3.9)]

    def sq(z):
        return float(np.sum(np.abs(F(z)) ** 2))

    residual = 0.0
    for z in sample:
        exact = float(np.sum(np.abs(F.deriv(z)) ** 2))
        residual = max(residual, abs(laplacian_fd(sq, z, h) - exact))

    def density(z):
        return np.sum(np.abs(F.deriv(z)) ** 2, axis=(-2, -1)) * (1 - np.abs(z))

    return residual, carleson_constant(density, grid, levels)


def field_csv(z, values, extra=None) -> str:
    """Rows ``re z, im z, value`` in 17-significant-digit scientific notation."""
    out = io.StringIO()
    header = ["re_z", "im_z", "value"] + ([extra[0]] if extra else [])
    out.write(",".join(header) + "\n")
    z = np.asarray(z).ravel()
    v = np.asarray(values, dtype=float).ravel()
    flags = np.asarray(extra[1]).ravel() if extra else None
    for k in range(z.size):
        row = [f"{z[k].real:.16e}", f"{z[k].imag:.16e}", f"{v[k]:.16e}"]
        if flags is not None:
            row.append(str(int(flags[k])))
        out.write(",".join(row) + "\n")
    return out.getvalue()
