"""Finite truncations of the weighted Bergman spaces M_{n,E}.

All operator matrices live in the orthonormal basis

    e_i (x) f_j,   e_i = z^i / sqrt(w_i),   w_i = 1 / binom(n+i-1, i)

flattened degree-major: row index ``i * fiber_dim + j``. Adjoints are then
plain conjugate transposes and the shifts are weighted shifts with weights
sqrt((i+1)/(n+i)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes disagree with the space parameters."""


class EigenSolverError(RuntimeError):
    """The Hermitian eigen-solver failed (distinct from a negative answer)."""


@dataclass(frozen=True)
class SpaceParams:
    """Order ``n`` (n=1 is Hardy), truncation degree ``N`` and fiber dimension."""

    n: int
    N: int
    fiber_dim: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"order n must be a positive integer, got {self.n}")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"truncation degree N must be >= 0, got {self.N}")
        if int(self.fiber_dim) != self.fiber_dim or self.fiber_dim < 1:
            raise ValueError(f"fiber_dim must be >= 1, got {self.fiber_dim}")

    @property
    def size(self) -> int:
        return (self.N + 1) * self.fiber_dim

    def with_fiber(self, fiber_dim: int) -> "SpaceParams":
        return SpaceParams(self.n, self.N, fiber_dim)


@dataclass(frozen=True)
class VectorFunctionCoeffs:
    """Taylor coefficients ``coeffs[i] = f^(i)`` of an E-valued polynomial."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1:
            raise DimensionError(f"coefficient array must be (N+1, fiber_dim), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def fiber_dim(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, z):
        """Evaluate the polynomial at ``z`` (Horner)."""
        out = np.zeros(self.fiber_dim, dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    def to_basis(self, p: SpaceParams) -> np.ndarray:
        """Flattened coordinates in the orthonormal basis."""
        c = _check_fits(self, p)
        return (c * np.sqrt(monomial_weights(p.n, p.N))[:, None]).ravel()

    @classmethod
    def from_basis(cls, x, p: SpaceParams) -> "VectorFunctionCoeffs":
        x = np.asarray(x, dtype=complex).reshape(p.N + 1, p.fiber_dim)
        return cls(x / np.sqrt(monomial_weights(p.n, p.N))[:, None])


def _check_fits(f: VectorFunctionCoeffs, p: SpaceParams) -> np.ndarray:
    """Coefficients zero-padded to degree N; raises if f does not fit in the truncation."""
    if f.fiber_dim != p.fiber_dim or f.degree > p.N:
        raise DimensionError(
            f"coefficients of shape {f.coeffs.shape} do not fit "
            f"(N+1, fiber_dim) = ({p.N + 1}, {p.fiber_dim})"
        )
    if f.degree == p.N:
        return f.coeffs
    return np.vstack([f.coeffs, np.zeros((p.N - f.degree, p.fiber_dim), dtype=complex)])


def _check_disk(lam):
    if not abs(lam) < 1:
        raise ValueError(f"point must lie in the open unit disk, got {lam}")


def monomial_weight(n: int, i: int) -> float:
    """Norm weight ``||z^i||^2 = 1/binom(n+i-1, i)`` (log-domain, no overflow)."""
    if n < 1 or i < 0:
        raise ValueError("need n >= 1 and i >= 0")
    return math.exp(math.lgamma(i + 1) + math.lgamma(n) - math.lgamma(n + i))


def monomial_weights(n: int, N: int) -> np.ndarray:
    """Weights w_0..w_N by the ratio recursion w_{i+1} = w_i (i+1)/(n+i)."""
    i = np.arange(N, dtype=float)
    return np.concatenate(([1.0], np.cumprod((i + 1.0) / (n + i))))


def shift_weights(n: int, N: int) -> np.ndarray:
    """sqrt((i+1)/(n+i)) for i = 0..N-1: the forward-shift matrix weights."""
    i = np.arange(N, dtype=float)
    return np.sqrt((i + 1.0) / (n + i))


def space_norm_sq(f: VectorFunctionCoeffs, p: SpaceParams) -> float:
    """sum_i |f^(i)|^2 w_i with fiber norms summed."""
    c = _check_fits(f, p)
    w = monomial_weights(p.n, p.N)
    return float(np.sum(w * np.sum(np.abs(c) ** 2, axis=1)))


def inner(f: VectorFunctionCoeffs, g: VectorFunctionCoeffs, p: SpaceParams) -> complex:
    """<f, g> in M_{n,E}, linear in the first slot."""
    cf, cg = _check_fits(f, p), _check_fits(g, p)
    w = monomial_weights(p.n, p.N)
    return complex(np.sum(w[:, None] * cf * np.conj(cg)))


def _sqrt_binom(n: int, N: int) -> np.ndarray:
    return 1.0 / np.sqrt(monomial_weights(n, N))


def kernel_vector(p: SpaceParams, lam) -> np.ndarray:
    """Orthonormal-basis coordinates sqrt(binom(n+i-1,i)) lam^i of k_{conj(lam)}.

    k_{conj(lam)}(z) = (1 - lam z)^{-n}; scalar fiber.
    """
    _check_disk(lam)
    lam = complex(lam)
    out = np.empty(p.N + 1, dtype=complex)
    out[0] = 1.0
    if p.N:
        ratio = lam * np.sqrt((p.n + np.arange(p.N)) / (np.arange(p.N) + 1.0))
        out[1:] = np.cumprod(ratio)
    return out


def deriv_kernel_vector(p: SpaceParams, lam) -> np.ndarray:
    """Coordinates of d/dlam k_{conj(lam)}(z) = n z (1 - lam z)^{-n-1}."""
    _check_disk(lam)
    lam = complex(lam)
    i = np.arange(p.N + 1)
    out = np.zeros(p.N + 1, dtype=complex)
    out[1:] = i[1:] * _sqrt_binom(p.n, p.N)[1:] * lam ** (i[1:] - 1)
    return out


def kernel_coeffs(p: SpaceParams, lam) -> VectorFunctionCoeffs:
    """Taylor coefficients binom(n+i-1,i) lam^i of k_{conj(lam)}, truncated at N."""
    return VectorFunctionCoeffs(kernel_vector(p, lam) * _sqrt_binom(p.n, p.N))


def deriv_kernel_coeffs(p: SpaceParams, lam) -> VectorFunctionCoeffs:
    return VectorFunctionCoeffs(deriv_kernel_vector(p, lam) * _sqrt_binom(p.n, p.N))


def kernel_norm_sq(p: SpaceParams, lam) -> float:
    """||k_lam^n||^2 = (1 - |lam|^2)^{-n}."""
    _check_disk(lam)
    return (1.0 - abs(lam) ** 2) ** (-p.n)


def deriv_kernel_norm_sq(p: SpaceParams, lam) -> float:
    """||k~_lam^n||^2 = n (1 + n|lam|^2) / (1 - |lam|^2)^{n+2}."""
    _check_disk(lam)
    r2 = abs(lam) ** 2
    return p.n * (1.0 + p.n * r2) / (1.0 - r2) ** (p.n + 2)


def deriv_kernel_inner(p: SpaceParams, lam) -> complex:
    """<k~_{conj lam}, k_{conj lam}> = n conj(lam) / (1 - |lam|^2)^{n+1}."""
    _check_disk(lam)
    return p.n * np.conj(complex(lam)) / (1.0 - abs(lam) ** 2) ** (p.n + 1)


def forward_shift(p: SpaceParams) -> np.ndarray:
    """Multiplication by z; the top degree is sent to 0."""
    s = np.diag(shift_weights(p.n, p.N).astype(complex), k=-1)
    return np.kron(s, np.eye(p.fiber_dim))


def backward_shift(p: SpaceParams) -> np.ndarray:
    """Adjoint of :func:`forward_shift`.

    Exact on the truncation: S* maps polynomials of degree <= N into degree
    <= N-1, so this is the true compression of S*_{n,E}.
    """
    return forward_shift(p).conj().T


def hypercontraction_defect(T: np.ndarray, k: int) -> np.ndarray:
    """sum_{i=0}^k (-1)^i binom(k,i) T*^i T^i, symmetrized."""
    if k < 1:
        raise ValueError(f"defect level must be >= 1, got {k}")
    T = np.asarray(T, dtype=complex)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionError(f"operator must be square, got {T.shape}")
    power = np.eye(T.shape[0], dtype=complex)
    out = power.copy()
    for i in range(1, k + 1):
        power = T @ power
        out += (-1) ** i * math.comb(k, i) * (power.conj().T @ power)
    return 0.5 * (out + out.conj().T)


@dataclass
class HypercontractionResult:
    passed: bool
    min_eigenvalues: list
    thresholds: list
    level: int

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "passed": self.passed,
            "levels": [
                {"k": j + 1, "min_eigenvalue": float(e), "tolerance": float(t), "pass": bool(e >= -t)}
                for j, (e, t) in enumerate(zip(self.min_eigenvalues, self.thresholds))
            ],
        }


def min_eigenvalue(H: np.ndarray) -> float:
    try:
        return float(np.linalg.eigvalsh(H)[0])
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def is_k_hypercontraction(T: np.ndarray, k: int, tol: float = 1e-10) -> HypercontractionResult:
    """Check the defects of levels 1..k for positive semidefiniteness.

    Level j passes when its smallest eigenvalue is >= -tol * max(1, ||D_j||).
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    mins, thresholds = [], []
    for j in range(1, k + 1):
        D = hypercontraction_defect(T, j)
        mins.append(min_eigenvalue(D))
        thresholds.append(tol * max(1.0, float(np.linalg.norm(D, 2))))
    passed = all(e >= -t for e, t in zip(mins, thresholds))
    return HypercontractionResult(passed, mins, thresholds, k)


def as_symbol(coeffs, N: int) -> np.ndarray:
    """Normalize matrix Taylor coefficients to shape (N+1, out, in), zero padded."""
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[:, None, None]
    elif c.ndim == 2:
        c = c[:, :, None]
    if c.ndim != 3:
        raise DimensionError(f"symbol must have shape (deg+1, out, in), got {c.shape}")
    out = np.zeros((N + 1,) + c.shape[1:], dtype=complex)
    k = min(N + 1, c.shape[0])
    out[:k] = c[:k]
    return out


def symbol_degree(coeffs, tol: float = 0.0) -> int:
    """Largest k with a coefficient above ``tol`` in max-abs (0 for the zero symbol)."""
    c = np.asarray(coeffs)
    mags = np.abs(c.reshape(c.shape[0], -1)).max(axis=1)
    nz = np.nonzero(mags > tol)[0]
    return int(nz[-1]) if nz.size else 0


def _toeplitz_blocks(sym: np.ndarray, p: SpaceParams, lower: bool) -> np.ndarray:
    N = p.N
    s = np.sqrt(monomial_weights(p.n, N))
    i, j = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    d = i - j if lower else j - i
    mask = d >= 0
    blocks = sym[np.where(mask, d, 0)]  # (N+1, N+1, out, in)
    ratio = np.where(mask, s[i] / s[j] if lower else s[j] / s[i], 0.0)
    blocks = blocks * ratio[:, :, None, None]
    out_dim, in_dim = sym.shape[1:]
    return blocks.transpose(0, 2, 1, 3).reshape((N + 1) * out_dim, (N + 1) * in_dim)


def toeplitz_analytic(symbol, p: SpaceParams) -> np.ndarray:
    """T_Phi for an analytic symbol: block (i,j) = Phi^(i-j) sqrt(w_i/w_j), i >= j.

    ``symbol`` holds Taylor coefficients of shape (deg+1, out, in); degrees
    above N are dropped.
    """
    sym = as_symbol(symbol, p.N)
    if sym.shape[2] != p.fiber_dim:
        raise DimensionError(f"symbol input dim {sym.shape[2]} != fiber_dim {p.fiber_dim}")
    return _toeplitz_blocks(sym, p, lower=True)


def toeplitz_coanalytic(G, p: SpaceParams) -> np.ndarray:
    """T_Q with Q(z) = G(conj z): block (i,j) = G^(j-i) sqrt(w_j/w_i), j >= i.

    Acts on kernels by k_{conj lam} (x) e -> k_{conj lam} (x) G(lam) e, exactly on
    degrees <= N - deg G.
    """
    sym = as_symbol(G, p.N)
    if sym.shape[2] != p.fiber_dim:
        raise DimensionError(f"symbol input dim {sym.shape[2]} != fiber_dim {p.fiber_dim}")
    return _toeplitz_blocks(sym, p, lower=False)


def interior_rows(p: SpaceParams, degree: int, fiber_dim: int) -> slice:
    """Rows of degrees 0..N-degree in the flattened basis."""
    top = max(p.N - degree, -1)
    return slice(0, (top + 1) * fiber_dim)


def intertwine_check(G, p: SpaceParams) -> float:
    """||S*_E T_Q - T_Q S*_m|| restricted to degrees <= N - deg G."""
    sym = as_symbol(G, p.N)
    out_dim, in_dim = sym.shape[1:]
    A = toeplitz_coanalytic(sym, p.with_fiber(in_dim))
    S_out = backward_shift(p.with_fiber(out_dim))
    S_in = backward_shift(p.with_fiber(in_dim))
    C = S_out @ A - A @ S_in
    rows = interior_rows(p, symbol_degree(sym), out_dim)
    block = C[rows]
    return float(np.linalg.norm(block, 2)) if block.size else 0.0
