"""Closed-form analytic matrix functions F: D -> L(C^m, E).

A frame is an ``e_dim x m`` grid of atoms. Atoms are a small set closed under
differentiation so that values, derivatives and Taylor coefficients are all
exact (up to rounding):

    poly               sum_k c_k z^k
    blaschke           (a - z) / (1 - conj(a) z),  |a| < 1
    power_one_minus_z  (1 - z)^alpha, principal branch, alpha > -1/2
    scale, sum, product
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class FrameParseError(ValueError):
    """Invalid frame document; ``path`` locates the offending JSON node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class Atom:
    def __call__(self, z):
        raise NotImplementedError

    def deriv(self, z):
        raise NotImplementedError

    def taylor(self, N: int) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _cpx(c) -> list:
    c = complex(c)
    return [c.real, c.imag]


@dataclass(frozen=True)
class Poly(Atom):
    coeffs: tuple

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    def deriv(self, z):
        d = tuple(k * c for k, c in enumerate(self.coeffs))[1:] or (0j,)
        return Poly(d)(z)

    def taylor(self, N):
        out = np.zeros(N + 1, dtype=complex)
        k = min(N + 1, len(self.coeffs))
        out[:k] = self.coeffs[:k]
        return out

    def to_json(self):
        return {"type": "poly", "coeffs": [_cpx(c) for c in self.coeffs]}


@dataclass(frozen=True)
class Blaschke(Atom):
    a: complex

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ValueError(f"Blaschke parameter must satisfy |a| < 1, got {self.a}")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a - z) / (1 - np.conj(self.a) * z)

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        return (abs(self.a) ** 2 - 1) / (1 - np.conj(self.a) * z) ** 2

    def taylor(self, N):
        # (a - z) sum_k conj(a)^k z^k
        ab = np.conj(self.a)
        out = np.empty(N + 1, dtype=complex)
        out[0] = self.a
        if N:
            out[1:] = (abs(self.a) ** 2 - 1) * ab ** np.arange(N)
        return out

    def to_json(self):
        return {"type": "blaschke", "a": _cpx(self.a)}


@dataclass(frozen=True)
class PowerOneMinusZ(Atom):
    alpha: float

    def __post_init__(self):
        if not self.alpha > -0.5:
            raise ValueError(f"power_one_minus_z needs alpha > -1/2, got {self.alpha}")

    def __call__(self, z):
        return (1 - np.asarray(z, dtype=complex)) ** self.alpha

    def deriv(self, z):
        return -self.alpha * (1 - np.asarray(z, dtype=complex)) ** (self.alpha - 1)

    def taylor(self, N):
        k = np.arange(N, dtype=float)
        return np.concatenate(([1.0 + 0j], np.cumprod((k - self.alpha) / (k + 1)))).astype(complex)

    def to_json(self):
        return {"type": "power_one_minus_z", "alpha": float(self.alpha)}


@dataclass(frozen=True)
class Scale(Atom):
    c: complex
    inner: Atom

    def __call__(self, z):
        return self.c * self.inner(z)

    def deriv(self, z):
        return self.c * self.inner.deriv(z)

    def taylor(self, N):
        return self.c * self.inner.taylor(N)

    def to_json(self):
        return {"type": "scale", "c": _cpx(self.c), "of": self.inner.to_json()}


@dataclass(frozen=True)
class Sum(Atom):
    terms: tuple

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((t(z) for t in self.terms), np.zeros_like(z))

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((t.deriv(z) for t in self.terms), np.zeros_like(z))

    def taylor(self, N):
        return sum((t.taylor(N) for t in self.terms), np.zeros(N + 1, dtype=complex))

    def to_json(self):
        return {"type": "sum", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Product(Atom):
    factors: tuple

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for f in self.factors:
            out = out * f(z)
        return out

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        vals = [f(z) for f in self.factors]
        out = np.zeros_like(z)
        for k, f in enumerate(self.factors):
            term = f.deriv(z)
            for j, v in enumerate(vals):
                if j != k:
                    term = term * v
            out = out + term
        return out

    def taylor(self, N):
        out = np.zeros(N + 1, dtype=complex)
        out[0] = 1.0
        for f in self.factors:
            out = np.convolve(out, f.taylor(N))[: N + 1]
        return out

    def to_json(self):
        return {"type": "product", "factors": [f.to_json() for f in self.factors]}


def constant(c) -> Poly:
    return Poly((complex(c),))


@dataclass(frozen=True)
class Frame:
    """An ``e_dim x m`` matrix of atoms with Bergman order ``n``.

    ``left_inverse``, when given, is an ``m x e_dim`` frame G with G F = I.
    """

    entries: tuple
    n: int = 1
    left_inverse: Optional["Frame"] = None

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        if not rows or not rows[0]:
            raise ValueError("frame must have at least one row and column")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged frame entries")

    @property
    def e_dim(self) -> int:
        return len(self.entries)

    @property
    def m(self) -> int:
        return len(self.entries[0])

    def _grid(self, z, method):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) >= 1):
            raise ValueError("frame evaluation requires |z| < 1")
        out = np.empty(z.shape + (self.e_dim, self.m), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, atom in enumerate(row):
                out[..., i, j] = getattr(atom, method)(z)
        return out

    def __call__(self, z):
        return self._grid(z, "__call__")

    def deriv(self, z):
        return self._grid(z, "deriv")

    def taylor(self, N: int) -> np.ndarray:
        out = np.empty((N + 1, self.e_dim, self.m), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, atom in enumerate(row):
                out[:, i, j] = atom.taylor(N)
        return out

    def to_json(self) -> dict:
        doc = {
            "n": self.n,
            "m": self.m,
            "e_dim": self.e_dim,
            "entries": [[a.to_json() for a in row] for row in self.entries],
        }
        if self.left_inverse is not None:
            doc["left_inverse"] = {"entries": [[a.to_json() for a in row] for row in self.left_inverse.entries]}
        return doc


def frame_eval(F: Frame, z):
    return F(z)


def frame_deriv(F: Frame, z):
    return F.deriv(z)


def frame_taylor(F: Frame, N: int) -> np.ndarray:
    """Taylor coefficients of shape (N+1, e_dim, m)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    return F.taylor(N)


@dataclass
class FrameBounds:
    c_low: float
    c_high: float
    c: float
    rank_deficient: bool
    worst_node: complex

    def to_dict(self) -> dict:
        return {
            "c_low": self.c_low,
            "c_high": self.c_high,
            "c": self.c,
            "rank_deficient": self.rank_deficient,
            "worst_node": [self.worst_node.real, self.worst_node.imag],
        }


def frame_bounds(F: Frame, grid, rank_tol: float = 1e-12) -> FrameBounds:
    """Extremal eigenvalues of F*F over the grid nodes.

    ``c = max(c_high, 1/c_low)`` so that c^{-1} I <= F*F <= c I on the nodes;
    ``c`` is infinite when some node has c_low below ``rank_tol``.
    """
    z = np.asarray(getattr(grid, "z", grid), dtype=complex).ravel()
    if z.size == 0:
        raise ValueError("grid is empty")
    Fz = F(z)
    ev = np.linalg.eigvalsh(np.swapaxes(Fz.conj(), -1, -2) @ Fz)
    lo = ev[:, 0]
    k = int(np.argmin(lo))
    c_low, c_high = float(lo[k]), float(ev[:, -1].max())
    deficient = c_low < rank_tol
    c = float("inf") if deficient else max(c_high, 1.0 / c_low)
    return FrameBounds(c_low, c_high, c, deficient, complex(z[k]))


def identity_frame(m: int, n: int = 1) -> Frame:
    return Frame(tuple(tuple(constant(1.0 if i == j else 0.0) for j in range(m)) for i in range(m)), n=n)


def column_frame(atoms: Sequence[Atom], n: int = 1) -> Frame:
    return Frame(tuple((a,) for a in atoms), n=n)


def random_poly_frame(rng: np.random.Generator, e_dim: int, m: int, degree: int, n: int = 1) -> Frame:
    """Random polynomial frame; the constant term is an isometry plus noise so F(z) stays full rank."""
    c = (rng.standard_normal((degree + 1, e_dim, m)) + 1j * rng.standard_normal((degree + 1, e_dim, m))) / (
        2.0 * (degree + 1)
    )
    c[0] += np.eye(e_dim, m) * 2.0
    return Frame(
        tuple(tuple(Poly(tuple(c[:, i, j])) for j in range(m)) for i in range(e_dim)),
        n=n,
    )


# --- JSON -------------------------------------------------------------------


def _parse_complex(v, path) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise FrameParseError(path, f"expected [re, im], got {v!r}")


def _field(obj, key, path):
    if key not in obj:
        raise FrameParseError(path, f"missing field {key!r}")
    return obj[key]


def _parse_atom(obj, path) -> Atom:
    if not isinstance(obj, dict):
        raise FrameParseError(path, "atom must be an object")
    kind = _field(obj, "type", path)
    if kind == "poly":
        coeffs = _field(obj, "coeffs", path)
        if not isinstance(coeffs, list) or not coeffs:
            raise FrameParseError(f"{path}.coeffs", "expected a nonempty list")
        return Poly(tuple(_parse_complex(c, f"{path}.coeffs[{k}]") for k, c in enumerate(coeffs)))
    if kind == "blaschke":
        a = _parse_complex(_field(obj, "a", path), f"{path}.a")
        if not abs(a) < 1:
            raise FrameParseError(f"{path}.a", f"Blaschke parameter needs |a| < 1, got |a| = {abs(a):g}")
        return Blaschke(a)
    if kind == "power_one_minus_z":
        alpha = _field(obj, "alpha", path)
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
            raise FrameParseError(f"{path}.alpha", "expected a real number")
        if not alpha > -0.5:
            raise FrameParseError(f"{path}.alpha", f"alpha must exceed -1/2, got {alpha}")
        return PowerOneMinusZ(float(alpha))
    if kind == "scale":
        return Scale(_parse_complex(_field(obj, "c", path), f"{path}.c"), _parse_atom(_field(obj, "of", path), f"{path}.of"))
    if kind in ("sum", "product"):
        key = "terms" if kind == "sum" else "factors"
        items = _field(obj, key, path)
        if not isinstance(items, list) or not items:
            raise FrameParseError(f"{path}.{key}", "expected a nonempty list")
        parsed = tuple(_parse_atom(t, f"{path}.{key}[{k}]") for k, t in enumerate(items))
        return Sum(parsed) if kind == "sum" else Product(parsed)
    raise FrameParseError(f"{path}.type", f"unknown atom type {kind!r}")


def _parse_entries(rows, rows_n, cols_n, path):
    if not isinstance(rows, list) or len(rows) != rows_n:
        raise FrameParseError(path, f"expected {rows_n} rows")
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != cols_n:
            raise FrameParseError(f"{path}[{i}]", f"expected {cols_n} entries")
        out.append(tuple(_parse_atom(a, f"{path}[{i}][{j}]") for j, a in enumerate(row)))
    return tuple(out)


def _positive_int(doc, key, path="$"):
    v = _field(doc, key, path)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise FrameParseError(f"{path}.{key}", f"expected a positive integer, got {v!r}")
    return v


def frame_from_dict(doc) -> Frame:
    if not isinstance(doc, dict):
        raise FrameParseError("$", "top level must be an object")
    n = _positive_int(doc, "n")
    m = _positive_int(doc, "m")
    e_dim = _positive_int(doc, "e_dim")
    if e_dim < m:
        raise FrameParseError("$.e_dim", f"e_dim ({e_dim}) must be >= m ({m})")
    entries = _parse_entries(_field(doc, "entries", "$"), e_dim, m, "$.entries")
    left = None
    if "left_inverse" in doc:
        li = doc["left_inverse"]
        if not isinstance(li, dict):
            raise FrameParseError("$.left_inverse", "expected an object")
        left = Frame(_parse_entries(_field(li, "entries", "$.left_inverse"), m, e_dim, "$.left_inverse.entries"), n=n)
    return Frame(entries, n=n, left_inverse=left)


def parse_frame(text: str) -> Frame:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FrameParseError("$", f"malformed JSON: {exc}") from exc
    return frame_from_dict(doc)


def load_frame(path) -> Frame:
    with open(path) as fh:
        return parse_frame(fh.read())


def dump_frame(F: Frame) -> str:
    return json.dumps(F.to_json(), sort_keys=True)
