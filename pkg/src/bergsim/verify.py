"""Built-in identity suite: kernel norms, Toeplitz algebra and the bundle identities.

Every check returns ``{"name", "max_residual", "tolerance", "pass"}``. The
``order_offset`` hook builds the numerical side with order n + offset while the
closed forms keep n; it exists so the suite can be shown to catch a wrong
weight.
"""

from __future__ import annotations

import numpy as np

from . import bundle_geometry as bg
from .frames import random_poly_frame
from .space_core import (
    SpaceParams,
    VectorFunctionCoeffs,
    backward_shift,
    deriv_kernel_inner,
    deriv_kernel_norm_sq,
    deriv_kernel_vector,
    is_k_hypercontraction,
    kernel_norm_sq,
    kernel_vector,
    toeplitz_analytic,
    toeplitz_coanalytic,
)


def _check(name, residual, tol, **extra):
    residual = float(residual)
    return {"name": name, "max_residual": residual, "tolerance": tol, "pass": bool(residual <= tol), **extra}


def random_disk_points(rng, count, rmax):
    return rmax * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))


def _cgauss(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def kernel_identities(rng, orders=(1, 2, 3, 5), N=300, rmax=0.7, count=20, offset=0):
    worst = 0.0
    for n in orders:
        p = SpaceParams(n, N)
        q = SpaceParams(n + offset, N)
        for lam in random_disk_points(rng, count, rmax):
            k, dk = kernel_vector(q, lam), deriv_kernel_vector(q, lam)
            r2 = 1 - abs(lam) ** 2
            mixed = -n * np.conj(lam) * k + r2 * dk
            errs = [
                abs(np.vdot(k, k).real - kernel_norm_sq(p, lam)) / kernel_norm_sq(p, lam),
                abs(np.vdot(dk, dk).real - deriv_kernel_norm_sq(p, lam)) / deriv_kernel_norm_sq(p, lam),
                abs(np.vdot(k, dk) - deriv_kernel_inner(p, lam)) / kernel_norm_sq(p, lam) ** (1 + 1 / n),
                abs(np.vdot(mixed, mixed).real - n * r2 ** (-n)) / (n * r2 ** (-n)),
            ]
            worst = max(worst, *errs)
    return _check("kernel identities", worst, 1e-10, N=N, rmax=rmax)


def reproducing_property(rng, orders=(1, 2, 3, 4, 5), N=12, count=20, offset=0):
    worst = 0.0
    for n in orders:
        q = SpaceParams(n + offset, N)
        for lam in random_disk_points(rng, count, 0.95):
            f = VectorFunctionCoeffs(_cgauss(rng, N + 1))
            x = f.to_basis(q)
            val = np.vdot(kernel_vector(q, lam), x)  # <f, k_{conj lam}> = f(conj lam)
            dval = np.vdot(deriv_kernel_vector(q, lam), x)
            fp = VectorFunctionCoeffs(f.coeffs[1:, 0] * np.arange(1, N + 1))
            v, dv = f(np.conj(lam))[0], fp(np.conj(lam))[0]
            worst = max(worst, abs(val - v) / max(1.0, abs(v)), abs(dval - dv) / max(1.0, abs(dv)))
    return _check("reproducing property", worst, 1e-12, N=N)


def toeplitz_identities(rng, orders=(1, 2, 3), N=30, offset=0):
    worst = 0.0
    for n in orders:
        p = SpaceParams(n + offset, N)
        dF, dG = 4, 5
        Fc = _cgauss(rng, (dF + 1, 2, 3))
        Gc = _cgauss(rng, (dG + 1, 3, 2))
        FG = np.zeros((dF + dG + 1, 2, 2), dtype=complex)
        for a in range(dF + 1):
            for b in range(dG + 1):
                FG[a + b] += Fc[a] @ Gc[b]
        prod = toeplitz_analytic(Fc, p.with_fiber(3)) @ toeplitz_analytic(Gc, p.with_fiber(2))
        worst = max(worst, np.max(np.abs(toeplitz_analytic(FG, p.with_fiber(2)) - prod)) / np.max(np.abs(prod)))
        # co-analytic eigenvector action, exact on degrees <= N - deg
        pn = SpaceParams(n, N)
        for lam in random_disk_points(rng, 5, 0.9):
            k = kernel_vector(p.with_fiber(1), lam)
            e = _cgauss(rng, 2)
            A = toeplitz_coanalytic(Gc, p.with_fiber(2))
            Glam = sum(Gc[j] * lam**j for j in range(dG + 1))
            lhs = (A @ np.kron(k, e))[: (N - dG + 1) * 3]
            rhs = np.kron(k, Glam @ e)[: (N - dG + 1) * 3]
            worst = max(worst, np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))
            # adjoint of analytic Toeplitz on kernels: T_F^* k_{lam} e = k_{lam} F(lam)^* e
            kl = kernel_vector(pn, np.conj(lam))  # coordinates of k_lam
            e2 = _cgauss(rng, 2)
            B = toeplitz_analytic(Fc, p.with_fiber(3)).conj().T
            Flam = sum(Fc[j] * lam**j for j in range(dF + 1))
            lhs = (B @ np.kron(kl, e2))[: (N - dF + 1) * 3]
            rhs = np.kron(kl, Flam.conj().T @ e2)[: (N - dF + 1) * 3]
            worst = max(worst, np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))
    return _check("toeplitz identities", worst, 1e-12, N=N)


def projection_identities(rng, frames=20, points=20):
    worst = 0.0
    for _ in range(frames):
        F = random_poly_frame(rng, 3, 2, 3)
        for z in random_disk_points(rng, points, 0.95):
            worst = max(worst, *bg.lemma31_check(F, z))
    return _check("projection identities", worst, 1e-10)


def shift_bundle_curvature(rng, orders=(1, 2, 3, 5), count=40, N=200, rmax=0.9, offset=0):
    worst = 0.0
    for n in orders:
        q = SpaceParams(n + offset, N)
        for lam in random_disk_points(rng, count, rmax):
            hs = bg.shift_bundle_projection(q, lam, tail_tol=np.inf).hs_sq
            exact = n / (1 - abs(lam) ** 2) ** 2
            worst = max(worst, abs(hs - exact) / exact)
    return _check("shift bundle curvature", worst, 1e-6, N=N, rmax=rmax)


def tensor_split(rng, frames=10, orders=(1, 2), N=150):
    worst = 0.0
    for k in range(frames):
        F = random_poly_frame(rng, 3, 2, 2)
        n = orders[k % len(orders)]
        lam = random_disk_points(rng, 1, 0.6)[0]
        worst = max(worst, bg.tensor_split_check(F, SpaceParams(n, N), lam).residual)
    return _check("tensor split", worst, 1e-8, N=N)


def hypercontraction_suite(orders=(1, 2, 3), N=120, offset=0):
    worst = 0.0
    for n in orders:
        res = is_k_hypercontraction(backward_shift(SpaceParams(n + offset, N)), n, tol=0.0)
        worst = max(worst, -min(res.min_eigenvalues))
    return _check("backward shift is an n-hypercontraction", max(worst, 0.0), 1e-10, N=N)


def run_lemma_suite(seed: int = 0, order_offset: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    checks = [
        kernel_identities(rng, offset=order_offset),
        reproducing_property(rng, offset=order_offset),
        toeplitz_identities(rng, offset=order_offset),
        projection_identities(rng),
        shift_bundle_curvature(rng, offset=order_offset),
        tensor_split(rng),
        hypercontraction_suite(offset=order_offset),
    ]
    return {"seed": seed, "checks": checks, "pass": all(c["pass"] for c in checks)}

