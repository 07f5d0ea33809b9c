import json
import math

import numpy as np
import pytest

from bergsim.bundle_geometry import curvature_defect, projection_from_frame
from bergsim.frames import Frame, Poly, Scale, constant, identity_frame, random_poly_frame
from bergsim.similarity import (
    FrameUnsuitableError,
    LeftInverseError,
    NotAContractionError,
    ReportConfig,
    assemble_report,
    canonical_intertwiner,
    corollary22_check,
    eigenvector_residual,
    intertwiner_sweep,
    model_operator,
    power_decay_check,
)
from bergsim.space_core import SpaceParams, backward_shift, forward_shift, kernel_vector

from conftest import eps_blaschke, one_z

FAST = ReportConfig(degrees=(20, 40), grid_nr=64, grid_ntheta=64, bounds_nr=32, bounds_ntheta=64, hyper_degree=20)


def scaled(F, c):
    return Frame(tuple(tuple(Scale(c, a) for a in row) for row in F.entries), n=F.n)


def test_canonical_intertwiner_examples():
    p = SpaceParams(2, 15, 2)
    np.testing.assert_allclose(canonical_intertwiner(identity_frame(2), p), np.eye(32))
    A = canonical_intertwiner(scaled(identity_frame(2), 2.0), p)
    np.testing.assert_allclose(A, 2 * np.eye(32))
    s = np.linalg.svd(A, compute_uv=False)
    assert s[0] / s[-1] == pytest.approx(1.0)


def test_eigenvector_residual_one_z():
    assert eigenvector_residual(one_z(), SpaceParams(2, 60, 1), 0.3) <= 1e-12


def test_intertwining_exact(rng):
    F = random_poly_frame(rng, 3, 2, 3, n=2)
    p = SpaceParams(2, 30, 2)
    A = canonical_intertwiner(F, p)
    lhs = backward_shift(p.with_fiber(3)) @ A
    rhs = A @ backward_shift(p)
    rows = slice(0, (30 - 3 + 1) * 3)
    assert np.max(np.abs(lhs - rhs)[rows]) <= 1e-12


def test_bundle_map_norm_ratio(rng):
    # ||A v|| / ||v|| at eigenvectors lies between the extremal singular values of F(lam)
    F = random_poly_frame(rng, 3, 2, 2, n=2)
    p = SpaceParams(2, 150, 2)
    A = canonical_intertwiner(F, p)
    for lam in (0.2, -0.3 + 0.4j):
        k = kernel_vector(p.with_fiber(1), lam)
        s = np.linalg.svd(F(lam), compute_uv=False)
        for e in np.eye(2):
            v = np.kron(k, e)
            ratio = np.linalg.norm(A @ v) / np.linalg.norm(v)
            assert s[-1] - 1e-8 <= ratio <= s[0] + 1e-8


def test_model_operator_identity():
    p = SpaceParams(2, 12, 2)
    T = model_operator(identity_frame(2, 2), p)
    assert T.invariance_residual <= 1e-14
    np.testing.assert_allclose(np.abs(np.linalg.eigvals(T.matrix)), 0, atol=1e-3)
    # same operator up to the basis permutation chosen by pivoting
    M = T.basis @ T.matrix @ T.basis.conj().T
    np.testing.assert_allclose(M, backward_shift(p), atol=1e-14)
    assert np.all(np.linalg.matrix_power(T.matrix, 13) == 0) or np.allclose(np.linalg.matrix_power(T.matrix, 13), 0)


def test_model_operator_invariance_and_eigenvectors(rng):
    F = random_poly_frame(rng, 3, 2, 3, n=2)
    p = SpaceParams(2, 120, 2)
    T = model_operator(F, p)
    assert T.invariance_residual <= 1e-10
    q = p.with_fiber(1)
    for lam in (0.5, 0.3j, -0.2 - 0.35j):
        v = np.kron(kernel_vector(q, lam), F(lam) @ np.array([1.0, 1j]))
        v /= np.linalg.norm(v)
        y = T.coords(v)
        assert np.linalg.norm(T.embed(y) - v) <= 1e-10
        assert np.linalg.norm(T.matrix @ y - lam * y) <= 1e-6


def test_model_operator_rejects_collapsed_frame():
    F = Frame([[constant(1), constant(1)], [Poly((0, 1)), Poly((0, 1))]])
    with pytest.raises(FrameUnsuitableError):
        model_operator(F, SpaceParams(1, 10, 2))


def test_power_decay(rng):
    F = random_poly_frame(rng, 3, 1, 2, n=2)
    p = SpaceParams(2, 30, 1)
    T = model_operator(F, p)
    k = np.kron(kernel_vector(p, 0.5), F(0.5)[:, 0])
    h_kernel = T.coords(k)
    h_rand = rng.standard_normal(T.matrix.shape[0])
    table = power_decay_check(T, [h_kernel, h_rand], 31)
    for row in table:
        assert all(b <= a * (1 + 1e-12) for a, b in zip(row, row[1:]))
        assert row[-1] <= 1e-12 * row[0]
    assert table[0][1] == pytest.approx(0.5 * table[0][0], rel=1e-6)
    with pytest.raises(ValueError):
        power_decay_check(T, [h_rand], 0)


def test_intertwiner_sweep_examples():
    rep = intertwiner_sweep(identity_frame(2, 2), SpaceParams(2, 10, 2), [10, 20, 40])
    assert rep.condition == pytest.approx([1.0, 1.0, 1.0])
    assert rep.stabilized
    rep = intertwiner_sweep(one_z(), SpaceParams(2, 10, 1), [50, 100, 200])
    assert rep.stabilized
    assert rep.condition[-1] <= math.sqrt(2) * 1.01
    with pytest.raises(ValueError):
        intertwiner_sweep(one_z(), SpaceParams(2, 10, 1), [100, 50])


def test_intertwiner_condition_monotone_in_eps():
    conds = [intertwiner_sweep(eps_blaschke(e), SpaceParams(2, 10, 1), [100]).condition[0] for e in (0.5, 0.1, 0.02)]
    assert conds[0] < conds[1] < conds[2]


def test_left_inverse_certificate():
    G = Frame([[constant(1), constant(0)]])
    F = Frame([[constant(1)], [Poly((0, 1))]], n=2, left_inverse=G)
    rep = intertwiner_sweep(F, SpaceParams(2, 10, 1), [20, 40])
    assert max(rep.left_inverse_residual) <= 1e-12
    assert rep.left_inverse_norm == pytest.approx([1.0, 1.0])
    bad = Frame([[constant(2), constant(0)]])
    with pytest.raises(LeftInverseError):
        intertwiner_sweep(F, SpaceParams(2, 10, 1), [20], left_inverse=bad)
    with pytest.raises(LeftInverseError):
        intertwiner_sweep(F, SpaceParams(2, 10, 1), [20], left_inverse=identity_frame(2))


def test_scale_invariance(rng):
    F = random_poly_frame(rng, 3, 2, 2, n=2)
    c = 3.0 - 4.0j
    G = scaled(F, c)
    z = 0.4 - 0.1j
    assert curvature_defect(G, z) == pytest.approx(curvature_defect(F, z), rel=1e-10)
    np.testing.assert_allclose(projection_from_frame(G, z).proj, projection_from_frame(F, z).proj, atol=1e-12)
    rf = intertwiner_sweep(F, SpaceParams(2, 10, 2), [40])
    rg = intertwiner_sweep(G, SpaceParams(2, 10, 2), [40])
    assert rg.condition[0] == pytest.approx(rf.condition[0], rel=1e-10)
    assert rg.sigma_max[0] == pytest.approx(abs(c) * rf.sigma_max[0], rel=1e-10)


def test_corollary22_examples(rng):
    T = model_operator(random_poly_frame(rng, 3, 2, 2, n=2), SpaceParams(2, 40, 2))
    rep = corollary22_check(T, 2)
    assert rep.level_n_psd and rep.lower_levels_psd and rep.consistent
    assert corollary22_check(backward_shift(SpaceParams(1, 40)), 1).level_n_psd
    rep = corollary22_check(forward_shift(SpaceParams(2, 40)) / math.sqrt(2), 2)
    assert rep.level_n_psd and rep.lower_levels_psd
    with pytest.raises(NotAContractionError):
        corollary22_check(2 * np.eye(3), 1)


def test_unscaled_truncated_forward_shift_edge_artifact():
    # S e_{N-1} != 0 but S^2 e_{N-1} = 0 on the truncation, so level 2 fails there
    rep = corollary22_check(forward_shift(SpaceParams(2, 40)), 2)
    assert rep.lower_levels_psd and not rep.level_n_psd
    assert rep.consistent


def test_report_identity_all_pass():
    rep = assemble_report(identity_frame(2, 2), SpaceParams(2, 40, 2), FAST)
    doc = rep.to_dict()
    assert rep.verdict == "pass"
    assert all(s["flag"] == "pass" for s in doc["verdict"]["statements"].values())
    assert doc["frame_bounds"]["c"] == pytest.approx(1.0)
    assert doc["defect"]["sup"] == 0
    json.dumps(doc, allow_nan=False)


def test_report_records_section_errors():
    F = Frame([[constant(0)], [constant(0)]], n=1)
    rep = assemble_report(F, SpaceParams(1, 40, 1), FAST)
    doc = rep.to_dict()
    assert doc["frame_bounds"]["rank_deficient"] and doc["frame_bounds"]["c"] == "inf"
    assert "error" in doc["hypercontraction"]
    assert rep.verdict == "fail"
    json.dumps(doc, allow_nan=False)
