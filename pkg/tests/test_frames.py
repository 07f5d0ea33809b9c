import json

import numpy as np
import pytest

from bergsim.frames import (
    Blaschke,
    Frame,
    FrameParseError,
    Poly,
    PowerOneMinusZ,
    Product,
    Scale,
    Sum,
    constant,
    dump_frame,
    frame_bounds,
    frame_deriv,
    frame_eval,
    frame_taylor,
    identity_frame,
    load_frame,
    parse_frame,
    random_poly_frame,
)
from bergsim.potential import make_grid

from conftest import eps_blaschke, one_z

ATOMS = {
    "poly": Poly((0.3, -1 + 0.5j, 0.2j, 0.7)),
    "blaschke": Blaschke(0.4 - 0.3j),
    "power": PowerOneMinusZ(0.75),
    "power_neg": PowerOneMinusZ(-0.3),
    "scale": Scale(2 - 1j, Blaschke(0.2)),
    "sum": Sum((Poly((1, 2)), Blaschke(-0.5), PowerOneMinusZ(1.5))),
    "product": Product((Blaschke(0.5), PowerOneMinusZ(0.5), Poly((1, 0, 1j)))),
}


def random_points(rng, count, rmax=0.9):
    return rmax * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count))


def test_eval_examples():
    I = identity_frame(3)
    np.testing.assert_array_equal(frame_eval(I, 0.3 + 0.2j), np.eye(3))
    np.testing.assert_allclose(frame_eval(one_z(), 0.5), [[1], [0.5]])
    assert abs(Blaschke(0.5)(0.5)) == 0


def test_eval_outside_disk_raises():
    with pytest.raises(ValueError):
        frame_eval(one_z(), 1.0)


def test_vectorized_shape():
    z = np.zeros((4, 5), dtype=complex)
    assert one_z()(z).shape == (4, 5, 2, 1)


def test_deriv_examples():
    np.testing.assert_array_equal(frame_deriv(identity_frame(2), 0.4), np.zeros((2, 2)))
    np.testing.assert_allclose(frame_deriv(one_z(), 0.1 - 0.7j), [[0], [1]])
    a = 0.6 + 0.2j
    assert Blaschke(a).deriv(0) == pytest.approx(abs(a) ** 2 - 1, abs=1e-15)


@pytest.mark.parametrize("name", sorted(ATOMS))
def test_deriv_matches_central_difference(name, rng):
    atom, h = ATOMS[name], 1e-5
    z = random_points(rng, 100, 0.85)
    fd = (atom(z + h) - atom(z - h)) / (2 * h)
    assert np.max(np.abs(fd - atom.deriv(z))) <= 1e-7 * max(1.0, np.max(np.abs(atom.deriv(z))))


@pytest.mark.parametrize("name", sorted(ATOMS))
def test_cauchy_riemann(name, rng):
    atom, h = ATOMS[name], 1e-4
    z = random_points(rng, 50, 0.85)
    dx = (atom(z + h) - atom(z - h)) / (2 * h)
    dy = (atom(z + 1j * h) - atom(z - 1j * h)) / (2 * h)
    dbar = 0.5 * (dx + 1j * dy)
    assert np.max(np.abs(dbar)) <= 1e-6


def test_taylor_examples():
    np.testing.assert_allclose(Poly((1, 2, 3)).taylor(4), [1, 2, 3, 0, 0])
    np.testing.assert_allclose(Blaschke(0.5).taylor(2), [0.5, -0.75, -0.375])
    F = one_z()
    T = frame_taylor(F, 3)
    assert T.shape == (4, 2, 1)
    np.testing.assert_allclose(T[:, :, 0], [[1, 0], [0, 1], [0, 0], [0, 0]])


def test_taylor_tail_bound_blaschke():
    a, N = 0.7, 30
    coeffs = Blaschke(a).taylor(N)
    for z in (0.3, 0.9j, -0.85 + 0.2j):
        approx = np.polyval(coeffs[::-1], z)
        bound = (1 - a * a) * a**N * abs(z) ** (N + 1) / (1 - a * abs(z))
        assert abs(Blaschke(a)(z) - approx) <= bound * (1 + 1e-9) + 1e-15


@pytest.mark.parametrize("name", sorted(ATOMS))
def test_taylor_matches_evaluation(name):
    atom = ATOMS[name]
    c = atom.taylor(200)
    for z in (0.3, -0.2 + 0.25j):
        assert abs(np.polyval(c[::-1], z) - atom(z)) <= 1e-12


def test_blaschke_modulus():
    b = Blaschke(0.3 + 0.5j)
    rng = np.random.default_rng(0)
    assert np.all(np.abs(b(random_points(rng, 200, 0.999))) < 1)
    for eps in (1e-4, 1e-5, 1e-6):
        t = np.linspace(0, 2 * np.pi, 64)
        assert np.max(np.abs(1 - np.abs(b((1 - eps) * np.exp(1j * t))))) <= 10 * eps


def test_atom_validation():
    with pytest.raises(ValueError):
        Blaschke(1.0)
    with pytest.raises(ValueError):
        PowerOneMinusZ(-0.5)


def test_frame_bounds_examples():
    assert frame_bounds(identity_frame(2), make_grid(16, 16)).c == pytest.approx(1.0)
    fb = frame_bounds(one_z(), make_grid(128, 256, 1 - 1e-9))
    assert fb.c_low == pytest.approx(1.0, abs=1e-4)  # innermost node is not the origin
    assert fb.c_high == pytest.approx(2.0, abs=1e-6)
    assert fb.c == pytest.approx(2.0, abs=1e-6)
    for eps in (0.5, 0.1):
        pts = np.concatenate([[0.5], make_grid(32, 64).z])
        fb = frame_bounds(eps_blaschke(eps), pts)
        assert fb.c_low == pytest.approx(eps**2, rel=1e-12)
        assert fb.worst_node == 0.5
        assert fb.c == pytest.approx(eps**-2, rel=1e-12)


def test_frame_bounds_flags_rank_deficiency():
    F = Frame([[Poly((0, 1))]])
    fb = frame_bounds(F, np.array([0.5, 0.0, 0.3]))
    assert fb.rank_deficient and fb.c == float("inf") and fb.worst_node == 0


def test_json_identity_document():
    doc = {"n": 2, "m": 2, "e_dim": 2, "entries": [[{"type": "poly", "coeffs": [[1, 0]]}, {"type": "poly", "coeffs": [0]}],
                                                  [{"type": "poly", "coeffs": [0]}, {"type": "poly", "coeffs": [1]}]]}
    F = parse_frame(json.dumps(doc))
    assert F.m == F.e_dim == 2 and F.n == 2
    np.testing.assert_array_equal(F(0.2j), np.eye(2))


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"n": 1, "m": 1, "e_dim": 1, "entries": [[{"type": "blaschke", "a": [1.5, 0]}]]}, "$.entries[0][0].a"),
        ({"n": 1, "m": 2, "e_dim": 1, "entries": [[{"type": "poly", "coeffs": [1]}] * 2]}, "$.e_dim"),
        ({"n": 1, "m": 1, "e_dim": 1, "entries": [[{"type": "exp"}]]}, "$.entries[0][0].type"),
        ({"n": 0, "m": 1, "e_dim": 1, "entries": []}, "$.n"),
        (
            {"n": 1, "m": 1, "e_dim": 1,
             "entries": [[{"type": "sum", "terms": [{"type": "poly", "coeffs": [1]}, {"type": "blaschke", "a": 2}]}]]},
            "$.entries[0][0].terms[1].a",
        ),
    ],
)
def test_json_errors_name_path(doc, path):
    with pytest.raises(FrameParseError) as err:
        parse_frame(json.dumps(doc))
    assert err.value.path == path


def test_json_malformed():
    with pytest.raises(FrameParseError):
        parse_frame("{not json")


def test_json_round_trip(tmp_path, rng):
    F = Frame(
        [[ATOMS["sum"], ATOMS["scale"]], [ATOMS["product"], ATOMS["power"]], [constant(1), ATOMS["blaschke"]]],
        n=3,
        left_inverse=None,
    )
    path = tmp_path / "f.json"
    path.write_text(dump_frame(F))
    G = load_frame(path)
    H = parse_frame(dump_frame(G))
    z = random_points(rng, 10)
    np.testing.assert_array_equal(F(z), G(z))
    np.testing.assert_array_equal(G(z), H(z))
    assert dump_frame(G) == dump_frame(H)


def test_left_inverse_round_trip():
    F = Frame([[constant(1)], [Poly((0, 1))]], n=2, left_inverse=Frame([[constant(1), constant(0)]]))
    G = parse_frame(dump_frame(F))
    assert G.left_inverse is not None
    np.testing.assert_allclose(G.left_inverse(0.3) @ G(0.3), [[1]])


def test_random_poly_frame_full_rank(rng):
    F = random_poly_frame(rng, 3, 2, 3)
    z = random_points(rng, 200, 0.999)
    ev = np.linalg.eigvalsh(np.swapaxes(F(z).conj(), -1, -2) @ F(z))
    assert ev.min() > 0.1
