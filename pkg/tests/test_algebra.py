"""Algebra descriptors: axioms, norms, star, serialization, rejection paths."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from derivstab import (
    SPECTRAL,
    WEIGHTED_L1,
    AlgebraDescriptor,
    AlgebraError,
    Element,
    add,
    adjoint,
    algebra_from_json,
    algebra_to_json,
    coords_from_pairs,
    coords_to_pairs,
    embed,
    make_matrix_algebra,
    make_self_bimodule,
    mul,
    norm,
    scale,
    sub,
    vector_norm,
)

GOLDEN_RATIO = 1.6180339887498949


def coords_strategy(dim, scale_bound=1e3):
    number = st.floats(min_value=-scale_bound, max_value=scale_bound,
                       allow_nan=False, allow_infinity=False, width=64)
    pair = st.tuples(number, number).map(lambda t: complex(t[0], t[1]))
    return st.lists(pair, min_size=dim, max_size=dim)


def test_matrix_unit_products_are_exact(m2, m3):
    # e_ij e_kl = delta_jk e_il, exhaustively in the row-major unit basis.
    for alg in (m2, m3):
        n = alg.matrix_size
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        left = alg.basis_element(i * n + j)
                        right = alg.basis_element(k * n + l)
                        prod = mul(left, right)
                        expected = np.zeros(alg.dim, dtype=complex)
                        if j == k:
                            expected[i * n + l] = 1.0
                        assert np.array_equal(prod.coords, expected)


def test_unit_element_is_exact_identity(m2, quaternion):
    rng = np.random.default_rng(7)
    for alg in (m2, quaternion):
        a = alg.element(rng.standard_normal(alg.dim)
                        + 1j * rng.standard_normal(alg.dim))
        assert np.array_equal(mul(alg.one(), a).coords, a.coords)
        assert np.array_equal(mul(a, alg.one()).coords, a.coords)


def test_golden_norm_values(m2, quaternion):
    assert norm(m2.element([1.0, 1.0, 0.0, 1.0])) == pytest.approx(
        GOLDEN_RATIO, rel=5e-12)
    assert norm(m2.one()) == pytest.approx(1.0, rel=1e-12)
    assert norm(m2.element([2.0, 0.0, 0.0, -2.0])) == pytest.approx(2.0, rel=1e-12)
    # Weighted l1 with unit weights is the plain coordinate l1 norm.
    assert norm(quaternion.element([1.0, 1.0, 1.0, 1.0])) == 4.0
    assert norm(quaternion.element([1.0, 2.0j, 0.0, -3.0])) == 6.0


def test_cstar_identity_for_spectral_norm(m2, m3):
    rng = np.random.default_rng(11)
    for alg in (m2, m3):
        for _ in range(50):
            a = alg.element(rng.standard_normal(alg.dim)
                            + 1j * rng.standard_normal(alg.dim))
            lhs = norm(mul(adjoint(a), a))
            assert lhs == pytest.approx(norm(a) ** 2, rel=1e-10)


def test_adjoint_is_conjugate_linear_antihomomorphism(m2):
    rng = np.random.default_rng(13)
    for _ in range(50):
        a = m2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        b = m2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        lam = complex(rng.standard_normal(), rng.standard_normal())
        assert np.array_equal(adjoint(adjoint(a)).coords, a.coords)
        assert np.allclose(adjoint(mul(a, b)).coords,
                           mul(adjoint(b), adjoint(a)).coords, atol=1e-12)
        assert np.allclose(adjoint(scale(lam, a)).coords,
                           scale(np.conj(lam), adjoint(a)).coords, atol=1e-14)
        assert norm(adjoint(a)) == pytest.approx(norm(a), rel=1e-10)


@given(coords=coords_strategy(4), lam_re=st.floats(-100, 100, width=64),
       lam_im=st.floats(-100, 100, width=64))
def test_norm_homogeneity_and_definiteness(coords, lam_re, lam_im):
    alg = make_matrix_algebra(2)
    a = alg.element(coords)
    lam = complex(lam_re, lam_im)
    assert norm(a) >= 0.0
    assert (norm(a) == 0.0) == (not np.any(a.coords))
    assert norm(scale(lam, a)) == pytest.approx(abs(lam) * norm(a),
                                                rel=1e-11, abs=1e-12)


@given(u=coords_strategy(4), v=coords_strategy(4))
def test_norm_triangle_and_submultiplicative(u, v):
    alg = make_matrix_algebra(2)
    a, b = alg.element(u), alg.element(v)
    slack = 1e-11 * (1.0 + norm(a) + norm(b) + norm(a) * norm(b))
    assert norm(add(a, b)) <= norm(a) + norm(b) + slack
    assert norm(mul(a, b)) <= norm(a) * norm(b) + slack
    assert norm(sub(a, a)) == 0.0


@given(u=coords_strategy(4, 10.0), v=coords_strategy(4, 10.0))
def test_weighted_l1_is_submultiplicative(quaternion, u, v):
    a, b = quaternion.element(u), quaternion.element(v)
    slack = 1e-11 * (1.0 + norm(a) * norm(b))
    assert norm(mul(a, b)) <= norm(a) * norm(b) + slack


def test_bimodule_actions_match_products(m2):
    bimod = make_self_bimodule(m2)
    rng = np.random.default_rng(17)
    from derivstab import act_left, act_right
    for _ in range(30):
        a = m2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        b = m2.element(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        assert np.allclose(act_left(a, embed(bimod, b)).coords,
                           mul(a, b).coords, atol=1e-13)
        assert np.allclose(act_right(embed(bimod, a), b).coords,
                           mul(a, b).coords, atol=1e-13)
        assert vector_norm(bimod, a.coords) == norm(a)


def test_json_round_trip_preserves_digest(m2, m3, quaternion):
    for alg in (m2, m3, quaternion):
        back = algebra_from_json(algebra_to_json(alg))
        assert back.digest == alg.digest
        assert np.array_equal(back.structure, alg.structure)


def test_json_round_trip_is_bit_exact_for_awkward_floats():
    # Scale the quaternion weights by decimals that are not dyadic.
    c = np.zeros((1, 1, 1), dtype=complex)
    c[0, 0, 0] = 1.0
    alg = AlgebraDescriptor(dim=1, structure=c, unit_coords=[1.0],
                            norm_kind=WEIGHTED_L1, weights=[1.1 + 1.0 / 3.0])
    back = algebra_from_json(algebra_to_json(alg))
    assert back.digest == alg.digest
    assert back.weights[0] == alg.weights[0]


def test_digest_is_frozen(m2):
    assert m2.digest == (
        "28a05821f27f3b1b83f25592f901506effa95e8643e458a35b93dba57a740cfc")


def test_coords_pairs_round_trip_bitwise():
    values = np.array([0.0, -0.0, 1e-320, -1e300, 0.1, 1 / 3], dtype=float)
    coords = (values + 1j * values[::-1]).astype(complex)
    back = coords_from_pairs(coords_to_pairs(coords), "coords")
    assert np.array_equal(back.view(np.uint64), coords.view(np.uint64))


def test_rejects_bad_descriptors(quaternion):
    good = np.zeros((1, 1, 1), dtype=complex)
    good[0, 0, 0] = 1.0
    with pytest.raises(AlgebraError):   # spectral dim must be a perfect square
        AlgebraDescriptor(dim=3, structure=np.zeros((3, 3, 3)),
                          unit_coords=[1, 0, 0], norm_kind=SPECTRAL)
    with pytest.raises(AlgebraError):   # unknown norm kind
        AlgebraDescriptor(dim=1, structure=good, unit_coords=[1.0],
                          norm_kind="euclidean")
    with pytest.raises(AlgebraError):   # weights required for weighted_l1
        AlgebraDescriptor(dim=1, structure=good, unit_coords=[1.0],
                          norm_kind=WEIGHTED_L1)
    with pytest.raises(AlgebraError):   # weights that break submultiplicativity
        AlgebraDescriptor(dim=4, structure=quaternion.structure,
                          unit_coords=[1, 0, 0, 0], norm_kind=WEIGHTED_L1,
                          weights=[1.0, 1.0, 1.0, 0.25])
    with pytest.raises(AlgebraError):   # involution only on the spectral kind
        AlgebraDescriptor(dim=4, structure=quaternion.structure,
                          unit_coords=[1, 0, 0, 0], norm_kind=WEIGHTED_L1,
                          weights=[1.0, 1.0, 1.0, 1.0],
                          involution=np.eye(4, dtype=complex))
    bad_unit = np.zeros((1, 1, 1), dtype=complex)
    bad_unit[0, 0, 0] = 2.0
    with pytest.raises(AlgebraError):   # declared unit fails 1*1 = 1
        AlgebraDescriptor(dim=1, structure=bad_unit, unit_coords=[1.0],
                          norm_kind=WEIGHTED_L1, weights=[1.0])


def test_rejects_bad_elements_and_mixed_algebras(m2, m3):
    with pytest.raises(AlgebraError):
        m2.element([1.0, 2.0])          # wrong length
    with pytest.raises(AlgebraError):
        m2.element([np.nan, 0, 0, 0])   # non-finite coordinate
    a = m2.element([1, 0, 0, 0])
    b = m3.element([1, 0, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(AlgebraError):
        mul(a, b)
    with pytest.raises(AlgebraError):
        add(a, b)


def test_matrix_algebra_size_limits():
    with pytest.raises(AlgebraError):
        make_matrix_algebra(0)
    with pytest.raises(AlgebraError):
        make_matrix_algebra(9)
    assert make_matrix_algebra(8).dim == 64


def test_element_coords_are_read_only(m2):
    a = m2.element([1, 0, 0, 0])
    with pytest.raises(ValueError):
        a.coords[0] = 2.0
