from fractions import Fraction

import numpy as np
import pytest

from g2lab.octo_algebra import (
    ImOcton,
    cayley_dickson_extend,
    cross,
    cross_array,
    g2_form,
    g2_signed_permutations,
    implied_by_antisymmetry,
    inner,
    preserves_omega,
    star_omega,
    star_omega_array,
    tau,
    tau_array,
    tau_formula,
    tau_table,
    tau_table_errata,
    tau_table_printed,
    verify_tables,
)


def e(i: int) -> ImOcton:
    return ImOcton.basis(i)


def random_octon(rng: np.random.Generator) -> ImOcton:
    return ImOcton(tuple(Fraction(int(x), 3) for x in rng.integers(-5, 6, size=7)))


@pytest.mark.parametrize(
    ("i", "j", "k"),
    [(1, 2, 3), (4, 5, 1), (1, 4, 5), (2, 4, 6), (3, 4, 7)],
)
def test_cross_of_basis_vectors(i: int, j: int, k: int) -> None:
    assert cross(e(i), e(j)) == e(k)
    assert cross(e(j), e(i)) == -e(k)


def test_g2_form_is_alternating(rng: np.random.Generator) -> None:
    u, v, w = (random_octon(rng) for _ in range(3))
    assert g2_form(u, v, w) == g2_form(v, w, u)
    assert g2_form(u, v, w) == -g2_form(v, u, w)
    assert g2_form(u, u, w) == 0


def test_cross_satisfies_norm_identity(rng: np.random.Generator) -> None:
    u, v = rng.normal(size=(2, 10_000, 7))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    w = cross_array(u, v)
    dots = np.einsum("ni,ni->n", u, v)
    np.testing.assert_allclose(np.einsum("ni,ni->n", w, u), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("ni,ni->n", w, v), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("ni,ni->n", w, w), 1.0 - dots**2, atol=1e-12)


@pytest.mark.parametrize(
    ("triple", "expected"),
    [((1, 2, 4), e(7)), ((1, 2, 6), e(5)), ((1, 2, 5), -e(6)), ((1, 2, 3), ImOcton.zero())],
)
def test_tau_on_basis(triple: tuple[int, int, int], expected: ImOcton) -> None:
    assert tau(*(e(i) for i in triple)) == expected


def test_tau_is_alternating_off_orthonormal_input(rng: np.random.Generator) -> None:
    u, v, w = (random_octon(rng) for _ in range(3))
    assert tau(u, v, w) == -tau(v, u, w)
    assert tau(u, v, w) == tau(v, w, u)
    assert tau(u, u, w) == ImOcton.zero()


def test_tau_formula_matches_trilinear_extension_on_orthonormal_triples() -> None:
    for triple in [(1, 2, 4), (3, 5, 7), (2, 6, 7)]:
        vectors = [e(i) for i in triple]
        assert tau_formula(*vectors) == tau(*vectors)


def test_star_omega_pairs_with_tau(rng: np.random.Generator) -> None:
    u, v, w, z = (random_octon(rng) for _ in range(4))
    assert star_omega(u, v, w, z) == inner(tau(u, v, w), z)


def test_array_routines_match_exact_ones(rng: np.random.Generator) -> None:
    u, v, w, z = (random_octon(rng) for _ in range(4))
    arrays = [x.to_array() for x in (u, v, w, z)]
    np.testing.assert_allclose(cross_array(*arrays[:2]), cross(u, v).to_array(), atol=1e-12)
    np.testing.assert_allclose(tau_array(*arrays[:3]), tau(u, v, w).to_array(), atol=1e-12)
    assert float(star_omega_array(*arrays)) == pytest.approx(float(star_omega(u, v, w, z)))


async def test_verify_tables_passes() -> None:
    checks = verify_tables()
    assert [check.name for check in checks] == [
        "omega-table",
        "tau-table",
        "cross-axioms",
        "star-omega",
    ]
    assert [check.items for check in checks] == [35, 35, 49, 35]
    assert all(check.passed for check in checks)
    assert all(check.max_residual == 0 for check in checks)


def test_verify_tables_names_corrupted_entry() -> None:
    table = tau_table().with_entry((1, 2, 4, 7), -1)
    checks = {check.name: check for check in verify_tables(table)}
    assert not checks["tau-table"].passed
    assert checks["tau-table"].offending == "tau(1,2,4; alpha=7)"
    assert checks["tau-table"].max_residual == 2
    assert checks["omega-table"].passed


def test_printed_table_fails_the_self_check() -> None:
    checks = {check.name: check for check in verify_tables(tau_table_printed())}
    assert not checks["tau-table"].passed


def test_errata_are_forced_by_antisymmetry() -> None:
    printed = tau_table_printed()
    errata = tau_table_errata()
    assert set(errata) == {(3, 5, 7, 1), (1, 5, 6, 2), (1, 4, 7, 2)}
    for key, (was, corrected) in errata.items():
        assert was == -corrected
        assert implied_by_antisymmetry(printed, key) == [corrected] * 3


def test_four_form_of_corrected_table_is_alternating() -> None:
    table = tau_table()
    for key in table.coeff:
        assert implied_by_antisymmetry(table, key) == [table.coeff[key]] * 3


def test_cayley_dickson_extension_of_standard_seed_is_identity() -> None:
    unit = np.eye(7)
    frame = cayley_dickson_extend(unit[0], unit[1], unit[3])
    np.testing.assert_array_equal(frame, unit)


async def test_signed_permutation_subgroup() -> None:
    matrices = g2_signed_permutations()
    assert len(matrices) == 1344
    assert all(preserves_omega(m) for m in matrices[:: 97])
    assert len({m.tobytes() for m in matrices}) == 1344


def test_signed_permutations_preserve_tau() -> None:
    matrix = g2_signed_permutations()[123]
    unit = np.eye(7)
    for i, j, k in [(0, 1, 3), (2, 4, 6)]:
        moved = tau_array(matrix @ unit[i], matrix @ unit[j], matrix @ unit[k])
        np.testing.assert_allclose(moved, matrix @ tau_array(unit[i], unit[j], unit[k]))


def test_basis_index_is_validated() -> None:
    with pytest.raises(ValueError):
        ImOcton.basis(0)
    with pytest.raises(ValueError):
        ImOcton((1, 2, 3))


@pytest.mark.parametrize(("triple", "expected"), [((1, 2, 3), 1), ((1, 6, 7), -1), ((1, 5, 4), -1)])
def test_g2_form_matches_coordinate_table(triple: tuple[int, int, int], expected: int) -> None:
    assert g2_form(*(e(i) for i in triple)) == expected


def test_tau_table_entries() -> None:
    table = tau_table()
    assert table.value(2, 5, 6, 1) == 1
    assert table.value(1, 2, 4, 7) == 1
    assert all(table.value(1, 2, 3, alpha) == 0 for alpha in range(1, 8))


def test_star_omega_vanishes_on_associative_directions() -> None:
    assert star_omega(e(1), e(2), e(3), e(4)) == 0
    assert star_omega(e(4), e(5), e(6), e(7)) == inner(tau(e(4), e(5), e(6)), e(7))
    assert star_omega(e(4), e(4), e(6), e(7)) == 0


def test_star_omega_pairs_with_tau_on_random_floats(rng: np.random.Generator) -> None:
    u, v, w, z = rng.normal(size=(4, 1000, 7))
    paired = np.einsum("ni,ni->n", tau_array(u, v, w), z)
    np.testing.assert_allclose(star_omega_array(u, v, w, z), paired, atol=1e-12)
