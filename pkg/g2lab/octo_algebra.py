"""Exact arithmetic on the imaginary octonions.

Im O is split as Im H (+) H with basis e1..e3 = (i, j, k) in Im H and
e4..e7 = (1, i, j, k) in H. Products come from the Cayley-Dickson rule

    (a, b)(c, d) = (ac - d*b, da + bc*)

and everything else (the G2 form, the associator form, the dual 4-form)
is derived from it. Exact routines accept ints and Fractions; the ``*_array``
routines are their vectorized float counterparts.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

import numpy as np
import numpy.typing as npt

Number = Union[int, Fraction, float]
Quaternion = tuple[Number, Number, Number, Number]
Triple = tuple[int, int, int]
TauKey = tuple[int, int, int, int]

DIMENSION = 7

# Sign of e1^...^e7 used by the Hodge star. The positive choice gives
# *Omega = -g(tau(u, v, w), z) with this basis, so the volume form is negated.
ORIENTATION = -1

OMEGA_COORDINATES: dict[Triple, int] = {
    (1, 2, 3): 1,
    (1, 6, 7): -1,
    (5, 2, 7): -1,
    (5, 6, 3): -1,
    (1, 5, 4): -1,
    (2, 6, 4): -1,
    (3, 7, 4): -1,
}

_TAU_PRINTED: dict[TauKey, int] = {
    (2, 5, 6, 1): 1, (2, 4, 7, 1): -1, (3, 4, 6, 1): 1, (3, 5, 7, 1): -1,
    (1, 5, 6, 2): 1, (1, 4, 7, 2): -1, (3, 4, 5, 2): -1, (3, 6, 7, 2): 1,
    (2, 4, 5, 3): 1, (2, 6, 7, 3): -1, (1, 4, 6, 3): -1, (1, 5, 7, 3): -1,
    (5, 6, 7, 4): 1, (1, 2, 7, 4): -1, (1, 3, 6, 4): 1, (2, 3, 5, 4): -1,
    (1, 2, 6, 5): 1, (4, 6, 7, 5): -1, (1, 3, 7, 5): 1, (2, 3, 4, 5): 1,
    (4, 5, 7, 6): 1, (1, 2, 5, 6): -1, (1, 3, 4, 6): -1, (2, 3, 7, 6): 1,
    (1, 2, 4, 7): 1, (4, 5, 6, 7): -1, (1, 3, 5, 7): -1, (2, 3, 6, 7): -1,
}

_TAU_ERRATA: dict[TauKey, int] = {
    (3, 5, 7, 1): 1,
    (1, 5, 6, 2): -1,
    (1, 4, 7, 2): 1,
}


def permutation_sign(seq: tuple[int, ...]) -> int:
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for a, b in itertools.combinations(range(len(seq)), 2):
        if seq[a] > seq[b]:
            sign = -sign
    return sign


def _q_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return (
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def _q_conj(q: Quaternion) -> Quaternion:
    return (q[0], -q[1], -q[2], -q[3])


def _q_sub(p: Quaternion, q: Quaternion) -> Quaternion:
    return (p[0] - q[0], p[1] - q[1], p[2] - q[2], p[3] - q[3])


def _q_add(p: Quaternion, q: Quaternion) -> Quaternion:
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3])


@dataclass(frozen=True)
class ImOcton:
    c: tuple[Number, ...]

    def __post_init__(self) -> None:
        if len(self.c) != DIMENSION:
            raise ValueError(f"ImOcton needs 7 coefficients, got {len(self.c)}")

    @classmethod
    def basis(cls, index: int) -> ImOcton:
        if not 1 <= index <= DIMENSION:
            raise ValueError(f"basis index must be in 1..7, got {index}")
        return cls(tuple(1 if i == index else 0 for i in range(1, DIMENSION + 1)))

    @classmethod
    def zero(cls) -> ImOcton:
        return cls((0,) * DIMENSION)

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> ImOcton:
        arr = np.asarray(values, dtype=float).reshape(DIMENSION)
        return cls(tuple(float(x) for x in arr))

    def to_array(self) -> npt.NDArray[np.float64]:
        return np.array([float(x) for x in self.c])

    def _octonion(self) -> tuple[Quaternion, Quaternion]:
        c = self.c
        return (0, c[0], c[1], c[2]), (c[3], c[4], c[5], c[6])

    def __getitem__(self, index: int) -> Number:
        return self.c[index - 1]

    def __iter__(self) -> Iterator[Number]:
        return iter(self.c)

    def __add__(self, other: ImOcton) -> ImOcton:
        return ImOcton(tuple(a + b for a, b in zip(self.c, other.c)))

    def __sub__(self, other: ImOcton) -> ImOcton:
        return ImOcton(tuple(a - b for a, b in zip(self.c, other.c)))

    def __neg__(self) -> ImOcton:
        return ImOcton(tuple(-a for a in self.c))

    def __mul__(self, scalar: Number) -> ImOcton:
        return ImOcton(tuple(a * scalar for a in self.c))

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(inner(self, self)) ** 0.5


def inner(u: ImOcton, v: ImOcton) -> Number:
    return sum((a * b for a, b in zip(u.c, v.c)), 0)


def cross(a: ImOcton, b: ImOcton) -> ImOcton:
    p, q = a._octonion()
    r, s = b._octonion()
    first = _q_sub(_q_mul(p, r), _q_mul(_q_conj(s), q))
    second = _q_add(_q_mul(s, p), _q_mul(q, _q_conj(r)))
    return ImOcton((first[1], first[2], first[3], *second))


def g2_form(u: ImOcton, v: ImOcton, w: ImOcton) -> Number:
    return inner(cross(u, v), w)


def tau_formula(u: ImOcton, v: ImOcton, w: ImOcton) -> ImOcton:
    """-u x (v x w) - g(u,v) w + g(u,w) v; alternating on orthonormal input only."""
    return -cross(u, cross(v, w)) - w * inner(u, v) + v * inner(u, w)


def _minor(vectors: tuple[ImOcton, ...], rows: tuple[int, ...]) -> Number:
    total: Number = 0
    for perm in itertools.permutations(range(len(rows))):
        term: Number = permutation_sign(perm)
        for col, row in zip(perm, rows):
            term = term * vectors[col].c[row - 1]
        total = total + term
    return total


def tau(u: ImOcton, v: ImOcton, w: ImOcton) -> ImOcton:
    result: list[Number] = [0] * DIMENSION
    for triple, vector in _tau_basis_values().items():
        det = _minor((u, v, w), triple)
        if det == 0:
            continue
        for alpha, coefficient in enumerate(vector.c):
            if coefficient:
                result[alpha] = result[alpha] + det * coefficient
    return ImOcton(tuple(result))


def star_omega(u: ImOcton, v: ImOcton, w: ImOcton, z: ImOcton) -> Number:
    total: Number = 0
    for quad, coefficient in star_omega_table().items():
        total = total + coefficient * _minor((u, v, w, z), quad)
    return total


@functools.lru_cache(maxsize=None)
def omega_table() -> dict[Triple, int]:
    """The seven terms of Omega normalized to increasing index triples."""
    table: dict[Triple, int] = {}
    for triple, sign in OMEGA_COORDINATES.items():
        ordered = tuple(sorted(triple))
        table[ordered] = sign * permutation_sign(triple)  # type: ignore[index]
    return table


@functools.lru_cache(maxsize=None)
def star_omega_table() -> dict[tuple[int, int, int, int], int]:
    table: dict[tuple[int, int, int, int], int] = {}
    for triple, sign in omega_table().items():
        rest = tuple(i for i in range(1, DIMENSION + 1) if i not in triple)
        table[rest] = ORIENTATION * sign * permutation_sign(triple + rest)  # type: ignore[index]
    return table


@functools.lru_cache(maxsize=None)
def _tau_basis_values() -> dict[Triple, ImOcton]:
    return {
        triple: tau_formula(*(ImOcton.basis(i) for i in triple))
        for triple in itertools.combinations(range(1, DIMENSION + 1), 3)
    }


@dataclass(frozen=True)
class VectorValuedForm:
    """Coefficients of sum_alpha omega^{ijk} (x) e_alpha keyed by (i, j, k, alpha)."""

    coeff: dict[TauKey, int]

    def value(self, i: int, j: int, k: int, alpha: int) -> int:
        sign = permutation_sign((i, j, k))
        if sign == 0:
            return 0
        a, b, c = sorted((i, j, k))
        return sign * self.coeff.get((a, b, c, alpha), 0)

    def vector(self, i: int, j: int, k: int) -> ImOcton:
        return ImOcton(tuple(self.value(i, j, k, alpha) for alpha in range(1, 8)))

    def with_entry(self, key: TauKey, value: int) -> VectorValuedForm:
        coeff = dict(self.coeff)
        if value:
            coeff[key] = value
        else:
            coeff.pop(key, None)
        return VectorValuedForm(coeff)

    def four_form(self, key: TauKey) -> int:
        """g(tau(e_i, e_j, e_k), e_alpha) read back in increasing index order."""
        return permutation_sign(key) * self.value(*key)

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.coeff.items())))


def tau_table() -> VectorValuedForm:
    coeff = {**_TAU_PRINTED, **_TAU_ERRATA}
    return VectorValuedForm(coeff)


def tau_table_printed() -> VectorValuedForm:
    return VectorValuedForm(dict(_TAU_PRINTED))


def tau_table_errata() -> dict[TauKey, tuple[int, int]]:
    """Entries whose published sign disagrees with the associator: key -> (printed, corrected)."""
    return {key: (_TAU_PRINTED[key], value) for key, value in _TAU_ERRATA.items()}


def implied_by_antisymmetry(table: VectorValuedForm, key: TauKey) -> list[int]:
    """Values of ``key`` forced by the other entries over the same four indices.

    g(tau(u, v, w), z) is a 4-form, so each of the four ways of writing a
    4-element index set as (triple; alpha) determines all the others.
    """
    indices = sorted(key)
    implied = []
    for alpha in indices:
        triple = tuple(i for i in indices if i != alpha)
        other: TauKey = (*triple, alpha)  # type: ignore[assignment]
        if other == key:
            continue
        sorted_value = permutation_sign(other) * table.coeff.get(other, 0)
        implied.append(permutation_sign(key) * sorted_value)
    return implied


@functools.lru_cache(maxsize=None)
def _cross_tensor() -> npt.NDArray[np.int64]:
    tensor = np.zeros((DIMENSION,) * 3, dtype=np.int64)
    for i in range(DIMENSION):
        for j in range(DIMENSION):
            product = cross(ImOcton.basis(i + 1), ImOcton.basis(j + 1))
            tensor[i, j, :] = [int(x) for x in product.c]
    return tensor


def cross_tensor() -> npt.NDArray[np.int64]:
    """C[i, j, k] = g(e_i x e_j, e_k), zero-based."""
    return _cross_tensor().copy()


@functools.lru_cache(maxsize=None)
def _tau_tensor() -> npt.NDArray[np.int64]:
    tensor = np.zeros((DIMENSION,) * 4, dtype=np.int64)
    for triple, vector in _tau_basis_values().items():
        values = [int(x) for x in vector.c]
        for perm in itertools.permutations(triple):
            index = tuple(i - 1 for i in perm)
            tensor[index] = permutation_sign(perm) * np.asarray(values)
    return tensor


def tau_tensor() -> npt.NDArray[np.int64]:
    return _tau_tensor().copy()


@functools.lru_cache(maxsize=None)
def _star_tensor() -> npt.NDArray[np.int64]:
    tensor = np.zeros((DIMENSION,) * 4, dtype=np.int64)
    for quad, sign in star_omega_table().items():
        for perm in itertools.permutations(quad):
            tensor[tuple(i - 1 for i in perm)] = sign * permutation_sign(perm)
    return tensor


def cross_array(u: npt.ArrayLike, v: npt.ArrayLike) -> np.ndarray:
    return np.einsum("...i,...j,ijk->...k", u, v, _cross_tensor())


def g2_form_array(u: npt.ArrayLike, v: npt.ArrayLike, w: npt.ArrayLike) -> np.ndarray:
    return np.einsum("...i,...j,...k,ijk->...", u, v, w, _cross_tensor())


def tau_array(u: npt.ArrayLike, v: npt.ArrayLike, w: npt.ArrayLike) -> np.ndarray:
    return np.einsum("...i,...j,...k,ijka->...a", u, v, w, _tau_tensor(), optimize=True)


def star_omega_array(
    u: npt.ArrayLike, v: npt.ArrayLike, w: npt.ArrayLike, z: npt.ArrayLike
) -> np.ndarray:
    return np.einsum(
        "...i,...j,...k,...l,ijkl->...", u, v, w, z, _star_tensor(), optimize=True
    )


def cayley_dickson_extend(
    w1: npt.ArrayLike, w2: npt.ArrayLike, w4: npt.ArrayLike
) -> np.ndarray:
    """Columns W1..W7 with W3 = W1xW2, W5 = W1xW4, W6 = W2xW4, W7 = W3xW4."""
    w1, w2, w4 = (np.asarray(w) for w in (w1, w2, w4))
    w3 = cross_array(w1, w2)
    columns = [w1, w2, w3, w4, cross_array(w1, w4), cross_array(w2, w4), cross_array(w3, w4)]
    return np.stack(columns, axis=1)


def preserves_omega(matrix: npt.ArrayLike) -> bool:
    m = np.asarray(matrix)
    omega = _cross_tensor()
    pulled = np.einsum("ai,bj,ck,abc->ijk", m, m, m, omega, optimize=True)
    return bool(np.array_equal(pulled, omega))


@functools.lru_cache(maxsize=None)
def _signed_permutations() -> tuple[npt.NDArray[np.int64], ...]:
    unit = np.eye(DIMENSION, dtype=np.int64)
    found = []
    for a, b in itertools.permutations(range(DIMENSION), 2):
        for s1, s2 in itertools.product((1, -1), repeat=2):
            w1, w2 = s1 * unit[a], s2 * unit[b]
            w3 = cross_array(w1, w2)
            taken = {a, b, int(np.flatnonzero(w3)[0])}
            for d in range(DIMENSION):
                if d in taken:
                    continue
                for s4 in (1, -1):
                    frame = cayley_dickson_extend(w1, w2, s4 * unit[d])
                    if preserves_omega(frame):
                        found.append(frame)
    return tuple(found)


def g2_signed_permutations() -> list[npt.NDArray[np.int64]]:
    """All signed permutation matrices of the basis that preserve Omega."""
    return [m.copy() for m in _signed_permutations()]


@dataclass(frozen=True)
class TableCheck:
    name: str
    items: int
    max_residual: float
    passed: bool
    offending: str | None = None


def _check_omega() -> TableCheck:
    table = omega_table()
    worst = 0
    offending = None
    triples = list(itertools.combinations(range(1, DIMENSION + 1), 3))
    for triple in triples:
        value = g2_form(*(ImOcton.basis(i) for i in triple))
        diff = abs(value - table.get(triple, 0))  # type: ignore[arg-type]
        if diff and offending is None:
            offending = f"omega{triple}"
        worst = max(worst, diff)
    return TableCheck("omega-table", len(triples), float(worst), offending is None, offending)


def _check_tau(table: VectorValuedForm) -> TableCheck:
    worst = 0
    offending = None
    triples = list(itertools.combinations(range(1, DIMENSION + 1), 3))
    for triple in triples:
        computed = tau_formula(*(ImOcton.basis(i) for i in triple))
        for alpha in range(1, DIMENSION + 1):
            diff = abs(computed[alpha] - table.value(*triple, alpha))
            if diff and offending is None:
                offending = "tau({},{},{}; alpha={})".format(*triple, alpha)
            worst = max(worst, diff)
    return TableCheck("tau-table", len(triples), float(worst), offending is None, offending)


def _check_cross_axioms() -> TableCheck:
    worst = 0
    offending = None
    pairs = list(itertools.product(range(1, DIMENSION + 1), repeat=2))
    for i, j in pairs:
        u, v = ImOcton.basis(i), ImOcton.basis(j)
        w = cross(u, v)
        residuals = (
            abs(inner(w, u)),
            abs(inner(w, v)),
            abs(inner(w, w) - (inner(u, u) * inner(v, v) - inner(u, v) ** 2)),
        )
        if any(residuals) and offending is None:
            offending = f"e{i} x e{j}"
        worst = max(worst, *residuals)
    return TableCheck("cross-axioms", len(pairs), float(worst), offending is None, offending)


def _check_star_omega() -> TableCheck:
    worst = 0
    offending = None
    quads = list(itertools.combinations(range(1, DIMENSION + 1), 4))
    for quad in quads:
        u, v, w, z = (ImOcton.basis(i) for i in quad)
        diff = abs(star_omega(u, v, w, z) - inner(tau(u, v, w), z))
        if diff and offending is None:
            offending = f"star_omega{quad}"
        worst = max(worst, diff)
    return TableCheck("star-omega", len(quads), float(worst), offending is None, offending)


def verify_tables(table: VectorValuedForm | None = None) -> list[TableCheck]:
    return [
        _check_omega(),
        _check_tau(tau_table() if table is None else table),
        _check_cross_axioms(),
        _check_star_omega(),
    ]
