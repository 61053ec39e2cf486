"""Finite-dimensional traces that approximate characters.

* clock-and-shift representations of the discrete Heisenberg group and the
  traces of their words,
* tensor powers of ``pi + trivial`` pushing traces towards ``delta_e``,
* block-diagonal mixing realizing a rational convex combination of traces,
* root-of-unity nets on the circle,
* traces of representations induced from characters of central subgroups
  of finite groups, in closed form and by explicit monomial matrices.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from hsstab.errors import GroupError, VerificationError

MAX_EXPLICIT_ORDER = 4096


# --------------------------------------------------------------------------
# Heisenberg group


def clock_shift_rep(p: int, q: int, alpha: complex = 1.0, beta: complex = 1.0):
    """Clock ``U = diag(1, w, ..., w^{q-1})`` and cyclic shift ``V e_j = e_{j+1}``
    with ``w = exp(2 pi i p / q)``, so that ``U V U^-1 V^-1 = w``.

    ``alpha`` and ``beta`` twist the pair so that ``U^q = alpha`` and
    ``V^q = beta`` (principal ``q``-th roots are used).
    """
    if q < 1:
        raise ValueError("q must be positive")
    a = complex(alpha) ** (1.0 / q) if alpha != 1 else 1.0
    b = complex(beta) ** (1.0 / q) if beta != 1 else 1.0
    # reduce p*j mod q before scaling so large exponents keep full precision
    u = a * np.diag(np.exp(2j * math.pi * ((p * np.arange(q)) % q) / q))
    v = b * np.roll(np.eye(q, dtype=complex), 1, axis=0)
    return u, v


def heisenberg_normal_form(letters: Sequence[tuple[int, int]]) -> tuple[int, int, int]:
    """Rewrite a word in ``u`` (generator 0) and ``v`` (generator 1) as
    ``U^a V^b Z^c`` with ``Z = U V U^-1 V^-1`` central.

    Uses ``V^b U^e = Z^{-b e} U^e V^b``.
    """
    a = b = c = 0
    for g, e in letters:
        if g == 0:
            c -= b * e
            a += e
        elif g == 1:
            b += e
        else:
            raise ValueError("Heisenberg words use generators 0 and 1 only")
    return a, b, c


def heisenberg_word_trace(a: int, b: int, c: int, p: int, q: int, alpha: complex = 1.0, beta: complex = 1.0) -> complex:
    """Normalized trace of ``U^a V^b Z^c`` in the clock-and-shift pair.

    ``V^b`` is a cyclic shift, so the trace vanishes unless ``q | b``; then
    ``tr(U^a)`` vanishes unless ``w^a = 1``. Zeros are returned exactly.
    """
    if q < 1:
        raise ValueError("q must be positive")
    if b % q:
        return 0j
    if (a * p) % q:
        return 0j
    val = cmath.exp(2j * math.pi * ((p * c) % q) / q)
    if alpha != 1:
        val *= (complex(alpha) ** (1.0 / q)) ** a
    if beta != 1:
        val *= (complex(beta) ** (1.0 / q)) ** b
    return complex(val)


def convergents(theta: float, max_q: int) -> list[tuple[int, int]]:
    """Continued-fraction convergents ``p/q`` of ``theta`` with ``q <= max_q``."""
    out = []
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    x = Fraction(theta)
    while True:
        a = math.floor(x)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_q:
            break
        out.append((h1, k1))
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return out


# --------------------------------------------------------------------------
# delta_e and mixing


def augmented_trace(dim: int, trace) -> complex:
    """Normalized trace of ``pi + trivial`` from that of ``pi`` (of size ``dim``)."""
    return (dim * trace + 1) / (dim + 1)


@dataclass(frozen=True)
class TensorPowerResult:
    power: int
    traces: tuple[complex, ...]


def tensor_power_delta(values: Sequence[complex], eps: float) -> TensorPowerResult:
    """Smallest ``N >= 1`` with ``max |v|^N < eps``.

    The normalized trace is multiplicative on tensor products, so ``N`` is
    the tensor power of ``pi + trivial`` whose traces at the listed
    nonidentity elements are all below ``eps`` in modulus.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mods = [abs(complex(v)) for v in values]
    if any(m >= 1 for m in mods):
        raise ValueError("every trace must have modulus < 1; some element is not separated")
    top = max(mods, default=0.0)
    n = 1
    acc = top
    while acc >= eps:
        n += 1
        acc = top**n
    return TensorPowerResult(n, tuple(complex(v) ** n for v in values))


@dataclass(frozen=True)
class MixResult:
    """``traces[k] = sum_i w_i tr_i[k]`` realized by ``multiplicities[i]`` copies of
    representation ``i``; ``lcm`` is the least ``L`` with every ``s_i L / n_i``
    integral and ``dimension = m L`` the size of the block sum."""

    traces: tuple
    multiplicities: tuple[int, ...]
    lcm: int
    dimension: int
    block_traces: tuple


def mix_traces(dims: Sequence[int], weights: Sequence, traces: Sequence[Sequence]) -> MixResult:
    """Direct sum of copies of representations whose trace is the convex
    combination ``sum_i w_i tr pi_i``.

    Weights must be rationals (``Fraction``, ``int`` or exact decimal
    strings) that are positive and sum to one. With rational traces the
    arithmetic is exact.
    """
    if not (len(dims) == len(weights) == len(traces)) or not dims:
        raise ValueError("dims, weights and traces must have the same nonzero length")
    w = []
    for x in weights:
        if isinstance(x, float):
            raise TypeError("weights must be exact rationals, not floats")
        w.append(Fraction(x))
    if any(x <= 0 for x in w) or sum(w) != 1:
        raise ValueError("weights must be positive and sum to 1")
    m = math.lcm(*(x.denominator for x in w))
    s = [int(x * m) for x in w]
    lcm = math.lcm(*(n // math.gcd(n, si) for n, si in zip(dims, s)))
    mult = tuple(si * lcm // n for si, n in zip(s, dims))
    dimension = sum(k * n for k, n in zip(mult, dims))
    nk = len(traces[0])
    mixed = tuple(sum(Fraction(si, m) * tr[k] for si, tr in zip(s, traces)) for k in range(nk))
    # the same value read off the block sum: sum_i mult_i n_i tr_i / dimension
    block = tuple(
        sum(Fraction(k_i * n_i, dimension) * tr[k] for k_i, n_i, tr in zip(mult, dims, traces)) for k in range(nk)
    )
    return MixResult(mixed, mult, lcm, dimension, block)


def nearest_root_phase(theta: float, k: int) -> tuple[int, float]:
    """``l`` in ``{0, ..., k-1}`` minimizing ``|exp(2 pi i l/k) - exp(2 pi i theta)|``
    and that distance; ``theta`` is measured in turns."""
    if k < 1:
        raise ValueError("k must be positive")
    l = int(math.floor(theta * k + 0.5)) % k
    err = abs(cmath.exp(2j * math.pi * l / k) - cmath.exp(2j * math.pi * theta))
    return l, err


# --------------------------------------------------------------------------
# finite groups


class FiniteGroup:
    """Finite group given by its Cayley table on ``0, ..., order - 1``.

    ``table[g, h]`` is the index of ``g h``.
    """

    def __init__(self, table, identity: int | None = None, *, check: bool = True, elements=None):
        table = np.asarray(table, dtype=np.int64)
        n = table.shape[0]
        if table.shape != (n, n) or n < 1:
            raise GroupError("Cayley table must be a nonempty square array")
        if check:
            rng = np.arange(n)
            for row in table:
                if not np.array_equal(np.sort(row), rng):
                    raise GroupError("Cayley table is not a Latin square")
            for col in table.T:
                if not np.array_equal(np.sort(col), rng):
                    raise GroupError("Cayley table is not a Latin square")
            # (g h) k == g (h k), a slab of g at a time
            step = max(1, (1 << 22) // (n * n))
            for g0 in range(0, n, step):
                rows = table[g0 : g0 + step]
                if not np.array_equal(table[rows], rows[:, table]):
                    raise GroupError("Cayley table is not associative")
        if identity is None:
            ids = [e for e in range(n) if np.array_equal(table[e], np.arange(n))]
            if not ids:
                raise GroupError("no identity element")
            identity = ids[0]
        self.table = table
        self.identity = int(identity)
        self.order = n
        self.elements = elements
        self._inv = np.empty(n, dtype=np.int64)
        rows, cols = np.nonzero(table == self.identity)
        self._inv[rows] = cols

    def mul(self, g: int, h: int) -> int:
        return int(self.table[g, h])

    def inv(self, g: int) -> int:
        return int(self._inv[g])

    def power(self, g: int, k: int) -> int:
        out = self.identity
        base = g if k >= 0 else self.inv(g)
        for _ in range(abs(k)):
            out = self.mul(out, base)
        return out

    def element_order(self, g: int) -> int:
        k, x = 1, g
        while x != self.identity:
            x = self.mul(x, g)
            k += 1
        return k

    def closure(self, gens: Sequence[int]) -> list[int]:
        """Subgroup generated by ``gens`` (sorted element indices)."""
        seen = {self.identity}
        frontier = deque([self.identity])
        while frontier:
            x = frontier.popleft()
            for g in gens:
                y = self.mul(x, g)
                if y not in seen:
                    seen.add(y)
                    frontier.append(y)
        return sorted(seen)

    @classmethod
    def from_permutations(cls, generators: Sequence[Sequence[int]]) -> "FiniteGroup":
        """Group generated by permutations given as image lists."""
        gens = [tuple(int(i) for i in g) for g in generators]
        if not gens:
            raise GroupError("need at least one generator")
        deg = len(gens[0])
        for g in gens:
            if len(g) != deg or sorted(g) != list(range(deg)):
                raise GroupError(f"not a permutation of {deg} points: {g}")
        ident = tuple(range(deg))
        index = {ident: 0}
        elems = [ident]
        frontier = deque([ident])
        while frontier:
            x = frontier.popleft()
            for g in gens:
                y = tuple(x[i] for i in g)  # apply g first, then x
                if y not in index:
                    if len(elems) >= 1 << 20:
                        raise GroupError("group too large")
                    index[y] = len(elems)
                    elems.append(y)
                    frontier.append(y)
        n = len(elems)
        arr = np.array(elems, dtype=np.int64)
        # hash each permutation to one integer; products stay inside the group,
        # so an injective hash on the elements gives exact lookups
        weights = np.random.default_rng(0).integers(1, 1 << 62, size=deg, dtype=np.int64)
        keys = arr @ weights
        order = np.argsort(keys)
        sorted_keys = keys[order]
        table = np.empty((n, n), dtype=np.int64)
        if np.all(np.diff(sorted_keys) != 0):
            for i in range(n):
                # (x_i * x_j)[k] = x_i[x_j[k]]
                table[i] = order[np.searchsorted(sorted_keys, arr[i][arr] @ weights)]
        else:
            for i in range(n):
                composed = arr[i][arr]
                table[i] = [index[tuple(r)] for r in composed]
        return cls(table, 0, check=False, elements=elems)

    @classmethod
    def from_json(cls, obj) -> "FiniteGroup":
        if isinstance(obj, Mapping):
            if "generators" in obj:
                return cls.from_permutations(obj["generators"])
            if "table" in obj:
                return cls(obj["table"])
        if isinstance(obj, list):
            return cls.from_permutations(obj)
        raise GroupError("group JSON needs 'generators' (permutation images) or 'table'")

    def direct_product(self, other: "FiniteGroup") -> "FiniteGroup":
        n, m = self.order, other.order
        a = self.table[:, None, :, None] * m + other.table[None, :, None, :]
        table = a.transpose(0, 1, 2, 3).reshape(n * m, n * m)
        return FiniteGroup(table, self.identity * m + other.identity, check=False)


def cyclic_group(n: int) -> FiniteGroup:
    return FiniteGroup.from_permutations([[(i + 1) % n for i in range(n)]]) if n > 1 else FiniteGroup([[0]])


def dihedral_group(n: int) -> FiniteGroup:
    """Symmetries of the regular ``n``-gon (order ``2n``)."""
    rot = [(i + 1) % n for i in range(n)]
    ref = [(-i) % n for i in range(n)]
    return FiniteGroup.from_permutations([rot, ref])


def symmetric_group(n: int) -> FiniteGroup:
    if n == 1:
        return FiniteGroup([[0]])
    cyc = [(i + 1) % n for i in range(n)]
    sw = [1, 0] + list(range(2, n))
    return FiniteGroup.from_permutations([cyc, sw])


def quaternion_group() -> FiniteGroup:
    """``Q8``, as permutations of itself by left multiplication."""
    # elements (sign, unit) with unit in 1, i, j, k; index = 4 * (sign < 0) + unit
    units = {(0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
             (1, 0): (1, 1), (2, 0): (1, 2), (3, 0): (1, 3),
             (1, 1): (-1, 0), (2, 2): (-1, 0), (3, 3): (-1, 0),
             (1, 2): (1, 3), (2, 3): (1, 1), (3, 1): (1, 2),
             (2, 1): (-1, 3), (3, 2): (-1, 1), (1, 3): (-1, 2)}

    def mul(x, y):
        sign, unit = units[(x % 4, y % 4)]
        if (x >= 4) != (y >= 4):
            sign = -sign
        return unit + (4 if sign < 0 else 0)

    table = [[mul(x, y) for y in range(8)] for x in range(8)]
    return FiniteGroup(table, 0)


def heisenberg_mod(p: int) -> FiniteGroup:
    """Unitriangular 3x3 matrices over ``Z/p`` (order ``p^3``, center of order ``p``)."""
    elems = [(x, y, z) for x in range(p) for y in range(p) for z in range(p)]
    idx = {e: i for i, e in enumerate(elems)}
    n = len(elems)
    table = np.empty((n, n), dtype=np.int64)
    for i, (a, b, c) in enumerate(elems):
        for j, (d, e, f) in enumerate(elems):
            table[i, j] = idx[((a + d) % p, (b + e) % p, (c + f + a * e) % p)]
    return FiniteGroup(table, idx[(0, 0, 0)], check=False, elements=elems)


def center(g: FiniteGroup) -> list[int]:
    t = g.table
    return [z for z in range(g.order) if np.array_equal(t[z, :], t[:, z])]


@dataclass(frozen=True)
class CentralCharacterSpec:
    """A one-dimensional character ``chi`` of a central subgroup ``H``."""

    subgroup: tuple[int, ...]
    values: tuple[complex, ...]

    def as_dict(self) -> dict[int, complex]:
        return dict(zip(self.subgroup, self.values))

    def validate(self, g: FiniteGroup, tol: float = 1e-12) -> None:
        h = set(self.subgroup)
        if len(h) != len(self.subgroup) or len(self.values) != len(self.subgroup):
            raise GroupError("subgroup indices must be distinct with one value each")
        if g.identity not in h:
            raise GroupError("subgroup must contain the identity")
        z = set(center(g))
        if not h <= z:
            raise GroupError(f"subgroup is not central: {sorted(h - z)} lie outside the center")
        chi = self.as_dict()
        for x in h:
            if abs(abs(chi[x]) - 1) > tol:
                raise GroupError("character values must have modulus 1")
            for y in h:
                xy = g.mul(x, y)
                if xy not in h:
                    raise GroupError("subgroup indices are not closed under multiplication")
                if abs(chi[xy] - chi[x] * chi[y]) > tol:
                    raise GroupError(f"chi is not multiplicative at ({x}, {y})")


def random_central_character(g: FiniteGroup, rng: np.random.Generator, max_gens: int = 2) -> CentralCharacterSpec:
    """Character of a random subgroup of the center, extended generator by generator."""
    z = center(g)
    gens = [int(x) for x in rng.choice(z, size=min(max_gens, len(z)), replace=False)]
    chi = {g.identity: 1 + 0j}
    for x in gens:
        if x in chi:
            continue
        # smallest k > 0 with x^k already in the subgroup
        k, y = 1, x
        while y not in chi:
            y = g.mul(y, x)
            k += 1
        base = chi[y] ** (1.0 / k) * cmath.exp(2j * math.pi * int(rng.integers(k)) / k)
        old = dict(chi)
        acc = g.identity
        for j in range(k):
            for h, v in old.items():
                chi[g.mul(h, acc)] = v * base**j
            acc = g.mul(acc, x)
    sub = tuple(sorted(chi))
    return CentralCharacterSpec(sub, tuple(chi[h] for h in sub))


def coset_transversal(g: FiniteGroup, subgroup: Sequence[int]) -> list[int]:
    """Representatives of the left cosets ``t H``, smallest index first."""
    seen = set()
    reps = []
    for x in range(g.order):
        if x in seen:
            continue
        reps.append(x)
        seen.update(g.mul(x, h) for h in subgroup)
    return reps


def induced_matrix(g: FiniteGroup, spec: CentralCharacterSpec, x: int, reps: Sequence[int] | None = None) -> np.ndarray:
    """Monomial matrix of ``x`` in the representation induced from ``spec``:
    ``x t_i = t_j h`` gives entry ``chi(h)`` at ``(j, i)``."""
    chi = spec.as_dict()
    reps = coset_transversal(g, spec.subgroup) if reps is None else reps
    where = {}
    for j, t in enumerate(reps):
        for h in spec.subgroup:
            where[g.mul(t, h)] = (j, h)
    m = np.zeros((len(reps), len(reps)), dtype=complex)
    for i, t in enumerate(reps):
        j, h = where[g.mul(x, t)]
        m[j, i] = chi[h]
    return m


def induced_central_trace(g: FiniteGroup, spec: CentralCharacterSpec, x: int, verify: bool = False, tol: float = 1e-12) -> complex:
    """Normalized trace at ``x`` of the representation induced from a
    character of a central subgroup: ``chi(x)`` on the subgroup, 0 off it.

    With ``verify=True`` the monomial matrices are built and their
    normalized trace is compared with the closed form.
    """
    spec.validate(g)
    chi = spec.as_dict()
    value = complex(chi.get(x, 0j))
    if verify:
        if g.order > MAX_EXPLICIT_ORDER:
            raise GroupError(f"explicit verification is capped at order {MAX_EXPLICIT_ORDER}")
        m = induced_matrix(g, spec, x)
        explicit = complex(np.trace(m) / m.shape[0])
        if abs(explicit - value) > tol:
            raise VerificationError(f"induced trace mismatch at {x}: explicit {explicit} vs closed form {value}")
    return value


def write_character_csv(stream, values: Mapping[int, complex] | Sequence[complex]) -> None:
    """``element,re,im`` rows."""
    items = values.items() if isinstance(values, Mapping) else enumerate(values)
    stream.write("element,re,im\n")
    for k, v in items:
        v = complex(v)
        stream.write(f"{k},{v.real!r},{v.imag!r}\n")
