"""Group presentations, words and the Hilbert-Schmidt defect of a tuple of unitaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from hsstab.errors import PresentationError
from hsstab.linalg import INPUT_TOL, as_matrix, assert_unitary, dagger, hs_norm

Letter = tuple[int, int]


def _reduce(letters: Iterable[Letter]) -> tuple[Letter, ...]:
    out: list[list[int]] = []
    for g, e in letters:
        g, e = int(g), int(e)
        if e == 0:
            continue
        if out and out[-1][0] == g:
            out[-1][1] += e
            if out[-1][1] == 0:
                out.pop()
        else:
            out.append([g, e])
    return tuple((g, e) for g, e in out)


@dataclass(frozen=True)
class Word:
    """Freely reduced word, stored as ``(generator, exponent)`` letters."""

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", _reduce(self.letters))

    @classmethod
    def gen(cls, g: int, e: int = 1) -> "Word":
        return cls(((g, e),))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -e) for g, e in reversed(self.letters)))

    def __pow__(self, k: int) -> "Word":
        base = self if k >= 0 else self.inverse()
        return Word(base.letters * abs(k))

    def __len__(self) -> int:
        return sum(abs(e) for _, e in self.letters)

    def max_generator(self) -> int:
        return max((g for g, _ in self.letters), default=-1)

    def to_list(self) -> list[list[int]]:
        return [[g, e] for g, e in self.letters]


def commutator(x: Word, y: Word) -> Word:
    """``x y x^-1 y^-1``."""
    return x * y * x.inverse() * y.inverse()


def order_data(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """``N_i = b_1 ... b_{i-1} a_i ... a_{m-1}`` for ``i = 1, ..., m``."""
    m = len(a) + 1
    return tuple(math.prod(b[: i - 1]) * math.prod(a[i - 1 :]) for i in range(1, m + 1))


@dataclass(frozen=True)
class GroupPresentation:
    """Finitely presented group.

    For ``case == "chain"`` the generators are ``x_1, ..., x_m`` with
    ``x_i^{a_i} = x_{i+1}^{b_i}``. For ``case == "hnn-chain"`` generator 0 is
    ``u`` and generators ``1..m`` are the ``x_i``, with the extra relation
    ``u x_1 u^-1 = x_m``.
    """

    num_generators: int
    relators: tuple[Word, ...]
    case: str = "generic"
    a: tuple[int, ...] = ()
    b: tuple[int, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.case not in ("generic", "chain", "hnn-chain"):
            raise PresentationError(f"unknown case {self.case!r}")
        for w in self.relators:
            if w.max_generator() >= self.num_generators:
                raise PresentationError("relator uses an undefined generator")
        if self.case != "generic":
            _check_chain(self.a, self.b)
            if self.case == "hnn-chain" and math.prod(self.a) != math.prod(self.b):
                raise PresentationError(
                    f"hnn-chain needs prod(a) == prod(b), got {math.prod(self.a)} != {math.prod(self.b)}"
                )

    @property
    def orders(self) -> tuple[int, ...]:
        """Orders ``N_i`` of the finite-order parts of the chain generators."""
        if self.case == "generic":
            return ()
        return order_data(self.a, self.b)

    @property
    def chain_offset(self) -> int:
        """Index of ``x_1`` among the generators."""
        return 1 if self.case == "hnn-chain" else 0

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.case == "chain":
            return f"chain:{_csv(self.a)}:{_csv(self.b)}"
        if self.case == "hnn-chain":
            return f"hnn:{_csv(self.a)}:{_csv(self.b)}"
        return f"generic:{self.num_generators}"

    def to_json(self) -> dict:
        out = {
            "generators": self.num_generators,
            "relators": [w.to_list() for w in self.relators],
            "case": self.case,
        }
        if self.case != "generic":
            out["a"] = list(self.a)
            out["b"] = list(self.b)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GroupPresentation":
        case = obj.get("case", "generic")
        if case == "chain":
            return preset_chain(obj["a"], obj["b"])
        if case == "hnn-chain":
            return preset_case2(obj["a"], obj["b"])
        rels = tuple(Word(tuple((int(g), int(e)) for g, e in r)) for r in obj["relators"])
        return cls(int(obj["generators"]), rels, "generic")


def _csv(xs) -> str:
    return ",".join(str(x) for x in xs)


def _check_chain(a, b) -> None:
    if len(a) == 0 or len(a) != len(b):
        raise PresentationError("exponent lists must be nonempty and of equal length")
    for x in list(a) + list(b):
        if int(x) != x or x < 2:
            raise PresentationError(f"chain exponents must be integers >= 2, got {x}")


def _chain_relators(a, b, offset: int) -> list[Word]:
    return [Word(((offset + i, a[i]), (offset + i + 1, -b[i]))) for i in range(len(a))]


def preset_chain(a: Sequence[int], b: Sequence[int]) -> GroupPresentation:
    """``<x_1..x_m | x_i^{a_i} = x_{i+1}^{b_i}>``."""
    a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
    _check_chain(a, b)
    return GroupPresentation(len(a) + 1, tuple(_chain_relators(a, b, 0)), "chain", a, b)


def preset_case2(a: Sequence[int], b: Sequence[int]) -> GroupPresentation:
    """``<u, x_1..x_m | u x_1 u^-1 = x_m, x_i^{a_i} = x_{i+1}^{b_i}>``."""
    a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
    _check_chain(a, b)
    m = len(a) + 1
    u, x1, xm = Word.gen(0), Word.gen(1), Word.gen(m)
    conj = u * x1 * u.inverse() * xm.inverse()
    return GroupPresentation(m + 1, (conj, *_chain_relators(a, b, 1)), "hnn-chain", a, b)


def preset_heisenberg() -> GroupPresentation:
    u, v = Word.gen(0), Word.gen(1)
    c = commutator(u, v)
    return GroupPresentation(2, (commutator(u, c), commutator(v, c)), "generic", name="heisenberg")


def parse_preset(spec: str) -> GroupPresentation:
    """Parse ``chain:2,5:3,7``, ``hnn:2,3:3,2`` or ``heisenberg``."""
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    if kind == "heisenberg" and len(parts) == 1:
        return preset_heisenberg()
    if kind in ("chain", "hnn", "hnn-chain", "case2") and len(parts) == 3:
        try:
            a = [int(x) for x in parts[1].split(",")]
            b = [int(x) for x in parts[2].split(",")]
        except ValueError as exc:
            raise PresentationError(f"bad exponent list in preset {spec!r}") from exc
        return preset_chain(a, b) if kind == "chain" else preset_case2(a, b)
    raise PresentationError(f"unrecognised preset {spec!r}")


# --------------------------------------------------------------------------
# tuples and evaluation


@dataclass(frozen=True)
class UnitaryTuple:
    """One unitary per generator, all of the same size."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(as_matrix(m) for m in self.matrices)
        if mats and len({m.shape for m in mats}) != 1:
            raise ValueError("all matrices in a tuple must have the same size")
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i]

    def __iter__(self):
        return iter(self.matrices)

    def check_unitary(self, tol: float = INPUT_TOL) -> None:
        for i, m in enumerate(self.matrices):
            assert_unitary(m, tol).raise_if_failed(f"generator {i}")

    def conjugate(self, q: np.ndarray) -> "UnitaryTuple":
        return UnitaryTuple(tuple(q @ m @ dagger(q) for m in self.matrices))

    def distances(self, other: "UnitaryTuple") -> list[float]:
        return [hs_norm(x - y) for x, y in zip(self.matrices, other.matrices)]


def _unitary_power(u: np.ndarray, e: int) -> np.ndarray:
    if e >= 0:
        return np.linalg.matrix_power(u, e)
    return np.linalg.matrix_power(dagger(u), -e)


def evaluate_word(w: Word, t: UnitaryTuple) -> np.ndarray:
    """Product of the letters of ``w`` with inverses taken as adjoints."""
    n = t.dim
    if w.max_generator() >= len(t):
        raise IndexError(f"word uses generator {w.max_generator()} but tuple has {len(t)}")
    out = np.eye(n, dtype=complex)
    for g, e in w.letters:
        out = out @ _unitary_power(t[g], e)
    return out


def relator_defects(p: GroupPresentation, t: UnitaryTuple) -> list[float]:
    if len(t) != p.num_generators:
        raise ValueError(f"presentation has {p.num_generators} generators, tuple has {len(t)}")
    eye = np.eye(t.dim)
    return [hs_norm(evaluate_word(r, t) - eye) for r in p.relators]


def relation_defect(p: GroupPresentation, t: UnitaryTuple) -> float:
    """``max_j || r_j(U_1, ..., U_s) - 1 ||_2``."""
    return max(relator_defects(p, t), default=0.0)
