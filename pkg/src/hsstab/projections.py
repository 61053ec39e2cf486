"""Linear equations over families of orthogonal projections.

In ``M_n`` the normalized trace of a projection is ``rank / n``, so the
trace conditions of the lifting arguments become integer rank conditions.
This module solves those rank problems exactly, realizes rank vectors as
concrete projection families close to approximate ones, and builds unitaries
that conjugate one family onto another of the same ranks.

Slot ``s`` of a family of size ``N`` belongs to the root of unity
``exp(2 pi i (s + 1) / N)``, so slot ``N - 1`` carries the eigenvalue 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from hsstab.errors import InfeasibleRanksError, RankMismatchError
from hsstab.linalg import dagger, polar_unitary
from hsstab.presentations import order_data

Slot = tuple[int, int]  # (family, slot)


@dataclass(frozen=True)
class Equation:
    """``sum(family[block][left]) == sum(family[block + 1][right])``."""

    block: int
    left: tuple[int, ...]
    right: tuple[int, ...]


@dataclass(frozen=True)
class LinearProjectionSystem:
    sizes: tuple[int, ...]
    equations: tuple[Equation, ...]
    equalities: tuple[tuple[Slot, Slot], ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        nfam = len(self.sizes)
        for blk in range(nfam - 1):
            eqs = self.block(blk)
            for side, size in (("left", self.sizes[blk]), ("right", self.sizes[blk + 1])):
                seen = sorted(i for e in eqs for i in getattr(e, side))
                if seen != list(range(size)):
                    raise ValueError(
                        f"block {blk}: every {side} slot must appear in exactly one equation"
                    )
        for e in self.equations:
            if not e.left or not e.right:
                raise ValueError("equation sides must be nonempty")
            if not 0 <= e.block < nfam - 1:
                raise ValueError(f"equation block {e.block} out of range")
        for pair in self.equalities:
            for f, s in pair:
                if not (0 <= f < nfam and 0 <= s < self.sizes[f]):
                    raise ValueError(f"equality refers to missing slot {(f, s)}")

    def block(self, i: int) -> list[Equation]:
        return [e for e in self.equations if e.block == i]

    def with_equalities(self, pairs) -> "LinearProjectionSystem":
        pairs = tuple((tuple(p), tuple(q)) for p, q in pairs)
        return LinearProjectionSystem(self.sizes, self.equations, self.equalities + pairs)

    def slot_offsets(self) -> list[int]:
        return list(np.cumsum((0,) + tuple(self.sizes))[:-1])

    def to_json(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "equations": [
                {"block": e.block, "left": list(e.left), "right": list(e.right)} for e in self.equations
            ],
            "equalities": [[list(p), list(q)] for p, q in self.equalities],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearProjectionSystem":
        eqs = tuple(Equation(int(e["block"]), tuple(e["left"]), tuple(e["right"])) for e in obj["equations"])
        eqls = tuple((tuple(p), tuple(q)) for p, q in obj.get("equalities", []))
        return cls(tuple(obj["sizes"]), eqs, eqls)

    def format(self, letters: str = "qrstuvw") -> str:
        """Human-readable equations using 1-based slot labels."""

        def term(f, s):
            name = letters[f] if f < len(letters) else f"p{f}_"
            return f"{name}{s + 1}"

        lines = []
        for e in self.equations:
            lhs = "+".join(term(e.block, s) for s in e.left)
            rhs = "+".join(term(e.block + 1, s) for s in e.right)
            lines.append(f"{lhs}={rhs}")
        return "\n".join(lines)


def chain_system(a: Sequence[int], b: Sequence[int]) -> LinearProjectionSystem:
    """Projection equations equivalent to ``x_i^{a_i} = x_{i+1}^{b_i}`` for
    finite-order unitaries of orders ``N_i``.

    Slot ``k`` of family ``i`` carries ``exp(2 pi i (k+1) / N_i)``; its
    ``a_i``-th power is grouped with the slots of family ``i+1`` whose
    ``b_i``-th powers coincide with it. Equations are listed per block in
    order of the common eigenvalue ``exp(2 pi i r / M)``, ``r = 1, ..., M``.
    """
    a, b = list(a), list(b)
    if len(a) == 0 or len(a) != len(b) or min(a + b) < 2:
        raise ValueError("chain exponents must be nonempty lists of integers >= 2")
    n = order_data(a, b)
    eqs = []
    for i in range(len(a)):
        groups: dict[Fraction, tuple[list[int], list[int]]] = {}
        for k in range(1, n[i] + 1):
            groups.setdefault(Fraction(a[i] * k, n[i]) % 1, ([], []))[0].append(k - 1)
        for j in range(1, n[i + 1] + 1):
            key = Fraction(b[i] * j, n[i + 1]) % 1
            if key not in groups:
                raise ValueError("chain data produce an unmatched eigenvalue")
            groups[key][1].append(j - 1)
        # eigenvalue 1 (key 0) is listed last, matching r = M
        for key in sorted(groups, key=lambda f: (f == 0, f)):
            left, right = groups[key]
            eqs.append(Equation(i, tuple(left), tuple(right)))
    return LinearProjectionSystem(tuple(n), tuple(eqs))


def cyclic_system(a: Sequence[int], b: Sequence[int]) -> LinearProjectionSystem:
    """Chain system plus ``rank(first family, k) == rank(last family, k)``.

    This is the rank form of ``u x_1 u^-1 = x_m``; it needs ``N_1 == N_m``.
    """
    sys = chain_system(a, b)
    last = len(sys.sizes) - 1
    if sys.sizes[0] != sys.sizes[last]:
        raise ValueError("first and last orders differ; no conjugacy constraint possible")
    return sys.with_equalities(((0, k), (last, k)) for k in range(sys.sizes[0]))


# --------------------------------------------------------------------------
# rank vectors


@dataclass(frozen=True)
class RankVector:
    ranks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(tuple(int(r) for r in fam) for fam in self.ranks))

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self.ranks[i]

    def __len__(self) -> int:
        return len(self.ranks)

    def flat(self) -> list[int]:
        return [r for fam in self.ranks for r in fam]

    def violations(self, sys: LinearProjectionSystem, dim: int) -> list[str]:
        out = []
        if tuple(len(f) for f in self.ranks) != tuple(sys.sizes):
            return ["family sizes do not match the system"]
        for i, fam in enumerate(self.ranks):
            if min(fam) < 0:
                out.append(f"family {i} has a negative rank")
            if sum(fam) != dim:
                out.append(f"family {i} ranks sum to {sum(fam)}, expected {dim}")
        for n, e in enumerate(sys.equations):
            lhs = sum(self.ranks[e.block][s] for s in e.left)
            rhs = sum(self.ranks[e.block + 1][s] for s in e.right)
            if lhs != rhs:
                out.append(f"equation {n} (block {e.block}): {lhs} != {rhs}")
        for (f, s), (g, t) in sys.equalities:
            if self.ranks[f][s] != self.ranks[g][t]:
                out.append(f"equality {(f, s)} == {(g, t)} fails")
        return out

    def is_feasible(self, sys: LinearProjectionSystem, dim: int) -> bool:
        return not self.violations(sys, dim)

    def deviation(self, target, dim: int) -> float:
        return float(sum(abs(r - dim * t) for fam, tf in zip(self.ranks, target) for r, t in zip(fam, tf)))

    def to_json(self) -> list[list[int]]:
        return [list(f) for f in self.ranks]


def largest_remainder(x, total: int) -> list[int]:
    """Round nonnegative reals to integers summing to ``total``.

    ``x`` is first rescaled to sum to ``total`` (uniform if it sums to zero);
    leftover units go to the largest fractional parts, lower index first.
    """
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    if len(x) == 0:
        if total:
            raise InfeasibleRanksError("cannot distribute a positive total over no slots")
        return []
    s = x.sum()
    # divide first so subnormal inputs do not overflow
    x = (x / s) * total if s > 0 else np.full(len(x), total / len(x))
    fl = np.floor(x + 1e-12).astype(int)
    fl = np.minimum(fl, total)
    short = total - int(fl.sum())
    if short < 0:
        # rounding pushed us over; take back from the smallest remainders
        order = sorted(range(len(x)), key=lambda i: (x[i] - fl[i], -i))
        for i in order:
            if short == 0:
                break
            if fl[i] > 0:
                fl[i] -= 1
                short += 1
    else:
        order = sorted(range(len(x)), key=lambda i: (-(x[i] - fl[i]), i))
        for i in order[:short]:
            fl[i] += 1
    return [int(v) for v in fl]


def _propagate(sys: LinearProjectionSystem, target, dim: int) -> RankVector:
    fams = [largest_remainder(np.asarray(target[0]) * dim, dim)]
    for i in range(len(sys.sizes) - 1):
        nxt = [0] * sys.sizes[i + 1]
        tgt = np.asarray(target[i + 1], dtype=float) * dim
        for e in sys.block(i):
            total = sum(fams[i][s] for s in e.left)
            for s, r in zip(e.right, largest_remainder(tgt[list(e.right)], total)):
                nxt[s] = r
        fams.append(nxt)
    return RankVector(tuple(tuple(f) for f in fams))


def _optimal(sys: LinearProjectionSystem, target, dim: int, mandatory) -> RankVector | None:
    """L1-nearest feasible rank vector as a small integer program."""
    sizes = list(sys.sizes)
    off = sys.slot_offsets()
    nv = sum(sizes)
    t = np.concatenate([np.asarray(tf, dtype=float) * dim for tf in target])
    # variables: ranks r (integer), then deviations d >= |r - t|
    rows, lo, hi = [], [], []

    def add(coeffs: dict[int, float], lb: float, ub: float):
        row = np.zeros(2 * nv)
        for k, v in coeffs.items():
            row[k] += v
        rows.append(row)
        lo.append(lb)
        hi.append(ub)

    for f, size in enumerate(sizes):
        add({off[f] + s: 1.0 for s in range(size)}, dim, dim)
    for e in sys.equations:
        c = {off[e.block] + s: 1.0 for s in e.left}
        for s in e.right:
            c[off[e.block + 1] + s] = c.get(off[e.block + 1] + s, 0.0) - 1.0
        add(c, 0, 0)
    for (f, s), (g, u) in sys.equalities:
        add({off[f] + s: 1.0, off[g] + u: -1.0}, 0, 0)
    for k in range(nv):
        add({nv + k: 1.0, k: -1.0}, -t[k], np.inf)
        add({nv + k: 1.0, k: 1.0}, t[k], np.inf)
    lb = np.zeros(2 * nv)
    for f, s in mandatory:
        lb[off[f] + s] = 1
    ub = np.concatenate([np.full(nv, dim), np.full(nv, np.inf)])
    res = milp(
        c=np.concatenate([np.zeros(nv), np.ones(nv)]),
        constraints=LinearConstraint(np.array(rows), lo, hi),
        integrality=np.concatenate([np.ones(nv), np.zeros(nv)]),
        bounds=Bounds(lb, ub),
    )
    if res.status != 0 or res.x is None:
        return None
    r = np.rint(res.x[:nv]).astype(int)
    return RankVector(tuple(tuple(int(v) for v in r[off[f] : off[f] + sizes[f]]) for f in range(len(sizes))))


def nearest_feasible_ranks(
    sys: LinearProjectionSystem,
    target,
    dim: int,
    mandatory: Sequence[Slot] = (),
) -> RankVector:
    """Integer ranks satisfying ``sys`` with minimal ``sum |rank - dim * target|``.

    ``target`` holds one sequence of normalized traces per family. The
    largest-remainder forward propagation is tried first and kept whenever it
    attains the optimum; otherwise the exact L1 optimum of the integer
    program is returned. ``mandatory`` slots must receive rank at least one.
    """
    if len(target) != len(sys.sizes) or any(len(t) != n for t, n in zip(target, sys.sizes)):
        raise ValueError("target shape does not match the system")
    if any(v < 0 for tf in target for v in tf):
        raise ValueError("targets must be nonnegative")
    for f in range(len(sys.sizes)):
        need = len({s for g, s in mandatory if g == f})
        if need > dim:
            raise InfeasibleRanksError(f"family {f} has {need} mandatory nonzero slots but dim is {dim}")
    candidate = _propagate(sys, target, dim)
    cand_ok = candidate.is_feasible(sys, dim) and all(candidate[f][s] >= 1 for f, s in mandatory)
    cand_cost = candidate.deviation(target, dim) if cand_ok else np.inf
    if cand_cost <= 1e-9:
        return candidate
    best = _optimal(sys, target, dim, mandatory)
    if best is None or not best.is_feasible(sys, dim):
        if cand_ok:
            return candidate
        raise InfeasibleRanksError(
            f"no rank vector of total {dim} satisfies the {len(sys.equations)} equations, "
            f"{len(sys.equalities)} equalities and {len(mandatory)} mandatory slots"
        )
    if cand_ok and cand_cost <= best.deviation(target, dim) + 1e-9:
        return candidate
    return best


# --------------------------------------------------------------------------
# concrete families


@dataclass
class ProjectionFamily:
    """Orthogonal projections ``bases[k] @ bases[k]^*`` summing to the identity."""

    bases: list[np.ndarray]
    dim: int
    label: str = field(default="")

    @property
    def ranks(self) -> list[int]:
        return [b.shape[1] for b in self.bases]

    @property
    def projections(self) -> list[np.ndarray]:
        return [b @ dagger(b) for b in self.bases]

    def __len__(self) -> int:
        return len(self.bases)

    @classmethod
    def from_projections(cls, projs: Sequence[np.ndarray], label: str = "") -> "ProjectionFamily":
        """Round approximate projections to exact ones of the nearest integer rank."""
        bases = []
        for p in projs:
            h = (p + dagger(p)) / 2
            r = int(round(np.trace(h).real))
            w, v = np.linalg.eigh(h)
            bases.append(v[:, v.shape[1] - r :] if r else v[:, :0])
        return cls(bases, projs[0].shape[0], label)

    def residual(self) -> float:
        """Largest violation of orthogonality, idempotence and completeness."""
        projs = self.projections
        n = self.dim
        err = float(np.linalg.norm(sum(projs, np.zeros((n, n))) - np.eye(n), 2))
        for j, p in enumerate(projs):
            err = max(err, float(np.linalg.norm(p @ p - p, 2)), float(np.linalg.norm(p - dagger(p), 2)))
            for q in projs[j + 1 :]:
                err = max(err, float(np.linalg.norm(p @ q, 2)))
        return err

    def assemble(self, values) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for v, b in zip(values, self.bases):
            if b.shape[1]:
                out += v * (b @ dagger(b))
        return out


def synthesize_family(ranks: Sequence[int], basis: np.ndarray, label: str = "") -> ProjectionFamily:
    """Coordinate projections in the frame ``basis``: consecutive column blocks.

    ``basis`` is unitary, or more generally has orthonormal columns; the
    ranks must add up to its number of columns.
    """
    basis = np.asarray(basis, dtype=complex)
    n = basis.shape[0]
    ranks = [int(r) for r in ranks]
    if sum(ranks) != basis.shape[1] or min(ranks, default=0) < 0:
        raise InfeasibleRanksError(f"ranks {ranks} do not sum to {basis.shape[1]}")
    edges = np.cumsum([0] + ranks)
    return ProjectionFamily([basis[:, edges[k] : edges[k + 1]] for k in range(len(ranks))], n, label)


def _hermitian_parts(fam) -> list[np.ndarray]:
    projs = fam.projections if isinstance(fam, ProjectionFamily) else list(fam)
    return [(p + dagger(p)) / 2 for p in projs]


def fill_corner(corner: np.ndarray, approx: Sequence[np.ndarray], ranks: Sequence[int]) -> list[np.ndarray]:
    """Split the subspace spanned by ``corner`` (orthonormal columns) into
    pieces of the prescribed ranks, each spanned by the dominant eigenvectors
    of the matching approximate projection compressed to what is left."""
    if sum(ranks) != corner.shape[1]:
        raise InfeasibleRanksError(f"ranks {list(ranks)} do not fill a corner of dimension {corner.shape[1]}")
    rest = corner
    out = []
    for h, r in zip(approx, ranks):
        if r == 0:
            out.append(rest[:, :0])
        elif r == rest.shape[1]:
            out.append(rest)
            rest = rest[:, :0]
        else:
            m = dagger(rest) @ h @ rest
            _, v = np.linalg.eigh((m + dagger(m)) / 2)
            out.append(rest @ v[:, -r:])
            rest = rest @ v[:, :-r]
    return out


def align_system(
    sys: LinearProjectionSystem,
    approx: Sequence,
    ranks: RankVector,
) -> list[ProjectionFamily]:
    """Exact families with the given ranks satisfying ``sys``, close to ``approx``.

    The first family is built inside the whole space; every later family is
    built equation by equation inside the range of the left-hand sum, which
    makes each equation an exact matrix identity.
    """
    if len(approx) != len(sys.sizes):
        raise ValueError("need one approximate family per system family")
    herm = [_hermitian_parts(f) for f in approx]
    n = herm[0][0].shape[0]
    if not ranks.violations(sys, n) == []:
        raise InfeasibleRanksError("; ".join(ranks.violations(sys, n)))
    fams = [ProjectionFamily(fill_corner(np.eye(n, dtype=complex), herm[0], ranks[0]), n, "family 0")]
    for i in range(len(sys.sizes) - 1):
        bases: list[np.ndarray | None] = [None] * sys.sizes[i + 1]
        for k, e in enumerate(sys.block(i)):
            corner = np.hstack([fams[i].bases[s] for s in e.left])
            try:
                pieces = fill_corner(corner, [herm[i + 1][s] for s in e.right], [ranks[i + 1][s] for s in e.right])
            except InfeasibleRanksError as exc:
                raise InfeasibleRanksError(f"block {i} equation {k}: {exc}") from exc
            for s, piece in zip(e.right, pieces):
                bases[s] = piece
        fams.append(ProjectionFamily(bases, n, f"family {i + 1}"))
    return fams


def system_residual(sys: LinearProjectionSystem, fams: Sequence[ProjectionFamily]) -> float:
    """Largest operator-norm violation of an equation of ``sys``."""
    projs = [f.projections for f in fams]
    n = fams[0].dim
    worst = 0.0
    for e in sys.equations:
        lhs = sum((projs[e.block][s] for s in e.left), np.zeros((n, n)))
        rhs = sum((projs[e.block + 1][s] for s in e.right), np.zeros((n, n)))
        worst = max(worst, float(np.linalg.norm(lhs - rhs, 2)))
    return worst


def _as_family(x) -> ProjectionFamily:
    return x if isinstance(x, ProjectionFamily) else ProjectionFamily.from_projections(list(x))


def conjugating_unitary(p, q, hint: np.ndarray) -> np.ndarray:
    """Unitary ``V`` with ``V P_k V^* = Q_k`` for all ``k``, close to ``hint``.

    Each block ``Q_k hint P_k``, read as a map from the range of ``P_k`` to
    the range of ``Q_k``, is replaced by its polar unitary; a vanishing block
    is completed deterministically.
    """
    p, q = _as_family(p), _as_family(q)
    if len(p) != len(q):
        raise RankMismatchError(f"families have {len(p)} and {len(q)} members")
    if p.ranks != q.ranks:
        raise RankMismatchError(f"rank mismatch between families: {p.ranks} vs {q.ranks}")
    hint = np.asarray(hint, dtype=complex)
    v = np.zeros((p.dim, p.dim), dtype=complex)
    for bp, bq in zip(p.bases, q.bases):
        if bp.shape[1] == 0:
            continue
        block = dagger(bq) @ hint @ bp
        v += bq @ polar_unitary(block) @ dagger(bp)
    return v
