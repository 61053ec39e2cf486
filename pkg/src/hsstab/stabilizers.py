"""Correctors that turn almost-representations of chain groups into exact ones.

Pipeline (shared by both presentation shapes):

1. ``W`` is the polar unitary of the average of the powers ``X_i^{N_i}``;
   on exact input every power equals the same central element.
2. ``W`` is diagonalised and its eigenspaces are merged into a few clusters
   with values ``lambda_k``, giving ``Omega = sum_k lambda_k P_k``.
3. Inside each cluster, ``X_i`` is compressed, made unitary again, divided by
   ``lambda_k^{1/N_i}`` and rounded to order ``N_i``.
4. The resulting spectral families are replaced by exact families solving
   the chain's rank system (plus, for the HNN shape, equal ranks for the
   first and last family).
5. ``X_i`` is reassembled as ``(finite-order part) * lambda_k^{1/N_i}``; for
   the HNN shape ``u`` is replaced by a unitary conjugating the first
   family onto the last one.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from hsstab.errors import HSStabError, PresentationError, StabilizationError
from hsstab.linalg import (
    INPUT_TOL,
    dagger,
    haar_unitary,
    order_decomposition,
    polar_unitary,
    principal_power,
    roots_of_unity,
    spectral_cluster,
    unitary_eig,
)
from hsstab.presentations import GroupPresentation, UnitaryTuple, relation_defect
from hsstab.projections import (
    LinearProjectionSystem,
    ProjectionFamily,
    align_system,
    chain_system,
    conjugating_unitary,
    cyclic_system,
    nearest_feasible_ranks,
    synthesize_family,
)

DEFECT_THRESHOLD = 1e-9


@dataclass
class StabilizeOptions:
    """Knobs of the correctors.

    ``max_clusters`` defaults to ``min(dim, 16)``; ``gap_tol`` defaults to
    :func:`default_gap_tol`. ``seed`` is recorded only, the correctors are
    deterministic.
    """

    max_clusters: int | None = None
    gap_tol: float | None = None
    input_unitarity_tol: float = INPUT_TOL
    merge_tol: float = 1e-8
    defect_threshold: float = DEFECT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        for name in ("input_unitarity_tol", "merge_tol", "defect_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gap_tol is not None and self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.max_clusters is not None and self.max_clusters < 1:
            raise ValueError("max_clusters must be at least 1")


@dataclass
class StabilityRecord:
    dim: int
    preset: str
    defect_before: float
    defect_after: float
    distance: list[float]
    clusters: int
    seed: int
    wall_time: float
    eps: float | None = None
    trial: int | None = None
    ok: bool = True
    error: str | None = None
    stage: str | None = None

    def to_json(self) -> dict:
        """Field names as declared; NaN (a value never measured) becomes null."""
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and math.isnan(v):
                out[k] = None
        return out


def default_gap_tol(commutator: float, merge_tol: float) -> float:
    """Smallest circular gap at which the spectrum of ``W`` may be split.

    Splitting at a gap ``g`` costs about ``||[X_i, W]|| / g`` in the
    compressions, so gaps must dominate the commutator scale ``c``; the
    threshold is ``max(sqrt(c), 10 c, 10 * merge_tol)``.
    """
    return max(math.sqrt(commutator), 10.0 * commutator, 10.0 * merge_tol)


def central_element(xs, orders) -> np.ndarray:
    """Polar unitary of the mean of ``X_i^{N_i}``."""
    acc = sum(np.linalg.matrix_power(x, n) for x, n in zip(xs, orders))
    return polar_unitary(acc / len(xs))


def _stage(name: str, report: dict):
    class _Ctx:
        def __enter__(self):
            report["stage"] = name

        def __exit__(self, et, ev, tb):
            if ev is not None and isinstance(ev, (HSStabError, np.linalg.LinAlgError, ValueError)):
                if isinstance(ev, StabilizationError):
                    return False
                raise StabilizationError(str(ev), name, dict(report)) from ev
            return False

    return _Ctx()


def _stabilize(p: GroupPresentation, t: UnitaryTuple, opts: StabilizeOptions, hnn: bool):
    start = time.perf_counter()
    report: dict = {"preset": p.describe(), "dim": None}
    with _stage("input", report):
        if len(t) != p.num_generators:
            raise ValueError(f"presentation has {p.num_generators} generators, tuple has {len(t)}")
        t.check_unitary(opts.input_unitarity_tol)
    n = t.dim
    report["dim"] = n
    orders = p.orders
    off = p.chain_offset
    xs = list(t.matrices[off : off + len(orders)])
    sys = cyclic_system(p.a, p.b) if hnn else chain_system(p.a, p.b)
    defect_before = relation_defect(p, t)

    with _stage("central-element", report):
        w = central_element(xs, orders)
        commutator = max(float(np.linalg.norm(x @ w - w @ x, 2)) for x in xs)
        if hnn:
            commutator = max(commutator, float(np.linalg.norm(t[0] @ w - w @ t[0], 2)))
    with _stage("spectral-decomposition", report):
        dec = unitary_eig(w, tol=opts.merge_tol)
    with _stage("clustering", report):
        gap_tol = opts.gap_tol or default_gap_tol(commutator, opts.merge_tol)
        max_clusters = opts.max_clusters or min(n, 16)
        omega = spectral_cluster(dec, max_clusters, gap_tol)
    report.update(clusters=len(omega.lambdas), gap_tol=gap_tol, commutator=commutator)

    new_x = [np.zeros((n, n), dtype=complex) for _ in xs]
    new_u = np.zeros((n, n), dtype=complex)
    for k, (lam, basis) in enumerate(zip(omega.lambdas, omega.bases)):
        d = basis.shape[1]
        with _stage(f"finite-order-rounding (cluster {k})", report):
            approx = []
            for x, order in zip(xs, orders):
                y = polar_unitary(dagger(basis) @ x @ basis) * principal_power(lam, -1.0 / order)
                approx.append(ProjectionFamily(order_decomposition(y, order), d))
        with _stage(f"rank-rounding (cluster {k})", report):
            target = [[r / d for r in fam.ranks] for fam in approx]
            ranks = nearest_feasible_ranks(sys, target, d)
        with _stage(f"alignment (cluster {k})", report):
            fams = align_system(sys, approx, ranks)
        for i, (fam, order) in enumerate(zip(fams, orders)):
            block = fam.assemble(roots_of_unity(order)) * principal_power(lam, 1.0 / order)
            new_x[i] += basis @ block @ dagger(basis)
        if hnn:
            with _stage(f"conjugator (cluster {k})", report):
                v = conjugating_unitary(fams[0], fams[-1], dagger(basis) @ t[0] @ basis)
            new_u += basis @ v @ dagger(basis)

    mats = list(t.matrices)
    mats[off : off + len(xs)] = new_x
    if hnn:
        mats[0] = new_u
    out = UnitaryTuple(tuple(mats))
    defect_after = relation_defect(p, out)
    record = StabilityRecord(
        dim=n,
        preset=p.describe(),
        defect_before=defect_before,
        defect_after=defect_after,
        distance=t.distances(out),
        clusters=len(omega.lambdas),
        seed=opts.seed,
        wall_time=time.perf_counter() - start,
    )
    if not defect_after <= opts.defect_threshold:
        report["defect_after"] = defect_after
        raise StabilizationError(
            f"corrected tuple has defect {defect_after:.3e} > {opts.defect_threshold:.1e}", "verification", report
        )
    return out, record


def stabilize_chain(p: GroupPresentation, t: UnitaryTuple, opts: StabilizeOptions | None = None):
    """Exact representation of ``<x_i | x_i^{a_i} = x_{i+1}^{b_i}>`` near ``t``.

    Returns ``(tuple, record)``. Raises :class:`StabilizationError` naming the
    failing stage; the result is never returned with a defect above
    ``opts.defect_threshold``.
    """
    if p.case != "chain":
        raise PresentationError("stabilize_chain needs a chain presentation")
    return _stabilize(p, t, opts or StabilizeOptions(), hnn=False)


def stabilize_case2(p: GroupPresentation, t: UnitaryTuple, opts: StabilizeOptions | None = None):
    """Exact representation of the HNN-type presentation near ``t = (U, X_1, ..., X_m)``."""
    if p.case != "hnn-chain":
        raise PresentationError("stabilize_case2 needs an hnn-chain presentation")
    return _stabilize(p, t, opts or StabilizeOptions(), hnn=True)


def stabilize(p: GroupPresentation, t: UnitaryTuple, opts: StabilizeOptions | None = None):
    if p.case == "chain":
        return stabilize_chain(p, t, opts)
    if p.case == "hnn-chain":
        return stabilize_case2(p, t, opts)
    raise PresentationError(f"no corrector for {p.describe()!r}")


# --------------------------------------------------------------------------
# samplers


def _random_target(sys: LinearProjectionSystem, rng: np.random.Generator) -> list[list[float]]:
    fams = [list(rng.dirichlet(np.ones(sys.sizes[0])))]
    for i in range(len(sys.sizes) - 1):
        nxt = [0.0] * sys.sizes[i + 1]
        for e in sys.block(i):
            mass = sum(fams[i][s] for s in e.left)
            for s, w in zip(e.right, rng.dirichlet(np.ones(len(e.right)))):
                nxt[s] = mass * w
        fams.append(nxt)
    return fams


def _random_composition(total: int, parts: int, rng: np.random.Generator) -> list[int]:
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else []
    edges = np.concatenate([[0], cuts, [total]]).astype(int)
    return [int(v) for v in np.diff(edges)]


def sample_exact_rep(p: GroupPresentation, dim: int, seed: int, max_clusters: int = 4) -> UnitaryTuple:
    """Random exact representation of a chain or hnn-chain presentation.

    Draws ``s <= min(dim, max_clusters)`` well separated central phases, a
    random cluster size for each, a feasible rank vector per cluster (random
    traces rounded by :func:`nearest_feasible_ranks`), and Haar-random frames
    at every stage of the lifting, so the generators do not commute.
    """
    if p.case not in ("chain", "hnn-chain"):
        raise PresentationError("sample_exact_rep needs a chain or hnn-chain presentation")
    if dim < 1:
        raise ValueError("dim must be positive")
    hnn = p.case == "hnn-chain"
    rng = np.random.default_rng(seed)
    orders = p.orders
    sys = cyclic_system(p.a, p.b) if hnn else chain_system(p.a, p.b)
    s = int(rng.integers(1, min(dim, max_clusters) + 1))
    offset = rng.uniform(-math.pi, math.pi)
    phases = offset + 2 * math.pi * np.arange(s) / s + rng.uniform(-math.pi / (4 * s), math.pi / (4 * s), size=s)
    sizes = _random_composition(dim, s, rng)
    frame = haar_unitary(dim, rng)

    xs = [np.zeros((dim, dim), dtype=complex) for _ in orders]
    u = np.zeros((dim, dim), dtype=complex)
    col = 0
    for phase, d in zip(phases, sizes):
        basis = frame[:, col : col + d]
        col += d
        lam = np.exp(1j * phase)
        ranks = nearest_feasible_ranks(sys, _random_target(sys, rng), d)
        fams = [synthesize_family(ranks[0], haar_unitary(d, rng))]
        for i in range(len(orders) - 1):
            bases: list = [None] * sys.sizes[i + 1]
            for e in sys.block(i):
                corner = np.hstack([fams[i].bases[j] for j in e.left])
                corner = corner @ haar_unitary(corner.shape[1], rng) if corner.shape[1] else corner
                piece = synthesize_family([ranks[i + 1][j] for j in e.right], corner) if corner.shape[1] else None
                for idx, j in enumerate(e.right):
                    bases[j] = piece.bases[idx] if piece is not None else corner[:, :0]
            fams.append(ProjectionFamily(bases, d))
        for i, (fam, order) in enumerate(zip(fams, orders)):
            block = fam.assemble(roots_of_unity(order)) * principal_power(lam, 1.0 / order)
            xs[i] += basis @ block @ dagger(basis)
        if hnn:
            v = np.zeros((d, d), dtype=complex)
            for bp, bq in zip(fams[0].bases, fams[-1].bases):
                r = bp.shape[1]
                if r:
                    v += bq @ haar_unitary(r, rng) @ dagger(bp)
            u += basis @ v @ dagger(basis)
    mats = ([u] if hnn else []) + xs
    return UnitaryTuple(tuple(mats))


def gue(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with Gaussian entries, scaled to ``||H||_2 = 1``."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (a + dagger(a)) / 2
    return h / math.sqrt(np.vdot(h, h).real / n)


def perturb(t: UnitaryTuple, eps: float, seed: int) -> UnitaryTuple:
    """``U_i -> U_i exp(i eps H_i)`` with independent normalized GUE ``H_i``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return UnitaryTuple(tuple(m.copy() for m in t))
    rng = np.random.default_rng(seed)
    out = []
    for m in t:
        w, v = np.linalg.eigh(gue(t.dim, rng))
        out.append(m @ ((v * np.exp(1j * eps * w)) @ dagger(v)))
    return UnitaryTuple(tuple(out))
