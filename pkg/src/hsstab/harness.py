"""Seeded experiments: sample an exact representation, perturb it, correct it,
and record how far the generators moved.

Every trial draws its representation and perturbation direction from a seed
derived from ``(seed, dim, trial)`` only, so all noise levels of a sweep act
on the same representations along the same directions.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from statistics import median
from typing import Callable, Sequence

import numpy as np

from hsstab import characters, linalg, presentations, projections, stabilizers
from hsstab.errors import HSStabError, StabilizationError
from hsstab.presentations import GroupPresentation, UnitaryTuple, parse_preset, relation_defect
from hsstab.stabilizers import StabilityRecord, StabilizeOptions

TOLERANCE_KEYS = ("max_clusters", "gap_tol", "input_unitarity_tol", "merge_tol", "defect_threshold")


def trial_seeds(seed: int, dim: int, trial: int) -> tuple[int, int]:
    """Independent seeds for the sampler and the perturbation of one trial."""
    ss = np.random.SeedSequence([int(seed), int(dim), int(trial)])
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int(a), int(b)


@dataclass(frozen=True)
class TrialCell:
    preset: str
    dim: int
    eps: float
    trial: int = 0
    seed: int = 0
    tolerances: tuple = ()

    def options(self) -> StabilizeOptions:
        return StabilizeOptions(seed=self.seed, **dict(self.tolerances))


@dataclass
class ExperimentConfig:
    preset: str
    dims: list[int]
    eps: list[float]
    trials: int = 1
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        parse_preset(self.preset)
        if not self.dims or not self.eps:
            raise ValueError("dims and eps grids must be nonempty")
        if any(int(d) != d or d < 1 for d in self.dims):
            raise ValueError("dims must be positive integers")
        if any(e < 0 or not math.isfinite(e) for e in self.eps):
            raise ValueError("eps values must be finite and nonnegative")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        unknown = set(self.tolerances) - set(TOLERANCE_KEYS)
        if unknown:
            raise ValueError(f"unknown tolerance overrides: {sorted(unknown)}")
        self.dims = [int(d) for d in self.dims]
        self.eps = [float(e) for e in self.eps]

    def cells(self) -> list[TrialCell]:
        tol = tuple(sorted(self.tolerances.items()))
        return [
            TrialCell(self.preset, d, e, t, self.seed, tol)
            for d in self.dims
            for e in self.eps
            for t in range(self.trials)
        ]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {"preset", "dims", "eps", "trials", "seed", "tolerances", "out"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**obj)


def record_for(
    p: GroupPresentation,
    t: UnitaryTuple,
    opts: StabilizeOptions,
    eps: float | None = None,
    trial: int | None = None,
) -> tuple[UnitaryTuple | None, StabilityRecord]:
    """Correct ``t`` and always return a record; failures set ``ok=False``."""
    start = time.perf_counter()
    try:
        out, rec = stabilizers.stabilize(p, t, opts)
    except StabilizationError as exc:
        try:
            before = relation_defect(p, t)
        except (ValueError, IndexError):
            before = math.nan
        rec = StabilityRecord(
            dim=t.dim,
            preset=p.describe(),
            defect_before=before,
            defect_after=math.nan,
            distance=[],
            clusters=0,
            seed=opts.seed,
            wall_time=time.perf_counter() - start,
            ok=False,
            error=str(exc),
            stage=exc.stage,
        )
        out = None
    rec.eps = eps
    rec.trial = trial
    return out, rec


def run_trial(cell: TrialCell) -> StabilityRecord:
    p = parse_preset(cell.preset)
    rep_seed, noise_seed = trial_seeds(cell.seed, cell.dim, cell.trial)
    exact = stabilizers.sample_exact_rep(p, cell.dim, rep_seed)
    noisy = stabilizers.perturb(exact, cell.eps, noise_seed)
    _, rec = record_for(p, noisy, cell.options(), cell.eps, cell.trial)
    return rec


@dataclass
class SweepResult:
    records: list[StabilityRecord]
    summary: dict

    @property
    def failures(self) -> int:
        return sum(not r.ok for r in self.records)


def summarize(records: Sequence[StabilityRecord]) -> dict:
    """Median per-generator distance for each eps, pooled over dims and trials."""
    by_eps: dict[float, list[StabilityRecord]] = {}
    for r in records:
        by_eps.setdefault(r.eps, []).append(r)
    curve = []
    for eps in sorted(by_eps, reverse=True):
        rs = by_eps[eps]
        good = [r for r in rs if r.ok]
        dists = [d for r in good for d in r.distance]
        curve.append(
            {
                "eps": eps,
                "trials": len(rs),
                "failures": len(rs) - len(good),
                "median_distance": median(dists) if dists else math.nan,
                "max_distance": max(dists) if dists else math.nan,
                "max_defect_after": max((r.defect_after for r in good), default=math.nan),
            }
        )
    meds = [c["median_distance"] for c in curve]
    return {
        "curve": curve,
        "nonincreasing": all(a >= b for a, b in zip(meds, meds[1:])),
        "failures": sum(c["failures"] for c in curve),
        "records": len(records),
    }


def sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Run every cell of the grid; records come back in grid order."""
    cells = config.cells()
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_trial, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        records = [run_trial(c) for c in cells]
    return SweepResult(records, summarize(records))


def summary_csv(summary: dict) -> str:
    lines = ["eps,trials,failures,median_distance,max_distance,max_defect_after"]
    for c in summary["curve"]:
        lines.append(
            f"{c['eps']!r},{c['trials']},{c['failures']},{c['median_distance']!r},"
            f"{c['max_distance']!r},{c['max_defect_after']!r}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# release checks


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name:<34} {self.value:.3e} <= {self.threshold:.1e}{extra}"


def _check(name: str, fn: Callable[[], float], threshold: float) -> Check:
    try:
        value = float(fn())
    except (HSStabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return Check(name, False, math.inf, threshold, f"{type(exc).__name__}: {exc}")
    return Check(name, value <= threshold, value, threshold)


def _eig_residual() -> float:
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (1, 2, 5, 16, 64):
        u = linalg.haar_unitary(n, rng)
        d = linalg.unitary_eig(u)
        worst = max(worst, float(np.linalg.norm(d.reassemble() - u, 2)))
    worst = max(worst, float(np.linalg.norm(linalg.unitary_eig(np.eye(7)).reassemble() - np.eye(7), 2)))
    return worst


def _branch_residual() -> float:
    phases = np.array([0.0, 1.0, -1.0, 3.0, -3.0, math.pi])
    want = np.exp(1j * phases / 2)
    got = np.diag(linalg.branch_power(np.diag(np.exp(1j * phases)), 0.5))
    worst = float(np.max(np.abs(got - want)))
    rng = np.random.default_rng(2)
    for n, m in ((1, 3), (6, 7), (32, 2)):
        u = linalg.haar_unitary(n, rng)
        r = linalg.branch_power(u, 1.0 / m)
        worst = max(worst, float(np.linalg.norm(np.linalg.matrix_power(r, m) - u, 2)))
    return worst


def _polar_residual() -> float:
    rng = np.random.default_rng(3)
    worst = 0.0
    for n in (1, 4, 20):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        res = linalg.polar_decompose(a)
        worst = max(
            worst,
            float(np.linalg.norm(res.unitary @ res.positive - a, 2)) / max(1.0, float(np.linalg.norm(a, 2))),
            linalg.unitarity_residual(res.unitary),
            max(0.0, -float(np.linalg.eigvalsh(res.positive).min())),
        )
    return worst


def _order_residual() -> float:
    rng = np.random.default_rng(4)
    worst = 0.0
    for n, m in ((1, 2), (9, 5), (24, 35)):
        x = linalg.project_to_order(linalg.haar_unitary(n, rng), m)
        worst = max(worst, float(np.linalg.norm(np.linalg.matrix_power(x, m) - np.eye(n), 2)))
    return worst


PRESETS = ("chain:2,5:3,7", "chain:2:2", "hnn:2,3:3,2")


def _exact_defect() -> float:
    worst = 0.0
    for name in PRESETS:
        p = parse_preset(name)
        for dim in (1, 12):
            worst = max(worst, presentations.relation_defect(p, stabilizers.sample_exact_rep(p, dim, dim)))
    return worst


def _rank_gap() -> float:
    """Excess L1 deviation of the solver over brute force on a small system."""
    rng = np.random.default_rng(5)
    sys = projections.chain_system((2,), (3,))
    dim = 4
    grids = [[c for c in itertools.product(range(dim + 1), repeat=n) if sum(c) == dim] for n in sys.sizes]
    feasible = [rv for rv in map(projections.RankVector, itertools.product(*grids)) if rv.is_feasible(sys, dim)]
    worst = 0.0
    for _ in range(10):
        target = [list(rng.dirichlet(np.ones(n))) for n in sys.sizes]
        got = projections.nearest_feasible_ranks(sys, target, dim)
        if not got.is_feasible(sys, dim):
            return math.inf
        opt = min(r.deviation(target, dim) for r in feasible)
        worst = max(worst, got.deviation(target, dim) - opt)
    return worst


def _conjugator_residual() -> float:
    rng = np.random.default_rng(6)
    n = 12
    ranks = [3, 0, 5, 4]
    p = projections.synthesize_family(ranks, linalg.haar_unitary(n, rng))
    q = projections.synthesize_family(ranks, linalg.haar_unitary(n, rng))
    v = projections.conjugating_unitary(p, q, linalg.haar_unitary(n, rng))
    return max(float(np.linalg.norm(v @ a @ linalg.dagger(v) - b, 2)) for a, b in zip(p.projections, q.projections))


def _soundness() -> float:
    worst = 0.0
    for name in PRESETS:
        for dim in (1, 8, 24):
            rec = run_trial(TrialCell(name, dim, 1e-3, 0, 11))
            worst = max(worst, rec.defect_after if rec.ok else math.inf)
    return worst


def _idempotence() -> float:
    worst = 0.0
    for name in PRESETS:
        p = parse_preset(name)
        for dim in (1, 10, 30):
            t = stabilizers.sample_exact_rep(p, dim, 100 + dim)
            out, _ = stabilizers.stabilize(p, t)
            worst = max(worst, max(t.distances(out)))
    return worst


def _clock_shift() -> float:
    worst = 0.0
    for p, q in ((0, 1), (1, 3), (89, 144), (144, 233)):
        u, v = characters.clock_shift_rep(p, q)
        w = np.exp(2j * math.pi * p / q)
        comm = u @ v @ linalg.dagger(u) @ linalg.dagger(v)
        worst = max(worst, float(np.abs(comm - w * np.eye(q)).max()))
        worst = max(worst, presentations.relation_defect(presentations.preset_heisenberg(), UnitaryTuple((u, v))))
    return worst


def _heisenberg_traces() -> float:
    worst = 0.0
    for p, q in ((1, 3), (2, 5), (3, 8)):
        u, v = characters.clock_shift_rep(p, q)
        z = u @ v @ linalg.dagger(u) @ linalg.dagger(v)
        for a in range(-q, q + 1, max(1, q // 3)):
            for b in range(-q, q + 1, max(1, q // 3)):
                for c in (0, 1):
                    m = (
                        np.linalg.matrix_power(u if a >= 0 else linalg.dagger(u), abs(a))
                        @ np.linalg.matrix_power(v if b >= 0 else linalg.dagger(v), abs(b))
                        @ np.linalg.matrix_power(z, c)
                    )
                    exp = np.trace(m) / q
                    worst = max(worst, abs(exp - characters.heisenberg_word_trace(a, b, c, p, q)))
    return worst


def _delta_e() -> float:
    w = np.exp(2j * math.pi / 3)
    got = characters.tensor_power_delta([characters.augmented_trace(1, w)], 0.01).power
    return abs(got - 7)


def _mixing() -> float:
    r = characters.mix_traces([1, 2], [Fraction(1, 3), Fraction(2, 3)], [[1, Fraction(-1)], [1, Fraction(1, 2)]])
    want = (Fraction(1), Fraction(0))
    return float(sum(abs(x - y) for x, y in zip(r.traces, want)) + sum(abs(x - y) for x, y in zip(r.block_traces, want)))


def _induced() -> float:
    rng = np.random.default_rng(7)
    worst = 0.0
    for g in (characters.dihedral_group(4), characters.quaternion_group(), characters.heisenberg_mod(3), characters.cyclic_group(1)):
        spec = characters.random_central_character(g, rng)
        chi = spec.as_dict()
        for x in range(g.order):
            m = characters.induced_matrix(g, spec, x)
            worst = max(worst, abs(np.trace(m) / m.shape[0] - chi.get(x, 0)))
    return worst


def verify_checks() -> list[Check]:
    """Invariant suite of every module, at small dimensions."""
    spec = [
        ("linalg.unitary_eig", _eig_residual, 1e-12),
        ("linalg.branch_power", _branch_residual, 1e-12),
        ("linalg.polar_decompose", _polar_residual, 1e-12),
        ("linalg.project_to_order", _order_residual, 1e-12),
        ("presentations.exact_defect", _exact_defect, 1e-12),
        ("projections.rank_optimality", _rank_gap, 1e-9),
        ("projections.conjugating_unitary", _conjugator_residual, 1e-11),
        ("stabilizers.soundness", _soundness, stabilizers.DEFECT_THRESHOLD),
        ("stabilizers.idempotence", _idempotence, 1e-8),
        ("characters.clock_shift", _clock_shift, 1e-14),
        ("characters.heisenberg_trace", _heisenberg_traces, 1e-12),
        ("characters.delta_e", _delta_e, 0.0),
        ("characters.mix_exact", _mixing, 0.0),
        ("characters.induced_trace", _induced, 1e-12),
    ]
    return [_check(n, f, t) for n, f, t in spec]
