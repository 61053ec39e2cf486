
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import (
    best_deviation,
    feasible_rank_vectors,
    random_hermitian,
    random_system,
    random_target,
    root_coincidences,
    su_exp,
)

from hsstab.errors import InfeasibleRanksError, RankMismatchError
from hsstab.linalg import dagger, haar_unitary, hs_norm, order_decomposition, principal_power
from hsstab.presentations import preset_chain
from hsstab.projections import (
    Equation,
    LinearProjectionSystem,
    ProjectionFamily,
    RankVector,
    align_system,
    chain_system,
    conjugating_unitary,
    cyclic_system,
    largest_remainder,
    nearest_feasible_ranks,
    synthesize_family,
    system_residual,
)
from hsstab.stabilizers import sample_exact_rep

# chain_system


def test_chain_system_first_block():
    lines = chain_system((2, 5), (3, 7)).format().splitlines()
    assert lines[:5] == [
        "q1+q6=r1+r6+r11",
        "q2+q7=r2+r7+r12",
        "q3+q8=r3+r8+r13",
        "q4+q9=r4+r9+r14",
        "q5+q10=r5+r10+r15",
    ]


def test_chain_system_second_block():
    lines = chain_system((2, 5), (3, 7)).format().splitlines()
    assert lines[5] == "r1+r4+r7+r10+r13=s1+s4+s7+s10+s13+s16+s19"
    assert len(lines) == 8
    assert all(len(l.split("=")[0].split("+")) == 5 and len(l.split("=")[1].split("+")) == 7 for l in lines[5:])


def test_chain_system_smallest_case():
    sys = chain_system((2,), (2,))
    assert sys.sizes == (2, 2)
    assert [(e.left, e.right) for e in sys.equations] == [((0, 1), (0, 1))]


@pytest.mark.parametrize("a,b", [((2,), (2,)), ((2,), (3,)), ((2, 5), (3, 7)), ((3, 2), (2, 3)), ((4, 3), (2, 6)), ((2, 2, 3), (3, 2, 2))])
def test_chain_system_matches_root_coincidences(a, b):
    sys = chain_system(a, b)
    n, blocks = root_coincidences(a, b)
    assert sys.sizes == tuple(n)
    for i, want in enumerate(blocks):
        got = {(frozenset(e.left), frozenset(e.right)) for e in sys.block(i)}
        assert got == want
    sys.validate()


def test_cyclic_system_equalities():
    sys = cyclic_system((2, 3), (3, 2))
    assert sys.sizes == (6, 9, 6)
    assert len(sys.equalities) == 6
    with pytest.raises(ValueError):
        cyclic_system((2,), (3,))


def test_system_json_round_trip():
    sys = cyclic_system((2, 3), (3, 2))
    assert LinearProjectionSystem.from_json(sys.to_json()) == sys


def test_invalid_system_rejected():
    with pytest.raises(ValueError):
        LinearProjectionSystem((2, 2), (Equation(0, (0,), (0,)),)).validate()


# largest remainder


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.integers(0, 40))
def test_largest_remainder_properties(x, total):
    if sum(x) == 0:
        x = [1.0] * len(x)
    r = largest_remainder(x, total)
    s = sum(x)
    assert sum(r) == total
    assert all(v >= 0 for v in r)
    assert all(abs(v - total * xi / s) < 1 for v, xi in zip(r, x))


# nearest_feasible_ranks


def test_ranks_exact_targets_are_fixed():
    sys = chain_system((2, 5), (3, 7))
    p = preset_chain((2, 5), (3, 7))
    t = sample_exact_rep(p, 24, 3, max_clusters=1)
    lam = np.trace(np.linalg.matrix_power(t[0], 10)) / 24
    target = []
    for x, n in zip(t, p.orders):
        fam = order_decomposition(x * principal_power(lam, -1 / n), n)
        target.append([b.shape[1] / 24 for b in fam])
    r = nearest_feasible_ranks(sys, target, 24)
    assert r.to_json() == [[round(24 * v) for v in tf] for tf in target]
    assert r.deviation(target, 24) == pytest.approx(0, abs=1e-9)


def test_ranks_trivial_representation():
    sys = chain_system((2, 5), (3, 7))
    n = 9
    target = [[0.0] * (s - 1) + [1.0] for s in sys.sizes]
    r = nearest_feasible_ranks(sys, target, n)
    assert r[0][9] == n and r[1][14] == n and r[2][20] == n
    assert sum(r.flat()) == 3 * n
    assert r.is_feasible(sys, n)


@pytest.mark.parametrize("dim", [7, 13, 22])
def test_ranks_equal_targets(dim):
    sys = chain_system((2, 5), (3, 7))
    target = [[1 / s] * s for s in sys.sizes]
    r = nearest_feasible_ranks(sys, target, dim)
    assert r.is_feasible(sys, dim)
    for fam in r.ranks:
        assert max(fam) - min(fam) <= 1


def test_ranks_shape_and_sign_errors():
    sys = chain_system((2,), (2,))
    with pytest.raises(ValueError):
        nearest_feasible_ranks(sys, [[0.5, 0.5]], 2)
    with pytest.raises(ValueError):
        nearest_feasible_ranks(sys, [[-0.5, 1.5], [0.5, 0.5]], 2)


def test_ranks_mandatory_slots():
    sys = chain_system((2,), (2,))
    with pytest.raises(InfeasibleRanksError, match="family 0"):
        nearest_feasible_ranks(sys, [[0.5, 0.5], [0.5, 0.5]], 1, mandatory=[(0, 0), (0, 1)])
    r = nearest_feasible_ranks(sys, [[1.0, 0.0], [1.0, 0.0]], 3, mandatory=[(0, 1)])
    assert r[0][1] >= 1 and r.is_feasible(sys, 3)


def test_ranks_infeasible_equalities_reported():
    # the equalities make all four ranks equal, so each family sums to an even number
    sys = LinearProjectionSystem((2, 2), (Equation(0, (0, 1), (0, 1)),), (((0, 1), (1, 0)), ((0, 0), (1, 1)), ((0, 0), (1, 0))))
    assert len(feasible_rank_vectors(sys, 3)) == 0
    with pytest.raises(InfeasibleRanksError):
        nearest_feasible_ranks(sys, [[0.5, 0.5], [0.5, 0.5]], 3)
    assert nearest_feasible_ranks(sys, [[0.9, 0.1], [0.5, 0.5]], 4).to_json() == [[2, 2], [2, 2]]


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_ranks_agree_with_brute_force(seed, dim):
    rng = np.random.default_rng(seed)
    sys = random_system(rng)
    target = random_target(sys, rng)
    feas = feasible_rank_vectors(sys, dim)
    if len(feas) == 0:
        with pytest.raises(InfeasibleRanksError):
            nearest_feasible_ranks(sys, target, dim)
        return
    r = nearest_feasible_ranks(sys, target, dim)
    assert r.is_feasible(sys, dim)
    assert r.deviation(target, dim) == pytest.approx(best_deviation(feas, target, dim), abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_ranks_idempotent_on_feasible_integers(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng)
    dim = int(rng.integers(1, 6))
    feas = feasible_rank_vectors(sys, dim)
    if len(feas) == 0:
        return
    row = feas[int(rng.integers(len(feas)))]
    off = np.cumsum((0,) + sys.sizes)
    target = [list(row[off[f] : off[f + 1]] / dim) for f in range(len(sys.sizes))]
    r = nearest_feasible_ranks(sys, target, dim)
    assert r.flat() == list(row)


def test_rank_vector_violations():
    sys = chain_system((2,), (2,))
    assert RankVector(((1, 1), (2, 0))).is_feasible(sys, 2)
    v = RankVector(((1, 1), (1, 0))).violations(sys, 2)
    assert any("family 1" in s for s in v) and any("equation" in s for s in v)


# synthesize_family


def test_synthesize_examples(rng):
    fam = synthesize_family([3], np.eye(3))
    assert np.array_equal(fam.projections[0], np.eye(3))
    fam = synthesize_family([1, 1], np.eye(2))
    assert np.array_equal(fam.projections[0], np.diag([1, 0])) and np.array_equal(fam.projections[1], np.diag([0, 1]))
    fam = synthesize_family([2, 0, 3, 1], haar_unitary(6, rng))
    assert fam.residual() <= 1e-14
    assert fam.ranks == [2, 0, 3, 1]
    with pytest.raises(InfeasibleRanksError):
        synthesize_family([1, 1], np.eye(3))


def test_family_from_projections_rounds(rng):
    fam = synthesize_family([2, 1, 3], haar_unitary(6, rng))
    h = random_hermitian(6, rng)
    w = su_exp(h, 1e-3)
    approx = [w @ p @ dagger(w) + 1e-4 * np.eye(6) for p in fam.projections]
    back = ProjectionFamily.from_projections(approx)
    assert back.ranks == [2, 1, 3]


# align_system


def _exact_families(a, b, dim, seed):
    p = preset_chain(a, b)
    t = sample_exact_rep(p, dim, seed, max_clusters=1)
    lam = np.trace(np.linalg.matrix_power(t[0], p.orders[0])) / dim
    lam /= abs(lam)
    fams = [
        ProjectionFamily(order_decomposition(x * principal_power(lam, -1 / n), n), dim)
        for x, n in zip(t, p.orders)
    ]
    ranks = RankVector(tuple(tuple(f.ranks) for f in fams))
    return chain_system(a, b), fams, ranks


def _family_distance(f, g):
    return max(hs_norm(p - q) for p, q in zip(f.projections, g.projections))


def test_align_exact_input_unchanged():
    sys, fams, ranks = _exact_families((2, 5), (3, 7), 20, 1)
    assert system_residual(sys, fams) <= 1e-12
    out = align_system(sys, fams, ranks)
    assert max(_family_distance(f, g) for f, g in zip(fams, out)) <= 1e-10
    assert system_residual(sys, out) <= 1e-12


def test_align_rank_zero_slots_are_zero():
    sys, fams, ranks = _exact_families((2, 5), (3, 7), 4, 2)
    out = align_system(sys, fams, ranks)
    zero = [(i, k) for i, f in enumerate(ranks.ranks) for k, r in enumerate(f) if r == 0]
    assert zero
    for i, k in zero:
        assert np.array_equal(out[i].projections[k], np.zeros((4, 4)))


@pytest.mark.parametrize("a,b", [((2, 5), (3, 7)), ((2,), (2,)), ((3, 2), (2, 3))])
def test_align_distance_is_linear_in_eps(a, b):
    sys, fams, ranks = _exact_families(a, b, 30, 5)
    rng = np.random.default_rng(0)
    hs = [random_hermitian(30, rng) for _ in fams]
    dists = []
    epss = [1e-2, 1e-3, 1e-4]
    for eps in epss:
        approx = []
        for f, h in zip(fams, hs):
            w = su_exp(h, eps)
            approx.append([w @ p @ dagger(w) for p in f.projections])
        out = align_system(sys, approx, ranks)
        assert system_residual(sys, out) <= 1e-12
        assert [f.ranks for f in out] == [list(r) for r in ranks.ranks]
        dists.append(max(_family_distance(f, g) for f, g in zip(fams, out)))
    slope = np.polyfit(np.log10(epss), np.log10(dists), 1)[0]
    assert 0.8 <= slope <= 1.2
    assert dists[-1] <= 1e-2


def test_align_rejects_infeasible_ranks():
    sys, fams, _ = _exact_families((2,), (2,), 4, 0)
    with pytest.raises(InfeasibleRanksError):
        align_system(sys, fams, RankVector(((4, 0), (0, 3))))


# conjugating_unitary


def _coord(n, order):
    eye = np.eye(n)
    return ProjectionFamily([eye[:, [k]] for k in order], n)


def test_conjugator_examples():
    p = _coord(2, [0, 1])
    q = _coord(2, [1, 0])
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.allclose(conjugating_unitary(p, p, np.eye(2)), np.eye(2))
    assert np.allclose(conjugating_unitary(p, q, swap), swap)
    v = conjugating_unitary(p, q, np.eye(2))
    for a, b in zip(p.projections, q.projections):
        assert np.allclose(v @ a @ dagger(v), b, atol=1e-15)
    assert np.allclose(dagger(v) @ v, np.eye(2))


def test_conjugator_rank_mismatch(rng):
    p = synthesize_family([2, 1], haar_unitary(3, rng))
    q = synthesize_family([1, 2], haar_unitary(3, rng))
    with pytest.raises(RankMismatchError):
        conjugating_unitary(p, q, np.eye(3))


@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_conjugator_intertwines(seed, n):
    rng = np.random.default_rng(seed)
    ranks = list(np.bincount(rng.integers(0, 4, size=n), minlength=4))
    p = synthesize_family(ranks, haar_unitary(n, rng))
    q = synthesize_family(ranks, haar_unitary(n, rng))
    v = conjugating_unitary(p, q, haar_unitary(n, rng))
    assert np.linalg.norm(dagger(v) @ v - np.eye(n), 2) <= 1e-11
    for a, b in zip(p.projections, q.projections):
        assert np.linalg.norm(v @ a @ dagger(v) - b, 2) <= 1e-11


@pytest.mark.parametrize("delta", [1e-2, 1e-3])
def test_conjugator_close_to_almost_intertwining_hint(delta, rng):
    n = 16
    ranks = [5, 0, 4, 7]
    p = synthesize_family(ranks, haar_unitary(n, rng))
    q = synthesize_family(ranks, haar_unitary(n, rng))
    v0 = conjugating_unitary(p, q, haar_unitary(n, rng))
    x = v0 @ su_exp(random_hermitian(n, rng), delta)
    v = conjugating_unitary(p, q, x)
    assert hs_norm(v - x) <= 10 * delta
