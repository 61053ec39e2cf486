
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsstab.errors import PresentationError, StabilizationError
from hsstab.linalg import dagger, haar_unitary, hs_norm, unitarity_residual
from hsstab.presentations import UnitaryTuple, parse_preset, preset_case2, preset_chain, preset_heisenberg, relation_defect
from hsstab.stabilizers import (
    StabilizeOptions,
    default_gap_tol,
    gue,
    perturb,
    sample_exact_rep,
    stabilize,
    stabilize_case2,
    stabilize_chain,
)

PRESETS = ["chain:2,5:3,7", "chain:2:2", "hnn:2,3:3,2", "chain:3,2:2,3", "hnn:4,3:2,6"]


# sampler


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("dim", [1, 2, 7, 30])
def test_sampler_is_exact(name, dim):
    p = parse_preset(name)
    t = sample_exact_rep(p, dim, 17)
    assert len(t) == p.num_generators and t.dim == dim
    assert relation_defect(p, t) <= 1e-10
    assert max(unitarity_residual(m) for m in t) <= 1e-12


def test_sampler_dim_one_scalars():
    p = preset_chain((2, 5), (3, 7))
    t = sample_exact_rep(p, 1, 4)
    x, y, z = (complex(m[0, 0]) for m in t)
    w = x**10
    assert abs(y**15 - w) < 1e-13 and abs(z**21 - w) < 1e-13
    assert relation_defect(p, t) <= 1e-12


def test_sampler_seeds():
    p = preset_chain((2, 5), (3, 7))
    a, b = sample_exact_rep(p, 12, 1), sample_exact_rep(p, 12, 2)
    assert max(a.distances(b)) > 1e-3
    c = sample_exact_rep(p, 12, 1)
    assert all(np.array_equal(x, y) for x, y in zip(a, c))


def test_sampler_is_noncommutative():
    p = preset_chain((2, 5), (3, 7))
    t = sample_exact_rep(p, 20, 8)
    assert np.linalg.norm(t[0] @ t[1] - t[1] @ t[0]) > 1e-3


def test_sampler_rejects():
    with pytest.raises(PresentationError):
        sample_exact_rep(preset_heisenberg(), 4, 0)
    with pytest.raises(ValueError):
        sample_exact_rep(preset_chain((2,), (2,)), 0, 0)


# perturb


def test_gue_normalized(rng):
    h = gue(9, rng)
    assert np.allclose(h, dagger(h))
    assert hs_norm(h) == pytest.approx(1.0, rel=1e-12)


def test_perturb_zero_is_identity():
    t = sample_exact_rep(preset_chain((2,), (2,)), 5, 0)
    s = perturb(t, 0.0, 3)
    assert all(np.array_equal(a, b) for a, b in zip(t, s))
    with pytest.raises(ValueError):
        perturb(t, -1e-3, 0)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-5])
def test_perturb_distance_bound(eps):
    t = sample_exact_rep(preset_chain((2, 5), (3, 7)), 16, 2)
    s = perturb(t, eps, 9)
    for d in t.distances(s):
        assert d <= eps * (1 + 1e-6)
        assert d >= eps * (1 - eps)  # |e^{ix} - 1| >= |x|(1 - x^2/24)
    assert max(unitarity_residual(m) for m in s) <= 1e-12


def test_perturb_defect_vanishes_with_eps():
    p = preset_chain((2, 5), (3, 7))
    t = sample_exact_rep(p, 10, 2)
    d = [relation_defect(p, perturb(t, e, 1)) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(x > y for x, y in zip(d, d[1:]))
    assert d[-1] < 1e-2


# correctors


def test_default_gap_tol():
    assert default_gap_tol(0.0, 1e-8) == pytest.approx(1e-7)
    assert default_gap_tol(1e-4, 1e-8) == pytest.approx(1e-2)
    assert default_gap_tol(0.5, 1e-8) == pytest.approx(5.0)


def test_options_validation():
    with pytest.raises(ValueError):
        StabilizeOptions(gap_tol=0)
    with pytest.raises(ValueError):
        StabilizeOptions(max_clusters=0)
    with pytest.raises(ValueError):
        StabilizeOptions(merge_tol=-1)


@pytest.mark.parametrize("name", PRESETS)
def test_identity_tuple_is_fixed(name):
    p = parse_preset(name)
    t = UnitaryTuple(tuple(np.eye(4, dtype=complex) for _ in range(p.num_generators)))
    out, rec = stabilize(p, t)
    assert max(t.distances(out)) <= 1e-12
    assert rec.defect_after <= 1e-12


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("dim", [1, 3, 12, 40])
def test_idempotent_on_exact_input(name, dim):
    p = parse_preset(name)
    t = sample_exact_rep(p, dim, 100 + dim)
    out, rec = stabilize(p, t)
    assert max(t.distances(out)) <= 1e-8
    assert rec.defect_after <= 1e-10
    assert rec.ok and rec.distance == pytest.approx(t.distances(out))


def test_case2_hand_example():
    p = preset_case2((2,), (2,))
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    x1 = np.diag([1.0, -1.0]).astype(complex)
    x2 = np.diag([-1.0, 1.0]).astype(complex)
    t = UnitaryTuple((swap, x1, x2))
    assert relation_defect(p, t) == 0
    out, _ = stabilize_case2(p, t)
    assert max(t.distances(out)) <= 1e-12


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_soundness_after_perturbation(name, eps):
    p = parse_preset(name)
    for seed in range(3):
        t = perturb(sample_exact_rep(p, 24, seed), eps, 1000 + seed)
        out, rec = stabilize(p, t)
        assert relation_defect(p, out) <= 1e-9
        assert rec.defect_after <= rec.defect_before + 1e-12
        assert max(unitarity_residual(m) for m in out) <= 1e-11
        # idempotence on the corrected output
        again, _ = stabilize(p, out)
        assert max(out.distances(again)) <= 1e-8


@settings(max_examples=15)
@given(st.sampled_from(PRESETS), st.integers(1, 20), st.integers(0, 2**32 - 1), st.sampled_from([0.0, 1e-4, 1e-3, 3e-2]))
def test_soundness_property(name, dim, seed, eps):
    p = parse_preset(name)
    t = perturb(sample_exact_rep(p, dim, seed), eps, seed ^ 0xABCDEF)
    out, rec = stabilize(p, t)
    assert rec.defect_after <= 1e-9
    assert relation_defect(p, out) <= 1e-9


@pytest.mark.parametrize("name", ["chain:2,5:3,7", "hnn:2,3:3,2"])
def test_conjugation_equivariance(name):
    p = parse_preset(name)
    rng = np.random.default_rng(4)
    for seed in range(3):
        t = perturb(sample_exact_rep(p, 18, seed), 1e-3, seed + 50)
        q = haar_unitary(18, rng)
        a, _ = stabilize(p, t.conjugate(q))
        b, _ = stabilize(p, t)
        assert max(a.distances(b.conjugate(q))) <= 1e-8


def test_distance_shrinks_with_eps():
    p = preset_chain((2, 5), (3, 7))
    t = sample_exact_rep(p, 30, 6)
    meds = []
    for eps in (1e-2, 1e-3, 1e-4):
        out, rec = stabilize(p, perturb(t, eps, 7))
        meds.append(np.median(rec.distance))
    assert meds[0] > meds[1] > meds[2]
    assert meds[2] <= 1e-3


def test_wrong_presentation_kind():
    t = UnitaryTuple((np.eye(2), np.eye(2)))
    with pytest.raises(PresentationError):
        stabilize_case2(preset_chain((2,), (2,)), t)
    with pytest.raises(PresentationError):
        stabilize_chain(preset_case2((2,), (2,)), UnitaryTuple((np.eye(2),) * 3))
    with pytest.raises(PresentationError):
        stabilize(preset_heisenberg(), t)


def test_failures_name_the_stage():
    p = preset_chain((2,), (2,))
    with pytest.raises(StabilizationError) as info:
        stabilize(p, UnitaryTuple((np.eye(2), np.diag([1.0, 2.0]))))
    assert info.value.stage == "input"
    with pytest.raises(StabilizationError) as info:
        stabilize(p, UnitaryTuple((np.eye(2),)))
    assert info.value.stage == "input"


def test_far_input_is_still_corrected():
    # random unitaries are far from any representation; the output must still be exact
    p = preset_chain((2, 5), (3, 7))
    rng = np.random.default_rng(3)
    t = UnitaryTuple(tuple(haar_unitary(10, rng) for _ in range(3)))
    out, rec = stabilize(p, t)
    assert relation_defect(p, out) <= 1e-9
    assert rec.clusters >= 1


def test_record_json_fields():
    p = preset_chain((2,), (2,))
    _, rec = stabilize(p, sample_exact_rep(p, 3, 0))
    obj = rec.to_json()
    for key in ("dim", "preset", "defect_before", "defect_after", "distance", "clusters", "seed", "wall_time"):
        assert key in obj
    assert obj["preset"] == "chain:2:2"
