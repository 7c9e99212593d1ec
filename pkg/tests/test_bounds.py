import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyinfo import algorithms as alg, bounds, entropy, measurement as ms, spaces
from noisyinfo.errors import AdmissibilityViolation, InvalidParameters, UnsupportedInstance
from noisyinfo.spaces import INF, Diagonal, Identity


def test_linear_floor_examples():
    c = bounds.linear_floor(Identity(2, INF, 5), 0.3)
    assert c.claimed_bound == pytest.approx(0.3) and c.verified
    c = bounds.linear_floor(Diagonal((0.8, 0.1)), 0.5)
    assert c.claimed_bound == 0.4 and c.verified
    assert bounds.linear_floor(Diagonal((0.8, 0.1)), 0.0).claimed_bound == 0.0


def test_linear_floor_uses_extremal_direction():
    c = bounds.linear_floor(Identity(2, 1, 9), 0.25)
    assert c.claimed_bound == pytest.approx(0.25 * 3)
    assert c.verified


def test_linear_floor_against_truncation():
    prob = Diagonal((1.0, 0.5))
    pol = alg.build_diag_truncation_policy(prob, 2)
    c = bounds.linear_floor(prob, 0.2, pol)
    assert c.verified and c.details["achieved"] >= c.claimed_bound
    assert all(st.y == 0.0 for st in c.witnesses[0].transcript)


def test_linear_floor_rejects_nonlinear_policy():
    pol = alg.build_coord_refine_policy(1, 2, 0.5)
    with pytest.raises(AdmissibilityViolation):
        bounds.linear_floor(Identity(INF, INF, 1), 0.5, pol)


def test_lipschitz_floor_examples():
    c = bounds.lipschitz_floor(Identity(INF, INF, 3), 1.0, 0.25)
    assert c.claimed_bound == 0.25 and c.verified
    np.testing.assert_array_equal(c.witnesses[0].f, [0, 0, 0])
    np.testing.assert_array_equal(c.witnesses[1].f, [0.5, 0, 0])
    assert bounds.lipschitz_floor(Identity(INF, INF, 1), 1e9, 0.25).claimed_bound < 1e-9


@pytest.mark.parametrize("m,r,delta", [(1, 2, 0.5), (2, 3, 0.5), (2, 2, 0.25)])
def test_lipschitz_floor_matched_refinement(m, r, delta):
    prob = Identity(INF, INF, m)
    pol = alg.build_coord_refine_policy(m, r, delta)
    c = bounds.lipschitz_floor(prob, delta ** (1 - r), delta, pol)
    assert c.verified
    assert c.claimed_bound == pytest.approx(delta ** r, abs=1e-12)
    assert c.details["achieved"] == pytest.approx(delta ** r, abs=1e-12)


def test_lipschitz_floor_rejects_steeper_functionals():
    pol = alg.build_coord_refine_policy(1, 3, 0.5)
    with pytest.raises(AdmissibilityViolation):
        bounds.lipschitz_floor(Identity(INF, INF, 1), 2.0, 0.5, pol)


def test_lipschitz_floor_preconditions():
    with pytest.raises(InvalidParameters):
        bounds.lipschitz_floor(Identity(INF, INF, 1), 0.0, 0.5)
    with pytest.raises(UnsupportedInstance):
        bounds.lipschitz_floor(object(), 1.0, 0.5)


def test_lipschitz_witness_distance_is_exact():
    for prob in (Identity(2, 1, 3), Identity(3, 3, 2), Diagonal((0.7, 0.2), p=1.5)):
        for L in (0.7, 3.0, 11.0):
            c = bounds.lipschitz_floor(prob, L, 0.3)
            f, g = c.witnesses[0].f, c.witnesses[1].f
            assert L * spaces.norm(f - g, prob.p) <= 0.6
            assert c.verified


@settings(max_examples=100)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.01, 0.9), st.floats(0.01, 0.9))
def test_lipschitz_floor_monotone(L1, L2, d1, d2):
    prob = Diagonal((1.0, 0.5), p=2)
    la, lb = sorted((L1, L2))
    assert bounds.lipschitz_floor(prob, lb, d1).claimed_bound <= \
        bounds.lipschitz_floor(prob, la, d1).claimed_bound + 1e-15
    da, db = sorted((d1, d2))
    assert bounds.lipschitz_floor(prob, L1, da).claimed_bound <= \
        bounds.lipschitz_floor(prob, L1, db).claimed_bound + 1e-15


def test_grid_adversary_collapses_outputs():
    prob = Identity(INF, INF, 1)
    pol = alg.build_coord_refine_policy(1, 3, 0.5)
    outputs = set()
    for f in spaces.dyadic_grid(1, 6):
        res = ms.run_session(pol, f, prob, ms.GridSnap(0.5))
        outputs.add(tuple(res.output))
    assert len(outputs) <= 2 ** 3


def test_grid_adversary_against_encoder():
    prob = Identity(INF, INF, 1)
    cover = entropy.grid_cover_linf(1, 2)  # delta = 0.4: one bit per step, two steps
    pol = alg.build_encoder_policy(cover, 0.4)
    c = bounds.grid_adversary(pol, prob, 0.4, level=7)
    k = ms.k_delta(0.4)
    assert c.verified
    assert c.claimed_bound >= 2.0 ** (-2 * k) - c.details["resolution"]


def test_grid_adversary_zero_measurements():
    prob = Identity(INF, INF, 2)
    pol = ms.ConstantPolicy([0.0, 0.0])
    c = bounds.grid_adversary(pol, prob, 0.3)
    assert c.claimed_bound == 1.0 >= entropy.packing_lower(prob, 0)
    assert c.verified


def test_grid_adversary_propagates_inadmissible():
    class Loud(ms.Policy):
        budget = 1

        def choose_next(self, t):
            return None if t.steps else ms.LinearForm((3.0,))

        def reconstruct(self, t):
            return np.zeros(1)

    with pytest.raises(AdmissibilityViolation):
        bounds.grid_adversary(Loud(), Identity(INF, INF, 1), 0.5)


def test_tampered_certificates_fail_verification():
    prob = Identity(INF, INF, 1)
    pol = alg.build_coord_refine_policy(1, 2, 0.5)
    c = bounds.grid_adversary(pol, prob, 0.5)
    assert bounds.verify_certificate(c)
    bad = dataclasses.replace(c, claimed_bound=c.claimed_bound + 0.1)
    assert not bounds.verify_certificate(bad)
    w = c.witnesses[0]
    moved = ms.Transcript(tuple(ms.Step(s.functional, s.y + 0.6) for s in w.transcript))
    bad = dataclasses.replace(c, witnesses=[dataclasses.replace(w, transcript=moved)])
    assert not bounds.verify_certificate(bad)
    lip = bounds.lipschitz_floor(prob, 1.0, 0.25)
    lip.details["L"] = 10.0
    assert not bounds.verify_certificate(lip)


def test_certificate_rows():
    rows = list(bounds.linear_floor(Diagonal((0.8, 0.1)), 0.5).rows())
    assert rows[0][:3] == ("linear_floor", "0.4", "0")
    assert rows[0][3] == "0.5 0.0"
