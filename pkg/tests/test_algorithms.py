import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyinfo import algorithms as alg, entropy, measurement as ms, spaces
from noisyinfo.errors import (
    AdmissibilityViolation,
    InfeasibleTruncation,
    InvalidParameters,
    ShapeMismatch,
)
from noisyinfo.spaces import INF, Diagonal, Identity

SQUARE = Identity(INF, INF, 2)
LINE = Identity(INF, INF, 1)


# -- quantizer and encoder -------------------------------------------------------

@pytest.mark.parametrize("delta,k,kp", [(0.4, 2, 1), (0.2, 3, 2), (0.1, 4, 3), (0.5, 1, 1), (0.25, 2, 2)])
def test_quantizer_bits(delta, k, kp):
    q = alg.quantizer_params(delta)
    assert (q.k, q.k_prime) == (k, kp)
    assert q.disjoint


def test_quantizer_levels_for_two_bits():
    np.testing.assert_allclose(alg.quantizer_params(0.2).levels, [-1, -1 / 3, 1 / 3, 1])


def test_zero_bit_cover_encoder():
    # k' >= 1 for every delta < 1, so a one-cell cover only fits a zero-step encoder
    cover = entropy.CoverSpec([[0.0]], 1.0, 0, LINE)
    with pytest.raises(ShapeMismatch):
        alg.build_encoder_policy(cover, 0.8, n=1)
    pol = alg.build_encoder_policy(cover, 0.8)
    res = ms.run_session(pol, [0.7], LINE, ms.SignPattern(0.8, ()))
    assert pol.budget == 0 and res.error == pytest.approx(0.7)


@settings(max_examples=300)
@given(st.floats(1e-3, 0.999))
def test_quantizer_neighborhoods_disjoint(delta):
    q = alg.quantizer_params(delta)
    assert q.disjoint and q.k_prime >= 1 and q.k_prime <= q.k
    lv = q.levels
    if len(lv) > 1:
        assert np.min(np.diff(lv)) > 2 * delta


def test_encoder_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        alg.build_encoder_policy(entropy.grid_cover_linf(1, 3), 0.2)  # 8 cells, 2 bits per step
    with pytest.raises(ShapeMismatch):
        alg.build_encoder_policy(entropy.grid_cover_linf(1, 2), 0.4, n=3)


def test_encoder_roundtrip_delta_04_endpoints():
    pol = alg.build_encoder_policy(entropy.grid_cover_linf(1, 2), 0.4)
    assert pol.budget == 2
    for cell in range(4):
        clean = pol.encode(cell)
        for s in itertools.product((-1, 1), repeat=2):
            assert pol.decode(clean + 0.4 * np.array(s)) == cell


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0.45, 0.3, 0.2, 0.14, 0.1]), st.integers(1, 3), st.integers(0, 2**31))
def test_encoder_roundtrip_random_noise(delta, n, seed):
    kp = alg.k_prime_delta(delta)
    cover = entropy.grid_cover_linf(1, n * kp)
    pol = alg.build_encoder_policy(cover, delta)
    rng = np.random.default_rng(seed)
    cells = np.arange(len(cover))
    clean = np.array([pol.encode(c) for c in cells])
    noisy = clean + delta * rng.uniform(-1, 1, clean.shape)
    np.testing.assert_array_equal(pol.decode(noisy), cells)


def test_encoder_zero_noise_session_finds_cell():
    cover = entropy.grid_cover_linf(2, 4)
    pol = alg.build_encoder_policy(cover, 0.4)
    for f in spaces.dyadic_grid(2, 3):
        res = ms.run_session(pol, f, SQUARE, ms.ZeroNoise(0.4))
        assert res.error <= cover.radius + 1e-12


# -- bisection ----------------------------------------------------------------------

def _containment_holds(pol, f, transcript):
    img = spaces.apply_operator(pol.problem, f)
    for k in range(len(transcript) + 1):
        active, radius = pol.state(transcript.prefix(k))
        d = spaces.dist_to_union(img, pol.cover.centers[list(active)], radius, pol.problem.q)
        if d > 1e-12:
            return False
    return True


def test_bisection_example_explicit_eta():
    pol = alg.build_bisection_policy(entropy.grid_cover_linf(2, 2), 0.3, 0.65, 0.01)
    assert pol.error_bound == pytest.approx(0.506)
    worst = 0.0
    for f in spaces.dyadic_grid(2, 4):
        for s in itertools.product((-1, 1), repeat=2):
            res = ms.run_session(pol, f, SQUARE, ms.SignPattern(0.3, s))
            assert _containment_holds(pol, f, res.transcript)
            worst = max(worst, res.error)
    assert worst <= 0.506


def test_bisection_zero_noise_at_center():
    cover = entropy.grid_cover_linf(2, 2)
    pol = alg.build_bisection_policy(cover, 0.3)
    for c in cover.centers:
        assert ms.run_session(pol, c, SQUARE, ms.ZeroNoise(0.3)).error == 0.0


def test_bisection_without_measurements():
    cover = entropy.grid_cover_linf(2, 0)
    pol = alg.build_bisection_policy(cover, 0.3)
    assert pol.budget == 0
    assert ms.run_session(pol, [1, -1], SQUARE, ms.ZeroNoise(0.3)).error == 1.0


def test_bisection_parameter_checks():
    cover = entropy.grid_cover_linf(2, 2)
    with pytest.raises(InvalidParameters):
        alg.build_bisection_policy(cover, 0.3, delta_plus=0.3)
    with pytest.raises(InvalidParameters):
        alg.build_bisection_policy(cover, 0.3, eta=0.0)
    with pytest.raises(ShapeMismatch):
        alg.build_bisection_policy(entropy.CoverSpec(np.zeros((3, 2)), 1.0, 2, SQUARE), 0.3)


def test_bisection_default_rule_meets_slack():
    cover = entropy.grid_cover_linf(2, 4)
    pol = alg.build_bisection_policy(cover, 0.2)
    assert pol.delta_plus == 0.6
    assert pol.budget * pol.delta * pol.eta == pytest.approx(0.01 * cover.radius)


def test_bisection_lipschitz_eta_gives_declared_constant():
    cover = entropy.grid_cover_linf(1, 2)
    pol = alg.build_bisection_policy(cover, 0.25, L=8.0)
    fn = pol.choose_next(ms.Transcript())
    assert ms.validate(fn, LINE).lipschitz_estimate == pytest.approx(8.0)
    assert fn.declared == ms.lipschitz(8.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2), st.integers(0, 2**31))
def test_bisection_containment_random_noise(f, seed):
    pol = alg.build_bisection_policy(entropy.grid_cover_linf(2, 4), 0.4)
    res = ms.run_session(pol, f, SQUARE, ms.SeededRandom(0.4, seed))
    assert _containment_holds(pol, np.array(f), res.transcript)
    assert res.error <= pol.error_bound + 1e-12


# -- coordinate refinement ---------------------------------------------------------

def test_refine_single_read_example():
    shift = ms.FixedShift(0.5, 0.5)
    literal = alg.build_coord_refine_policy(1, 1, 0.5, clamp=False)
    res = ms.run_session(literal, [0.3], LINE, shift)
    assert res.output[0] == pytest.approx(0.8) and res.error == pytest.approx(0.5)
    clamped = alg.build_coord_refine_policy(1, 1, 0.5)
    res = ms.run_session(clamped, [0.3], LINE, shift)
    assert res.output[0] == pytest.approx(0.65) and res.error <= 0.5


def test_refine_m2_r3_exhaustive():
    pol = alg.build_coord_refine_policy(2, 3, 0.5)
    worst = 0.0
    for f in spaces.dyadic_grid(2, 2):
        for s in itertools.product((-1, 1), repeat=6):
            worst = max(worst, ms.run_session(pol, f, SQUARE, ms.SignPattern(0.5, s)).error)
    assert worst == 0.125


@pytest.mark.parametrize("m,r", [(1, 1), (2, 3), (3, 2)])
def test_refine_zero_noise_exact(m, r):
    prob = Identity(INF, INF, m)
    literal = alg.build_coord_refine_policy(m, r, 0.3, clamp=False)
    f = np.linspace(-0.9, 0.8, m)
    assert ms.run_session(literal, f, prob, ms.ZeroNoise(0.3)).error == pytest.approx(0, abs=1e-15)
    # the clamped variant is exact away from the boundary of the cube
    clamped = alg.build_coord_refine_policy(m, r, 0.3)
    f = np.linspace(-0.7, 0.6, m)
    assert ms.run_session(clamped, f, prob, ms.ZeroNoise(0.3)).error == pytest.approx(0, abs=1e-15)


@settings(max_examples=150, deadline=None)
@given(st.floats(-1, 1), st.floats(0.05, 0.95), st.integers(1, 6), st.integers(0, 2**31),
       st.booleans())
def test_refine_interval_containment_and_width(x, delta, r, seed, clamp):
    pol = alg.CoordRefinePolicy((r,), delta, clamp=clamp)
    t, _ = ms.execute(pol, [x], ms.SeededRandom(delta, seed))
    for j in range(1, r + 1):
        lo, hi = pol.intervals(t.prefix(j))[0]
        assert lo - 1e-12 <= x <= hi + 1e-12
        width = hi - lo
        assert width <= 2 * delta ** j + 1e-14
        if not clamp:
            assert width == pytest.approx(2 * delta ** j, rel=1e-9, abs=1e-14)


def test_saturation_branch_and_tie():
    fn = ms.CoordRefine(0, 0.0, 2, 0.5)
    assert fn(np.array([0.5])) == 1.0  # |residual| == delta**(j-1) uses the linear branch
    assert fn(np.array([0.9])) == 1.0
    assert fn(np.array([-0.9])) == -1.0
    assert fn(np.array([0.25])) == 0.5


# -- noise correction ---------------------------------------------------------------

def test_noise_correct_example_exhaustive():
    inner = ms.LinearForm((0.5, 0.5))
    f = np.array([0.3, 0.3])
    for s in itertools.product((-1, 1), repeat=2):
        out = alg.noise_correct(inner, f, 2, ms.SignPattern(0.5, s))
        assert abs(out.value - 0.3) <= 0.25 + 1e-15


def test_noise_correct_single_round_is_plain_read():
    inner = ms.LinearForm((1.0,))
    out = alg.noise_correct(inner, [0.2], 1, ms.FixedShift(0.3, 0.3), clamp=False)
    assert out.value == pytest.approx(0.5) and out.bound == 0.3


def test_rounds_for_precision():
    assert alg.rounds_for_precision(0.01, 0.5) == 7
    assert 0.5 ** 7 <= 0.01
    assert alg.rounds_for_precision(0.25, 0.5) == 2  # exact power, no spurious increment
    assert alg.rounds_for_precision(2.0, 0.5) == 1


@settings(max_examples=60, deadline=None)
@given(st.floats(-1, 1), st.integers(1, 10), st.sampled_from([0.1, 0.3, 0.5, 0.7]), st.integers(0, 2**31))
def test_noise_correct_bound_under_sign_patterns(v, r, delta, seed):
    rng = np.random.default_rng(seed)
    signs = tuple(rng.choice((-1.0, 1.0), size=r))
    out = alg.noise_correct(ms.LinearForm((1.0,)), [v], r, ms.SignPattern(delta, signs))
    assert abs(out.value - v) <= delta ** r * (1 + 1e-9) + 1e-15


def test_noise_correct_rejects_inadmissible_inner():
    with pytest.raises(AdmissibilityViolation):
        alg.noise_correct(ms.CoordRefine(0, 0.0, 3, 0.5, declared=ms.lipschitz(1.0)), [0.1], 2,
                          ms.ZeroNoise(0.5))
    with pytest.raises(InvalidParameters):
        alg.noise_correct(ms.LinearForm((1.0,)), [0.1], 2, ms.ZeroNoise(0.5), delta=0.25)


# -- diagonal operators -------------------------------------------------------------

def test_truncation_example():
    prob = Diagonal((1, 0.5))
    pol = alg.build_diag_truncation_policy(prob, 1)
    res = ms.run_session(pol, [1, 1], prob, ms.FixedShift(0.2, 0.2))
    np.testing.assert_allclose(res.output, [1.2, 0.0])
    assert res.error == 0.5


def test_truncation_full_length_leaves_tail():
    prob = Diagonal((1, 0.5), tail=0.125)
    pol = alg.build_diag_truncation_policy(prob, 2)
    res = ms.run_session(pol, [0, 0, 1], prob, ms.ZeroNoise(0.2))
    assert res.error == 0.125 == alg.diag_truncation_error(prob.sigma, 2, 0.0, INF, prob.tail)


@pytest.mark.parametrize("p,expected", [(INF, 0.5), (1, 0.7), (2, math.sqrt(0.04 + 0.25))])
def test_truncation_closed_form_examples(p, expected):
    assert alg.diag_truncation_error((1, 0.5), 1, 0.2, p) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2])
@pytest.mark.parametrize("p", [1, 2, INF])
def test_truncation_noiseless_is_next_sigma(n, p):
    assert alg.diag_truncation_error((1, 0.5, 0.25), n, 0.0, p) == (1, 0.5, 0.25, 0.0)[n]


def test_allocation_example():
    sigma, _ = spaces.power_sigma(1, 8)
    plan = alg.diag_allocate(sigma, 0.25, 0.5)
    assert (plan.m, plan.counts, plan.total) == (3, (2, 1, 1), 4)
    assert plan.to_csv().splitlines()[:2] == ["i,sigma_i,n_i", "1,1.0,2"]


def test_allocation_edge_cases():
    assert alg.diag_allocate((1, 0.5), 1.0, 0.3).total == 0
    with pytest.raises(InfeasibleTruncation):
        alg.diag_allocate((1, 0.5), 0.1, 0.3, tail=0.4)


def test_allocation_finite_dimensional_count():
    m, delta = 4, 0.25
    for eps in (1e-2, 1e-4, 1e-8):
        plan = alg.diag_allocate((1.0,) * m, eps, delta)
        ideal = m * math.log2(1 / eps) / math.log2(1 / delta)
        assert ideal <= plan.total <= ideal + m


def test_allocation_policy_reaches_eps():
    sigma = (1.0, 0.6, 0.3)
    prob = Diagonal(sigma)
    plan = alg.diag_allocate(sigma, 0.2, 0.4)
    pol = alg.build_allocation_policy(plan, prob)
    worst = 0.0
    for f in spaces.dyadic_grid(3, 2):
        for s in itertools.product((-1, 1), repeat=plan.total):
            worst = max(worst, ms.run_session(pol, f, prob, ms.SignPattern(0.4, s)).error)
    assert worst <= 0.2 + 1e-12


def test_l2noise_examples():
    assert alg.diag_l2noise_error((1, 0, 0), 1, 0.5) == 0.5
    assert alg.diag_l2noise_error((1, 0.5, 0.25), 2, 0.0) == 0.25
    assert alg.diag_l2noise_error((0.7,) * 4, 3, 0.4) == 0.7
    assert alg.diag_l2noise_error((1, 0.5), 0, 0.4) == 1
    lo, hi = alg.diag_l2noise_bracket((1, 0.5, 0.25), 2, 0.3)
    assert lo <= hi


def test_stirling_cost_terms():
    for m in (10, 100, 1000):
        exact, stirling, leading = alg.stirling_allocation_cost(1.0, m, 0.5)
        assert stirling == pytest.approx(exact, rel=5e-3)
        assert leading >= exact
    # ratio to leading term tends to 1
    e, _, lead = alg.stirling_allocation_cost(2.0, 10**6, 0.25)
    assert e / lead == pytest.approx(1.0, rel=1e-4)
