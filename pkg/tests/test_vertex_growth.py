import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from discagg import vertex_growth as vg
from discagg.errors import ArcCollapse, DomainError, InsufficientData, QuadratureFailure
from discagg.rng import make_rng
from discagg.tails import geometric_grid

PI = math.pi


###############################################################################
# Closed forms
###############################################################################


def test_mu_at_critical_angle():
    assert vg.asymptotic_params(PI / 3)["mu"] == pytest.approx(1.0)


def test_right_angle_limit():
    p = vg.asymptotic_params(PI / 2)
    assert p["drift_coef"] == pytest.approx(0.0, abs=1e-16)
    assert p["mu"] == pytest.approx(0.0, abs=1e-16)


def test_mu_values():
    # mu(0.30 pi) = cos/(1 - cos) = 1.4259..., mu(0.40 pi) = 0.4472..., mu(0.45 pi) = 0.1854...
    assert vg.asymptotic_params(0.30 * PI)["mu"] == pytest.approx(1.4259199981595914, rel=1e-14)
    assert vg.asymptotic_params(0.40 * PI)["mu"] == pytest.approx(0.447213595499958, rel=1e-14)
    assert vg.asymptotic_params(0.45 * PI)["mu"] == pytest.approx(0.18544435323296077, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, PI / 2 - 0.01))
def test_var_coef_specialises(theta):
    p = vg.asymptotic_params(theta)
    assert p["var_coef"](0.0) == pytest.approx(p["var_coef_at_0"], rel=1e-14)


@pytest.mark.parametrize("theta", [0.0, -0.1, 2.0])
def test_theta_domain(theta):
    with pytest.raises(DomainError):
        vg.asymptotic_params(theta)


###############################################################################
# Chain dynamics
###############################################################################


def test_forced_right_attachment():
    s = vg.VertexChainState(Y=0.0, Z=10.0, n=0, theta=PI / 3)
    t = vg.apply_attachment(s, vg.RIGHT, PI / 3)
    assert t.Y == pytest.approx(0.5) and t.Z == pytest.approx(10 + math.sqrt(3) / 2)
    assert t.n == 1


def test_arc_collapse_raises():
    s = vg.VertexChainState(Y=2.0, Z=1.0, n=0, theta=PI / 4)  # arctan 2 > pi/4
    with pytest.raises(ArcCollapse):
        vg.chain_step(s, make_rng(0))
    with pytest.raises(ArcCollapse):
        vg.one_step_moments_quadrature(2.0, 10.0, PI / 4)


def test_x_zero_dz_mean_and_sides():
    theta = PI / 3
    n = 10**6
    dx, dz = vg.one_step_samples(0.0, 50.0, theta, n, make_rng(1))
    expect = (1 - math.cos(theta)) / theta
    assert abs(dz.mean() - expect) < 4 * dz.std() / math.sqrt(n)
    right = np.mean(dx > 0)
    assert abs(right - 0.5) < 4 * math.sqrt(0.25 / n)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.2, 1.5))
def test_z_step_bounds(seed, theta):
    # dZ = sin(alpha) with alpha in [-arctan|X|, theta]: Z may dip on the
    # right arc, but never by more than sin(arctan|X|)
    rng = make_rng(seed)
    s = vg.VertexChainState(0.0, 1.0, 0, theta)
    for _ in range(200):
        if math.atan(abs(s.X)) >= theta:
            break
        t = vg.chain_step(s, rng)
        x = abs(s.X)
        assert -x / math.sqrt(1 + x * x) - 1e-12 <= t.Z - s.Z <= math.sin(theta) + 1e-12
        assert t.Z > 0
        s = t


def test_z_grows_on_average():
    theta = 0.4 * PI
    for x in (0.0, 0.3, 1.0):
        assert vg.dz_mean_quadrature(x, theta) > 0


def _signed_step(y, z, theta, u):
    """Direct step without the reflection trick (independent implementation)."""
    at = math.atan(y / z)
    right = theta + at  # right arc [-at, theta]
    target = u * 2 * theta
    if target < right:
        alpha = -at + target
        return y + math.cos(alpha), z + math.sin(alpha)
    alpha = at + (target - right)
    return y - math.cos(alpha), z + math.sin(alpha)


def test_reflection_pathwise():
    theta = 0.4 * PI
    a = vg.VertexChainState(0.3, 2.0, 0, theta)
    b = vg.VertexChainState(-0.3, 2.0, 0, theta)
    ra, rb = make_rng(9), make_rng(9)
    for _ in range(500):
        if math.atan(abs(a.X)) >= theta:
            break
        a, b = vg.chain_step(a, ra), vg.chain_step(b, rb)
        assert a.Y == -b.Y and a.Z == b.Z


def test_reflection_distributional_against_direct_chain():
    theta, steps, n = 0.35 * PI, 40, 20000
    rng = make_rng(21)
    ours, direct = [], []
    for _ in range(n):
        s = vg.VertexChainState(0.0, 1.0, 0, theta)
        for _ in range(steps):
            s = vg.chain_step(s, rng)
            if abs(s.X) >= 0.5:
                break
        ours.append(abs(s.X))
    for _ in range(n):
        y, z = 0.0, 1.0
        for _ in range(steps):
            y, z = _signed_step(y, z, theta, rng.random())
            if abs(y / z) >= 0.5:
                break
        direct.append(abs(y / z))
    assert stats.ks_2samp(ours, direct).pvalue > 1e-3


###############################################################################
# Quadrature
###############################################################################


def test_quadrature_zero_drift_at_x0():
    for theta in (0.3 * PI, PI / 3, 0.45 * PI):
        assert vg.one_step_moments_quadrature(0.0, 37.0, theta)["drift"] == pytest.approx(0, abs=1e-15)


def test_quadrature_large_z_limits():
    theta, z = PI / 3, 1e4
    q = vg.one_step_moments_quadrature(0.2, z, theta)
    assert z * q["drift"] == pytest.approx(0.2 * 0.5 / theta, rel=1e-3)
    q = vg.one_step_moments_quadrature(1e-6, z, theta)
    lim = (theta**2 + theta * math.sin(theta) * math.cos(theta)) / (2 * theta**2)
    assert z * z * q["variance"] == pytest.approx(lim, rel=1e-3)


def test_quadrature_rate_one_over_z():
    theta, x = PI / 3, 0.2
    lim = x * math.cos(theta) / theta
    errs = [abs(z * vg.one_step_moments_quadrature(x, z, theta)["drift"] - lim) for z in (1e2, 1e3, 1e4)]
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 7 < r1 < 13 and 7 < r2 < 13


def test_dz_identity_general_x():
    for theta in (0.3 * PI, PI / 3, 0.45 * PI):
        for x in (0.0, 1e-6, 0.1, 0.3, 0.7):
            if math.atan(x) >= theta:
                continue
            exact = (1 / math.sqrt(1 + x * x) - math.cos(theta)) / theta
            assert abs(vg.dz_mean_quadrature(x, theta) - exact) < 1e-12


def test_mc_drift_against_quadrature_large_sample():
    theta, x, z, n = PI / 3, 0.1, 1e4, 10**7
    q = vg.one_step_moments_quadrature(x, z, theta)
    dx, _ = vg.one_step_samples(x, z, theta, n, make_rng(33))
    assert z * q["drift"] == pytest.approx(0.04775, abs=5e-5)
    assert abs(dx.mean() - q["drift"]) < 3 * dx.std() / math.sqrt(n)


def test_mc_against_quadrature_random_states():
    rng = np.random.default_rng(77)
    n = 200_000
    for i in range(10):
        theta = rng.uniform(0.25 * PI, 0.48 * PI)
        x = rng.uniform(0, 0.8 * math.tan(theta))
        z = 10 ** rng.uniform(2, 4)
        q = vg.one_step_moments_quadrature(x, z, theta)
        dx, _ = vg.one_step_samples(x, z, theta, n, make_rng(100 + i))
        assert abs(dx.mean() - q["drift"]) < 4 * dx.std() / math.sqrt(n)
        sq = (dx - q["drift"]) ** 2
        assert abs(sq.mean() - q["variance"]) < 4 * sq.std() / math.sqrt(n)


def test_quadrature_domain():
    with pytest.raises(DomainError):
        vg.one_step_moments_quadrature(0.1, 0.5, PI / 3)
    with pytest.raises(DomainError):
        vg.one_step_moments_quadrature(0.1, 10.0, PI / 2)
    assert issubclass(QuadratureFailure, ArithmeticError)


###############################################################################
# Fork lifetimes
###############################################################################


def test_fork_validation():
    for a in (0.0, -1.0, math.tan(PI / 3)):
        with pytest.raises(DomainError):
            vg.fork_lifetime(PI / 3, a=a, rng=make_rng(0))
    with pytest.raises(DomainError):
        vg.fork_lifetime(PI / 3, z0=0.5, rng=make_rng(0))


def test_fork_causes_and_cap():
    T, cause = vg.fork_lifetimes(0.45 * PI, 0.5, 3000, step_cap=500, seed=1)
    assert T.min() >= 1
    assert np.all(T[cause == vg.CENSORED] == 500)
    assert np.all(T[cause != vg.CENSORED] <= 500)
    # a < tan(theta) keeps the shorter arc open until the threshold is hit
    assert not np.any(cause == vg.ARC_COLLAPSE)
    s = vg.fork_lifetime(0.45 * PI, rng=make_rng(3))
    assert s.cause in vg.CAUSES and s.T >= 1


def test_fork_blocks_do_not_depend_on_n():
    a = vg.fork_lifetimes(0.4 * PI, 0.5, 1024, step_cap=1000, seed=4)
    b = vg.fork_lifetimes(0.4 * PI, 0.5, 1500, step_cap=1000, seed=4)
    assert np.array_equal(a[0], b[0][:1024])


def test_censoring_heavier_for_smaller_mu():
    cap = 10**6
    _, c30 = vg.fork_lifetimes(0.30 * PI, 0.5, 2000, step_cap=cap, seed=5)
    _, c40 = vg.fork_lifetimes(0.40 * PI, 0.5, 2000, step_cap=cap, seed=5)
    assert np.mean(c30 == vg.CENSORED) < np.mean(c40 == vg.CENSORED)


def test_tail_curve_trivial():
    T = np.full(1000, 5)
    cause = np.zeros(1000, dtype=int)
    curve = vg.lifetime_tail_curve((T, cause), [1, 2, 4, 8])
    assert [p for _, p in curve] == [1, 1, 1, 0]
    with pytest.raises(InsufficientData):
        vg.lifetime_tail_curve([vg.ForkLifetimeSample(1.0, 0.5, 3, "threshold")], [1, 2])


def test_tail_fit_integer_pareto():
    # ceil of a Pareto(1/2) variable: P(T > n) = n^(-1/2) exactly at integers
    u = np.random.default_rng(8).random(10**5)
    T = np.ceil(u ** -2.0)
    cause = np.zeros(T.size, dtype=int)
    grid = np.unique(np.round(geometric_grid(1, 1e8)))
    fit = vg.lifetime_tail_fit((T, cause), grid)
    assert fit.exponent_hat == pytest.approx(0.5, abs=0.05)


def test_samples_roundtrip():
    T, cause = vg.fork_lifetimes(0.4 * PI, 0.5, 50, step_cap=100, seed=0)
    s = vg.as_samples(0.4 * PI, 0.5, T, cause)
    assert [x.T for x in s] == T.tolist()
    c1 = vg.lifetime_tail_curve((np.tile(T, 20), np.tile(cause, 20)), [1, 10])
    c2 = vg.lifetime_tail_curve(s * 20, [1, 10])
    assert c1 == c2
