import numpy as np
import pytest

import melnikov3d as m3
from melnikov3d.fields import FieldModel


def theta_bar(p):
    return np.arccos(-np.tanh(1.5 * np.asarray(p)))


# -- trajectory integration ---------------------------------------------------

def test_equilibrium_stays_put(hill_field):
    traj = m3.integrate(hill_field, x0=[0.0, 0.0, 1.0], t0=0.0, t1=5.0, tol=1e-10)
    assert np.max(np.linalg.norm(traj.states - [0, 0, 1], axis=1)) < 1e-9


def test_meridional_angle_profile(hill_field):
    # start on the sphere at the equator; theta(p) must follow the closed form
    # (tight tol: 1/sin(theta) amplifies position error ~45x near p = 3)
    traj = m3.integrate(hill_field, x0=[1.0, 0.0, 0.0], t0=0.0, t1=3.0, tol=1e-12)
    for p in np.linspace(0.0, 3.0, 25):
        x = traj.sol(p)[:3]
        theta = np.arccos(np.clip(x[2] / np.linalg.norm(x), -1, 1))
        assert theta == pytest.approx(theta_bar(p), abs=1e-8)
    back = m3.integrate(hill_field, x0=[1.0, 0.0, 0.0], t0=0.0, t1=-3.0, tol=1e-12)
    for p in np.linspace(0.0, -3.0, 25):
        x = back.sol(p)[:3]
        theta = np.arccos(np.clip(x[2] / np.linalg.norm(x), -1, 1))
        assert theta == pytest.approx(theta_bar(p), abs=1e-8)


def test_forward_backward_roundtrip(hill_field):
    x0 = np.array([0.4, 0.2, 0.3])
    tol = 1e-10
    fwd = m3.integrate(hill_field, x0=x0, t0=0.0, t1=2.0, tol=tol)
    bwd = m3.integrate(hill_field, x0=fwd.states[-1], t0=2.0, t1=0.0, tol=tol)
    assert np.linalg.norm(bwd.states[-1] - x0) <= 10 * tol * 100  # error constant absorbed


def test_rk4_cross_check(hill_field):
    x0 = np.array([0.4, 0.2, 0.3])
    fine = m3.integrate(hill_field, x0=x0, t0=0.0, t1=1.5, tol=1e-12)
    rk4 = m3.rk4_integrate(hill_field, None, 0.0, x0=x0, t0=0.0, t1=1.5, n_steps=3000)
    assert np.linalg.norm(fine.states[-1] - rk4) < 1e-9


class _BlowupField(FieldModel):
    name = "blowup"
    coordinate_system = "cartesian"

    def evaluate(self, x):
        return 10.0 * np.asarray(x)


def test_blowup_detected():
    with pytest.raises(m3.IntegrationError, match="left"):
        m3.integrate(_BlowupField(), x0=[1.0, 0.0, 0.0], t0=0.0, t1=10.0,
                     tol=1e-8, blowup_radius=100.0)


def test_divergence_accumulator(contracted):
    field, _ = contracted
    # along the sphere div = -c; start on the equator, ride for 2 time units
    traj = m3.integrate(field, x0=[1.0, 0.0, 0.0], t0=0.0, t1=2.0, tol=1e-11)
    assert traj.div_integral[0] == 0.0
    assert traj.div_integral[-1] == pytest.approx(-field.c * 2.0, abs=1e-8)


def test_perturbation_forcing(hill_field, gr):
    # meridian phi = pi/6 maximizes the sin(3 phi) forcing factor
    x0 = [np.cos(np.pi / 6), np.sin(np.pi / 6), 0.0]
    a = m3.integrate(hill_field, gr, 0.0, x0=x0, t0=0.0, t1=1.0, tol=1e-10)
    b = m3.integrate(hill_field, gr, 0.05, x0=x0, t0=0.0, t1=1.0, tol=1e-10)
    assert np.linalg.norm(a.states[-1] - b.states[-1]) > 1e-4


# -- analytic charts ----------------------------------------------------------

def test_classical_chart_points(hill_chart):
    assert np.allclose(hill_chart.point(0.0, 0.0), [1, 0, 0], atol=1e-15)
    # p -> +inf approaches the south saddle
    assert np.allclose(hill_chart.point(40.0, 0.3), [0, 0, -1], atol=1e-15)
    assert np.allclose(hill_chart.point(-40.0, 0.3), [0, 0, 1], atol=1e-15)


def test_classical_alpha_partial(hill_chart):
    for p in (-1.0, 0.0, 2.0):
        mag = np.linalg.norm(hill_chart.alpha_partial(p, 0.37))
        assert mag == pytest.approx(2 * np.pi / np.cosh(1.5 * p), rel=1e-13)


def test_chart_normal_outward_radial(hill_chart):
    for p, a in ((0.0, 0.0), (0.7, 0.21), (-1.3, 0.8)):
        n = m3.chart_normal(hill_chart, p, a)
        mag = np.linalg.norm(n)
        assert mag == pytest.approx(3 * np.pi / np.cosh(1.5 * p) ** 2, rel=1e-12)
        r_hat = hill_chart.point(p, a)
        assert np.dot(n, r_hat) == pytest.approx(mag, rel=1e-12)
    assert np.linalg.norm(m3.chart_normal(hill_chart, 0.0, 0.5)) == pytest.approx(
        3 * np.pi, rel=1e-13
    )


def test_normal_orthogonality(hill_chart, swirl_chart):
    for chart in (hill_chart, swirl_chart):
        for p, a in ((0.4, 0.1), (-0.9, 0.62)):
            n = chart.normal(p, a)
            f = chart.velocity(p, a)
            xa = chart.alpha_partial(p, a)
            assert abs(np.dot(n, f)) <= 1e-12 * np.linalg.norm(n) * np.linalg.norm(f)
            assert abs(np.dot(n, xa)) <= 1e-12 * np.linalg.norm(n) * np.linalg.norm(xa)


def test_alpha_periodicity_exact(hill_chart, swirl_chart):
    for chart in (hill_chart, swirl_chart):
        for p, a in ((0.3, 0.1), (-1.1, 0.77)):
            assert np.allclose(chart.point(p, a), chart.point(p, a + 1.0), atol=1e-12)


def test_swirl_chart_spirals(swirl_chart):
    # phi(p, alpha) = 2 pi alpha - p / (2 R0)
    a = 0.25
    pt = swirl_chart.point(0.0, a)
    assert np.allclose(pt, [np.cos(np.pi / 2), np.sin(np.pi / 2), 0.0], atol=1e-14)
    p = 0.8
    expected_phi = 2 * np.pi * a - p / 0.2
    pt = swirl_chart.point(p, a)
    assert np.arctan2(pt[1], pt[0]) == pytest.approx(
        np.arctan2(np.sin(expected_phi), np.cos(expected_phi)), abs=1e-12
    )


def test_swirl_normal_same_as_classical(hill_chart, swirl_chart):
    for p, a in ((0.0, 0.3), (1.2, 0.05)):
        n_c = hill_chart.normal(p, a)
        n_s = swirl_chart.normal(p, a)
        assert np.linalg.norm(n_s) == pytest.approx(np.linalg.norm(n_c), rel=1e-12)
        # both outward radial at their own base points
        r_hat = swirl_chart.point(p, a)
        assert np.dot(n_s, r_hat) == pytest.approx(np.linalg.norm(n_s), rel=1e-12)


def test_swirl_large_r0_recovers_classical(hill_chart):
    weak = m3.hill_chart_swirl(1e9)
    ps = np.linspace(-2, 2, 9)
    for a in (0.0, 0.4):
        d = weak.point_many(ps, np.full(9, a)) - hill_chart.point_many(ps, np.full(9, a))
        assert np.max(np.linalg.norm(d, axis=1)) < 1e-8


def test_chart_p_derivative_is_velocity(hill_chart, swirl_chart):
    rng = np.random.default_rng(17)
    h = 1e-6
    for chart in (hill_chart, swirl_chart):
        for _ in range(20):
            p, a = rng.uniform(-2, 2), rng.uniform(0, 1)
            fd = (chart.point(p + h, a) - chart.point(p - h, a)) / (2 * h)
            assert np.linalg.norm(fd - chart.velocity(p, a)) < 1e-7


def test_divergence_integral_zero_for_hill(hill_chart):
    taus = np.linspace(-3, 2, 11)
    assert np.array_equal(
        hill_chart.divergence_integral_many(taus, 1.0, 0.3), np.zeros(11)
    )


def test_divergence_integral_additivity(contracted):
    _, chart = contracted
    rng = np.random.default_rng(23)
    for _ in range(20):
        tau, s, p = sorted(rng.uniform(-3, 3, 3))
        full = chart.divergence_integral(tau, p, 0.2)
        split = chart.divergence_integral(tau, s, 0.2) + chart.divergence_integral(s, p, 0.2)
        assert full == pytest.approx(split, abs=1e-9)


# -- shooting chart -----------------------------------------------------------

@pytest.fixture(scope="module")
def shooting(hill_field):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, 1.0])
    return m3.generic_chart_from_saddle(
        hill_field, spec, delta=1e-3, section=lambda x: x[2], p_max=2.2,
        n_alpha=64, tol=1e-12,
        plane_basis=(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    )


def test_shooting_matches_analytic(shooting, hill_chart):
    ps = np.linspace(-2, 2, 21)
    worst = 0.0
    for a in (0.0, 0.13, 0.37, 0.5, 0.81):
        d = shooting.point_many(ps, np.full(ps.size, a)) - hill_chart.point_many(
            ps, np.full(ps.size, a))
        worst = max(worst, float(np.max(np.linalg.norm(d, axis=1))))
    assert worst < 1e-6


def test_shooting_p_derivative_matches_field(shooting, hill_field):
    rng = np.random.default_rng(29)
    h = 1e-6
    # on the seed-ring trajectories the chart IS an ODE solution
    for _ in range(10):
        p = rng.uniform(-2, 2)
        a = rng.integers(0, 64) / 64
        fd = (shooting.point(p + h, a) - shooting.point(p - h, a)) / (2 * h)
        f = hill_field.velocity(shooting.point(p, a))
        assert np.linalg.norm(fd - f) < 1e-7
    # between rings the alpha interpolant contributes its own smooth error
    for _ in range(10):
        p, a = rng.uniform(-2, 2), rng.uniform(0, 1)
        fd = (shooting.point(p + h, a) - shooting.point(p - h, a)) / (2 * h)
        f = hill_field.velocity(shooting.point(p, a))
        assert np.linalg.norm(fd - f) < 2e-6


def test_shooting_alpha_periodicity(shooting):
    ps = np.linspace(-1.5, 1.5, 7)
    for a in (0.11, 0.73):
        d = shooting.point_many(ps, np.full(7, a)) - shooting.point_many(
            ps, np.full(7, a + 1.0))
        assert np.max(np.linalg.norm(d, axis=1)) < 1e-12


def test_shooting_seed_radius_insensitive(shooting, hill_field):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, 1.0])
    half = m3.generic_chart_from_saddle(
        hill_field, spec, delta=5e-4, section=lambda x: x[2], p_max=2.2,
        n_alpha=64, tol=1e-11,
        plane_basis=(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
        foliation_check=False,
    )
    ps = np.linspace(-1.5, 1.5, 7)
    for a in (0.0, 0.4):
        d = half.point_many(ps, np.full(7, a)) - shooting.point_many(ps, np.full(7, a))
        assert np.max(np.linalg.norm(d, axis=1)) < 1e-6


def test_shooting_rejects_stable_case(hill_field):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, -1.0])
    assert spec.case is m3.SaddleCase.TWO_DIM_STABLE
    with pytest.raises(m3.ChartError, match="2D unstable"):
        m3.generic_chart_from_saddle(hill_field, spec, section=lambda x: x[2])


def test_shooting_domain_guard(shooting):
    with pytest.raises(m3.ChartError):
        shooting.point(shooting.p_min - 1.0, 0.0)


def test_arclength_fallback_section(hill_field):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, 1.0])
    chart = m3.generic_chart_from_saddle(
        hill_field, spec, delta=1e-3, section=None, p_max=0.5, n_alpha=16,
        tol=1e-10, foliation_check=False,
    )
    # p = 0 calibrated at arc length 1 from the saddle: theta(0) = 1 radian
    pt = chart.point(0.0, 0.0)
    theta = np.arccos(np.clip(pt[2] / np.linalg.norm(pt), -1, 1))
    assert theta == pytest.approx(1.0, abs=1e-3)
