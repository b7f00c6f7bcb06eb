import numpy as np
import pytest

import melnikov3d as m3
from conftest import (
    AMPLITUDE,
    MU_REFERENCE,
    ThetaOnlyPerturbation,
    classical_m,
    swirl_m,
)
from melnikov3d.melnikov import weighted_integrand


def fixed_step_simpson(w, a, b, n=20001):
    """Deliberately naive composite Simpson on a uniform grid; independent of
    the adaptive engine it cross-checks."""
    xs = np.linspace(a, b, n)
    vals = w(xs)
    h = xs[1] - xs[0]
    return h / 3 * (vals[0] + vals[-1] + 4 * np.sum(vals[1:-1:2]) + 2 * np.sum(vals[2:-2:2]))


def test_zero_perturbation_gives_zero(hill_chart):
    res = m3.melnikov_heteroclinic(hill_chart, m3.ZeroPerturbation(), 0.3, 0.2, 1.0)
    assert res.value == 0.0
    res = m3.melnikov_unstable(hill_chart, m3.ZeroPerturbation(), 0.3, 0.2, 1.0)
    assert res.value == 0.0


def test_heteroclinic_matches_closed_form(hill_chart, gr, gl_quad):
    rng = np.random.default_rng(31)
    for _ in range(10):
        p, a, t = rng.uniform(-1.5, 1.5), rng.uniform(0, 1), rng.uniform(-2, 2)
        res = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, gl_quad)
        assert res.value == pytest.approx(classical_m(p, a, t), abs=1e-10)


def test_unstable_against_frozen_reference(hill_chart, gr, gl_quad):
    res = m3.melnikov_unstable(hill_chart, gr, 0.4, 0.07, 1.3, gl_quad)
    assert res.value == pytest.approx(MU_REFERENCE, abs=1e-10)


def test_backends_agree_and_tolerance_halving(hill_chart, gr):
    p, a, t = 0.63, 0.21, 0.4
    coarse = m3.QuadratureSpec(rel_tol=1e-8, abs_tol=1e-10)
    fine = m3.QuadratureSpec(rel_tol=4e-9, abs_tol=5e-11)
    gl = m3.QuadratureSpec(rule="gauss-legendre")
    v1 = m3.melnikov_unstable(hill_chart, gr, p, a, t, coarse).value
    v2 = m3.melnikov_unstable(hill_chart, gr, p, a, t, fine).value
    v3 = m3.melnikov_unstable(hill_chart, gr, p, a, t, gl).value
    assert abs(v1 - v2) < 1e-9
    assert abs(v2 - v3) < 1e-9


def test_against_independent_fixed_step_simpson(hill_chart, gr, gl_quad):
    p, a, t = -0.35, 0.18, 0.9
    w = weighted_integrand(hill_chart, gr, p, a, t)
    res = m3.melnikov_unstable(hill_chart, gr, p, a, t, gl_quad)
    naive = fixed_step_simpson(w, -14.0, p)
    assert res.value == pytest.approx(naive, abs=1e-9)


def test_tangential_perturbation_contributes_nothing(hill_chart, gl_quad):
    g_theta = ThetaOnlyPerturbation()
    for p, a, t in ((0.0, 0.1, 0.0), (0.8, 0.4, 1.0)):
        res = m3.melnikov_heteroclinic(hill_chart, g_theta, p, a, t, gl_quad)
        assert abs(res.value) < 1e-12


def test_splitting_is_unstable_minus_stable(hill_chart, swirl_chart, gr, gl_quad):
    rng = np.random.default_rng(37)
    for chart in (hill_chart, swirl_chart):
        for _ in range(10):
            p, a, t = rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1)
            mu = m3.melnikov_unstable(chart, gr, p, a, t, gl_quad)
            ms = m3.melnikov_stable(chart, gr, p, a, t, gl_quad)
            m = m3.melnikov_heteroclinic(chart, gr, p, a, t, gl_quad)
            budget = 10 * (mu.error + ms.error + m.error) + 1e-12
            assert abs(m.value - (mu.value - ms.value)) < budget


def test_shift_invariance_volume_preserving(hill_chart, gr, gl_quad):
    rng = np.random.default_rng(41)
    for _ in range(8):
        p, a, t = rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1)
        s = rng.uniform(-2, 2)
        v1 = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, gl_quad).value
        v2 = m3.melnikov_heteroclinic(hill_chart, gr, p + s, a, t + s, gl_quad).value
        assert v1 == pytest.approx(v2, abs=1e-9)


def test_swirl_closed_form(swirl_chart, gr):
    quad = m3.QuadratureSpec(rule="gauss-legendre", rel_tol=1e-12, abs_tol=1e-13,
                             panel_width=0.5)
    rng = np.random.default_rng(43)
    scale = 6 * np.pi * np.hypot(2.8522263408135192e-4, 2.8483626578599184408e-4)
    for _ in range(20):
        p, a, t = rng.uniform(-1.5, 1.5), rng.uniform(0, 1), rng.uniform(0, 2)
        res = m3.melnikov_heteroclinic(swirl_chart, gr, p, a, t, quad)
        assert abs(res.value - swirl_m(p, a, t)) < 1e-9 * scale


def test_truncation_doubling_changes_nothing(hill_chart, gr):
    base = m3.QuadratureSpec(rule="gauss-legendre", truncation="fixed", t_cut=14.0)
    double = m3.QuadratureSpec(rule="gauss-legendre", truncation="fixed", t_cut=28.0)
    p, a, t = 0.2, 0.09, 0.7
    v1 = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, base).value
    v2 = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, double).value
    assert abs(v1 - v2) < base.abs_tol


def test_exponential_weight_matters(hill_chart, contracted, gr, gl_quad):
    # same trajectories and normals; only the divergence weight differs.
    # dropping it (the plain volume-preserving chart) must move M beyond tol.
    field_c, chart_c = contracted
    p, a, t = 0.3, 0.1, 0.5
    with_weight = m3.melnikov_heteroclinic(chart_c, gr, p, a, t, gl_quad).value
    without = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, gl_quad).value
    assert abs(with_weight - without) > 1e-3


def test_weight_uses_chart_accumulator(contracted, gr, gl_quad):
    # the weighted integrand must reproduce exp(-c (p - tau)) explicitly
    field_c, chart_c = contracted
    p, a, t = 0.4, 0.13, 0.0
    w = weighted_integrand(chart_c, gr, p, a, t)
    taus = np.array([-1.0, 0.0, 0.2])
    plain = weighted_integrand(m3.HillChartClassical(m3.HillClassicalField()), gr, p, a, t)
    expected = plain(taus) * np.exp(-field_c.c * (p - taus))
    assert np.allclose(w(taus), expected, rtol=1e-12)


def test_integrand_decay_rate(hill_chart):
    # envelope of the weighted geometry factor exp(D) |f ^ x_alpha| decays at
    # the isolated-eigenvalue rate (3 for the classical vortex)
    p = 0.0
    taus = np.linspace(p - 10.0, p - 5.0, 40)
    mags = np.linalg.norm(hill_chart.normal_many(taus, np.full(taus.size, 0.2)), axis=1)
    slope = np.polyfit(p - taus, np.log(mags), 1)[0]
    assert slope <= -2.9
    assert slope == pytest.approx(-3.0, abs=5e-3)


def test_nondecaying_integrand_rejected(hill_chart):
    class GrowingPerturbation(m3.PerturbationModel):
        name = "growing"
        coordinate_system = "cartesian"

        # growth rate 4 beats the sech^2 * sech geometry decay (rate 3)
        def evaluate(self, x, t):
            return np.array([np.cosh(4.0 * t), 0.0, 0.0])

    with pytest.raises(m3.QuadratureError, match="decay"):
        m3.melnikov_unstable(hill_chart, GrowingPerturbation(), 0.0, 0.1, 0.0)


def test_displacement_scaling(hill_chart, gr, gl_quad):
    p, a, t = 0.0, 1 / 12, 0.0
    mv = m3.melnikov_heteroclinic(hill_chart, gr, p, a, t, gl_quad).value
    assert m3.displacement(hill_chart, 0.0, p, a, 0.1) == 0.0
    d1 = m3.displacement(hill_chart, mv, p, a, 1e-3)
    d2 = m3.displacement(hill_chart, mv, p, a, 2e-3)
    assert d2 == pytest.approx(2 * d1, rel=1e-14)
    # at p = 0 the normal magnitude is 3 pi
    assert d1 == pytest.approx(1e-3 * mv / (3 * np.pi), rel=1e-12)


def test_perturbed_surface_point(hill_chart, gr, gl_quad):
    p, a, t = 0.35, 0.08, 1.0
    base = hill_chart.point(p, a)
    assert np.allclose(
        m3.perturbed_surface_point(hill_chart, "unstable", gr, p, a, t, 0.0, gl_quad),
        base, atol=1e-15,
    )
    r_u = m3.perturbed_surface_point(hill_chart, "unstable", gr, p, a, t, 0.1, gl_quad)
    offset = r_u - base
    f = hill_chart.velocity(p, a)
    xa = hill_chart.alpha_partial(p, a)
    norm = np.linalg.norm
    assert abs(offset @ f) <= 1e-12 * norm(offset) * norm(f)
    assert abs(offset @ xa) <= 1e-12 * norm(offset) * norm(xa)
    # radial displacement equals cosh^2(3p/2) * (one-sided integral); verify
    # against the unstable value and the radial direction
    mu = m3.melnikov_unstable(hill_chart, gr, p, a, t, gl_quad).value
    r_len = norm(r_u)
    assert r_len - 1.0 == pytest.approx(
        0.1 * mu * np.cosh(1.5 * p) ** 2 / (3 * np.pi), rel=1e-9, abs=1e-12
    )
    with pytest.raises(ValueError):
        m3.perturbed_surface_point(hill_chart, "sideways", gr, p, a, t, 0.1, gl_quad)


def test_kind_preconditions(hill_chart, hill_field, gr):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, 1.0])
    chart = m3.generic_chart_from_saddle(
        hill_field, spec, delta=1e-3, section=lambda x: x[2], p_max=1.0,
        n_alpha=16, tol=1e-9, foliation_check=False,
    )
    assert chart.kind is m3.ChartKind.UNSTABLE
    with pytest.raises(m3.ChartError):
        m3.melnikov_stable(chart, gr, 0.0, 0.1, 0.0)
    with pytest.raises(m3.ChartError):
        m3.melnikov_heteroclinic(chart, gr, 0.0, 0.1, 0.0)


def test_generic_chart_melnikov_matches_analytic(hill_chart, hill_field, gr, gl_quad):
    spec = m3.classify_saddle(hill_field, [0.0, 0.0, 1.0])
    chart = m3.generic_chart_from_saddle(
        hill_field, spec, delta=1e-3, section=lambda x: x[2], p_max=1.5,
        n_alpha=64, tol=1e-11,
        plane_basis=(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    )
    for p, a, t in ((0.5, 0.07, 1.0), (-0.8, 0.6, 0.3)):
        mu_g = m3.melnikov_unstable(chart, gr, p, a, t, gl_quad)
        mu_a = m3.melnikov_unstable(hill_chart, gr, p, a, t, gl_quad)
        assert abs(mu_g.value - mu_a.value) < 1e-5
