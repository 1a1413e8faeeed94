"""Radial finite-volume solver and extinction-rate measurement."""

import dataclasses
import math

import numpy as np
import pytest

from extinction import (
    RadialGrid,
    SelfSimilarField,
    build_initial,
    fit_tail,
    integrate_profile,
    metrics_json,
    profile_interpolant,
    run_and_measure,
    step,
    w_transform,
)

A_STAR_N1 = 2.3028967658101465


@pytest.fixture(scope="module")
def interp1(star1, consts1):
    _, traj, _ = star1
    fit = fit_tail(w_transform(traj, consts1), consts1)
    return profile_interpolant(traj, consts1, fit.A_est)


@pytest.fixture(scope="module")
def field1(star1, consts1):
    _, traj, _ = star1
    grid = RadialGrid(L=40.0, M=200, N=1)
    return build_initial(traj, consts1, T=1.0, grid=grid), grid


class TestRadialGrid:
    def test_geometry_n1(self):
        g = RadialGrid(L=40.0, M=200, N=1)
        assert g.dx == 0.2
        assert g.centers()[0] == pytest.approx(0.1)
        assert len(g.faces()) == 201
        assert np.all(g.face_areas() == 1.0)
        assert np.allclose(g.cell_volumes(), g.dx, rtol=1e-14)

    def test_geometry_n2(self):
        g = RadialGrid(L=10.0, M=50, N=2)
        rf = g.faces()
        assert np.allclose(g.face_areas(), rf, rtol=1e-14)
        assert np.allclose(g.cell_volumes(),
                           0.5 * (rf[1:] ** 2 - rf[:-1] ** 2), rtol=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            RadialGrid(L=0.0, M=10, N=1)
        with pytest.raises(ValueError):
            RadialGrid(L=1.0, M=0, N=1)


class TestProfileInterpolant:
    def test_center_value(self, star1, interp1):
        a_star, _, _ = star1
        assert interp1(0.0) == pytest.approx(a_star, rel=1e-12)

    def test_monotone_decreasing(self, interp1):
        x = np.linspace(0.0, 200.0, 4001)
        assert np.all(np.diff(interp1(x)) <= 0.0)

    def test_held_out_samples(self, star1, consts1):
        # interpolant built from every other sample must reproduce the
        # withheld samples of the same solution
        _, traj, _ = star1
        fit = fit_tail(w_transform(traj, consts1), consts1)
        sub = dataclasses.replace(traj, r=traj.r[::2], f=traj.f[::2],
                                  fprime=traj.fprime[::2], F=traj.F[::2],
                                  energy=traj.energy[::2])
        fn = profile_interpolant(sub, consts1, fit.A_est)
        # points past the decimated range hit the fitted-tail branch and
        # measure the fit residual instead of interpolation; exclude them
        keep = traj.r[1::2] <= sub.r[-1]
        r_t = traj.r[1::2][keep]
        err = np.abs(fn(r_t) - traj.f[1::2][keep]) / traj.f[1::2][keep]
        assert err.max() <= 1e-8

    def test_tail_extension(self, interp1, consts1, star1, fit=None):
        _, traj, _ = star1
        from extinction import fit_tail as ft
        fit = ft(w_transform(traj, consts1), consts1)
        r = 1000.0
        want = (consts1.Kstar * r ** -consts1.mu
                * (1.0 - fit.A_est / consts1.Kstar * r ** -fit.theta_est))
        assert interp1(r) == pytest.approx(want, rel=1e-10)

    def test_seam_continuity(self, interp1, star1):
        # the jump at the data/tail seam is bounded by the tail-fit
        # residual (~3e-5 of w here); the solver never evaluates past the
        # seam since L (T-t)^beta stays well inside the trajectory range
        _, traj, _ = star1
        r_seam = traj.r[-1]
        lo = interp1(r_seam * (1.0 - 1e-9))
        hi = interp1(r_seam * (1.0 + 1e-9))
        assert hi == pytest.approx(lo, rel=1e-5)


class TestBuildInitial:
    def test_values_and_scaling(self, star1, consts1, interp1):
        _, traj, _ = star1
        grid = RadialGrid(L=40.0, M=200, N=1)
        fld = build_initial(traj, consts1, T=2.0, grid=grid)
        al, be = consts1.alpha, consts1.beta
        xc = grid.centers()
        assert np.allclose(fld.values,
                           2.0 ** al * interp1(xc * 2.0 ** be), rtol=1e-12)
        assert fld.exact(0.0, np.array([0.0]))[0] == pytest.approx(
            2.0 ** 3.5 * A_STAR_N1, rel=1e-9)

    def test_grid_dimension_mismatch(self, star1, consts1):
        _, traj, _ = star1
        with pytest.raises(ValueError, match="dimension"):
            build_initial(traj, consts1, 1.0, RadialGrid(L=40.0, M=100, N=2))

    def test_L_too_small(self, star1, consts1):
        _, traj, _ = star1
        with pytest.raises(ValueError, match="L too small"):
            build_initial(traj, consts1, 1.0, RadialGrid(L=4.0, M=40, N=1))

    def test_uncertified_profile_rejected(self, params1, consts1):
        traj = integrate_profile(params1, consts1, 0.9 * A_STAR_N1, 100.0,
                                 n_samples=2048)
        with pytest.raises(ValueError, match="not certified"):
            build_initial(traj, consts1, 1.0, RadialGrid(L=40.0, M=100, N=1))

    def test_candidate_n2_with_cert_waived(self, star2, consts2):
        _, traj, _ = star2
        grid = RadialGrid(L=10.0, M=50, N=2)
        fld = build_initial(traj, consts2, 1.0, grid, require_cert=False)
        assert fld.values[0] > 0
        assert fld.values[-1] <= 1e-3 * fld.values[0]


class TestStep:
    def test_cfl_violation_raises(self, field1, params1):
        fld, grid = field1
        eps = 0.016 * grid.dx
        with pytest.raises(ValueError, match="CFL"):
            step(fld, grid, params1, eps, dt=1.0)

    def test_zero_data_stays_zero(self, params1, consts1):
        grid = RadialGrid(L=40.0, M=100, N=1)
        zero = lambda r: np.zeros_like(np.asarray(r, float))
        fld = SelfSimilarField(T=1.0, t=0.0, values=np.zeros(100),
                               grid=grid, profile=zero, consts=consts1)
        eps = 0.016 * grid.dx
        new = step(fld, grid, params1, eps, dt=0.3 * grid.dx ** 2
                   * eps ** (2.0 - params1.p))
        assert np.all(new.values == 0.0)
        assert new.n_clipped == 0

    def test_sup_decreases(self, field1, params1):
        fld, grid = field1
        eps = 0.016 * grid.dx
        dt = 0.3 * grid.dx ** 2 * eps ** (2.0 - params1.p)
        new = step(fld, grid, params1, eps, dt)
        assert new.values.max() < fld.values.max()
        assert new.t == pytest.approx(dt, rel=1e-14)

    def test_no_spurious_clipping(self, field1, params1):
        fld, grid = field1
        eps = 0.016 * grid.dx
        dt = 0.3 * grid.dx ** 2 * eps ** (2.0 - params1.p)
        cur = fld
        for _ in range(20):
            cur = step(cur, grid, params1, eps, dt)
        assert cur.n_clipped == 0

    def test_ordering_preserved(self, field1, params1):
        # comparison principle: data ordered initially stay ordered
        fld, grid = field1
        hi0 = dataclasses.replace(
            fld, values=fld.values + 0.05 * fld.values.max())
        eps = 0.016 * grid.dx
        dt = 0.3 * grid.dx ** 2 * eps ** (2.0 - params1.p)
        lo, hi = fld, hi0
        for _ in range(100):
            lo = step(lo, grid, params1, eps, dt)
            hi = step(hi, grid, params1, eps, dt)
            assert np.all(lo.values <= hi.values + 1e-14)

    def test_mass_conserved_without_absorption(self, field1, params1):
        fld, grid = field1
        eps = 0.016 * grid.dx
        dt = 0.3 * grid.dx ** 2 * eps ** (2.0 - params1.p)
        vol = grid.cell_volumes()
        m0 = float(np.sum(fld.values * vol))
        cur = fld
        for _ in range(50):
            cur = step(cur, grid, params1, eps, dt, absorb=False,
                       outer_bc="zeroflux")
        m1 = float(np.sum(cur.values * vol))
        assert abs(m1 - m0) <= 1e-12 * m0

    def test_absorption_is_a_sink(self, field1, params1):
        fld, grid = field1
        eps = 0.016 * grid.dx
        dt = 0.3 * grid.dx ** 2 * eps ** (2.0 - params1.p)
        vol = grid.cell_volumes()
        with_ab = step(fld, grid, params1, eps, dt, absorb=True,
                       outer_bc="zeroflux")
        without = step(fld, grid, params1, eps, dt, absorb=False,
                       outer_bc="zeroflux")
        assert (np.sum(with_ab.values * vol)
                < np.sum(without.values * vol))


class TestRunAndMeasure:
    def test_frozen_coarse_run(self, field1, params1, consts1):
        fld, grid = field1
        m = run_and_measure(fld, grid, params1, consts1, t_end=0.8)
        assert m.stable
        assert m.alpha_est == pytest.approx(3.6353, abs=5e-3)
        assert m.l1_exponent_est == pytest.approx(2.0163, abs=5e-3)
        assert m.selfsim_error == pytest.approx(0.19304, rel=1e-2)
        assert abs(m.steps - 292460) <= 5

    def test_l1_exponent_matches_closed_form(self, field1, params1,
                                             consts1):
        # integral exponent alpha - N beta = 3.5 - 1.5 = 2 in dimension 1
        fld, grid = field1
        m = run_and_measure(fld, grid, params1, consts1, t_end=0.8)
        want = consts1.alpha - params1.N * consts1.beta
        assert m.l1_exponent_est == pytest.approx(want, abs=0.2)

    def test_deterministic_rerun(self, field1, params1, consts1):
        fld, grid = field1
        m1 = run_and_measure(fld, grid, params1, consts1, t_end=0.8)
        m2 = run_and_measure(fld, grid, params1, consts1, t_end=0.8)
        assert metrics_json(m1) == metrics_json(m2)

    def test_t_end_validation(self, field1, params1, consts1):
        fld, grid = field1
        with pytest.raises(ValueError, match="t_end"):
            run_and_measure(fld, grid, params1, consts1, t_end=0.9)

    def test_snapshots_written(self, field1, params1, consts1, tmp_path):
        fld, grid = field1
        run_and_measure(fld, grid, params1, consts1, t_end=0.5,
                        snapshot_dir=tmp_path)
        files = sorted(tmp_path.glob("snapshot_*.csv"))
        assert len(files) >= 4
        lines = files[0].read_text().splitlines()
        assert lines[0].startswith("# t,")
        assert lines[1] == "x,u"
        assert len(lines) == 2 + grid.M

    def test_metrics_json_schema(self, field1, params1, consts1):
        import json
        fld, grid = field1
        m = run_and_measure(fld, grid, params1, consts1, t_end=0.8)
        d = json.loads(metrics_json(m))
        assert {"alpha_est", "l1_exponent_est", "selfsim_error", "stable",
                "steps", "kappa", "t_end"} <= set(d)
        assert "wall_s" not in d
