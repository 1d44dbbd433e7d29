import math

import numpy as np
import pytest

from aeroservo import windfield as wf


def small_grid(ny=7, nz=7):
    return wf.GridSpec(ny=ny, nz=nz, extent=89.15, hub_height=119.0, rotor_radius=89.15)


class TestSigmaTarget:
    def test_ntm_class_a_at_12(self):
        spec = wf.TurbulenceSpec(model="NTM", mean_wind=12.0, i_ref=0.16)
        assert math.isclose(wf.sigma_target(spec), 2.336, rel_tol=1e-12)

    def test_etm_class_a_at_12(self):
        spec = wf.TurbulenceSpec(model="ETM", mean_wind=12.0, i_ref=0.16, v_ref=50.0)
        assert math.isclose(wf.sigma_target(spec), 3.56864, rel_tol=1e-12)

    def test_zero_turbulence(self):
        spec = wf.TurbulenceSpec(model="NTM", mean_wind=10.0, i_ref=0.0)
        assert wf.sigma_target(spec) == 0.0


class TestGridSpec:
    def test_rejects_tiny_disk(self):
        # corner-only grid leaves fewer than 3 points inside the disk
        with pytest.raises(ValueError):
            wf.GridSpec(ny=2, nz=2, extent=89.15, rotor_radius=89.15)

    def test_rejects_extent_smaller_than_rotor(self):
        with pytest.raises(ValueError):
            wf.GridSpec(ny=15, nz=15, extent=50.0, rotor_radius=89.15)

    def test_disk_mask_counts(self):
        g = small_grid()
        dy, dz = g.offsets()
        mask = g.disk_mask()
        assert mask.sum() == g.n_disk_points >= 3
        assert np.all(dy[mask] ** 2 + dz[mask] ** 2 <= g.rotor_radius**2)


class TestSynthesize:
    def test_laminar_uniform(self):
        turb = wf.TurbulenceSpec(mean_wind=9.0, i_ref=0.0, shear_exponent=0.0)
        fld = wf.synthesize(small_grid(), turb, dt=0.5, duration=60.0)
        assert np.allclose(fld.u, 9.0)

    def test_deterministic_per_seed(self):
        turb = wf.TurbulenceSpec(mean_wind=12.0, seed=7)
        f1 = wf.synthesize(small_grid(), turb, dt=0.5, duration=60.0)
        f2 = wf.synthesize(small_grid(), turb, dt=0.5, duration=60.0)
        assert np.array_equal(f1.u, f2.u)

    def test_seed_changes_field(self):
        g = small_grid()
        f1 = wf.synthesize(g, wf.TurbulenceSpec(seed=1), dt=0.5, duration=60.0)
        f2 = wf.synthesize(g, wf.TurbulenceSpec(seed=2), dt=0.5, duration=60.0)
        assert not np.array_equal(f1.u, f2.u)

    def test_power_law_profile_slope(self):
        turb = wf.TurbulenceSpec(mean_wind=10.0, i_ref=0.0, shear_exponent=0.2)
        g = small_grid()
        fld = wf.synthesize(g, turb, dt=0.5, duration=60.0)
        _, dz = g.offsets()
        z = g.hub_height + dz
        slope = np.polyfit(np.log(z), np.log(fld.u[:, 0]), 1)[0]
        assert abs(slope - 0.2) < 1e-6

    def test_ensemble_std_matches_target(self):
        g = small_grid()
        hub = np.argmin(np.sum(np.square(np.column_stack(g.offsets())), axis=1))
        samples = []
        for seed in range(20):
            turb = wf.TurbulenceSpec(mean_wind=12.0, i_ref=0.16, shear_exponent=0.0, seed=seed)
            fld = wf.synthesize(g, turb, dt=0.5, duration=120.0)
            samples.append(fld.u[hub])
        pooled = np.concatenate(samples)
        target = wf.sigma_target(wf.TurbulenceSpec(mean_wind=12.0, i_ref=0.16))
        assert abs(np.std(pooled) - target) / target < 0.15

    def test_coherence_decays_with_separation(self):
        g = small_grid()
        turb = wf.TurbulenceSpec(mean_wind=12.0, seed=3)
        fld = wf.synthesize(g, turb, dt=0.5, duration=600.0)
        dy, dz = g.offsets()
        hub = np.argmin(dy**2 + dz**2)
        fluct = fld.u - fld.u.mean(axis=1, keepdims=True)
        dist = np.hypot(dy - dy[hub], dz - dz[hub])
        corr = np.array([np.corrcoef(fluct[hub], fluct[k])[0, 1] for k in range(g.n_points)])
        near = corr[(dist > 0) & (dist < 40)].mean()
        far = corr[dist > 120].mean()
        assert near > far

    def test_duration_guard(self):
        with pytest.raises(ValueError):
            wf.synthesize(small_grid(), wf.TurbulenceSpec(), dt=0.5, duration=30.0)


class TestFitRotorAverage:
    def test_uniform_field(self):
        fld = wf.affine_field(small_grid(), 8.0, dt=0.5, duration=60.0)
        assert wf.fit_rotor_average(fld, 10.0) == pytest.approx((8.0, 0.0, 0.0), abs=1e-12)

    def test_exact_affine_field(self):
        fld = wf.affine_field(small_grid(), 10.0, delta_h=0.0, delta_v=0.01, dt=0.5, duration=60.0)
        u_eff, dh, dv = wf.fit_rotor_average(fld, 0.0)
        assert u_eff == pytest.approx(10.0, abs=1e-10)
        assert dh == pytest.approx(0.0, abs=1e-12)
        assert dv == pytest.approx(0.01, abs=1e-12)

    def test_matches_normal_equations_oracle(self):
        g = wf.GridSpec(ny=5, nz=5, extent=89.15, rotor_radius=89.15)
        rng = np.random.default_rng(0)
        a, mask = wf._design_matrix(g)
        for _ in range(50):
            snap = rng.normal(10.0, 2.0, g.n_points)
            fld = wf.affine_field(g, 10.0, dt=0.5, duration=60.0)
            fld.u[:, 0] = snap
            got = np.array(wf.fit_rotor_average(fld, 0.0))
            oracle = np.linalg.solve(a.T @ a, a.T @ snap[mask])
            assert np.max(np.abs(got - oracle)) <= 1e-9 * max(1.0, np.max(np.abs(oracle)))

    def test_rank_deficient_rejected(self, monkeypatch):
        g = small_grid()
        fld = wf.affine_field(g, 10.0, dt=0.5, duration=60.0)
        dy, _ = g.offsets()
        collinear = np.zeros(g.n_points, dtype=bool)
        collinear[np.argsort(np.abs(dy))[:5]] = True  # five points on the dy=0 line
        monkeypatch.setattr(wf.GridSpec, "disk_mask", lambda self: collinear)
        with pytest.raises(ValueError, match="rank"):
            wf.fit_rotor_average(fld, 0.0)

    def test_time_outside_duration(self):
        fld = wf.affine_field(small_grid(), 10.0, dt=0.5, duration=60.0)
        with pytest.raises(ValueError):
            fld.snapshot_u(61.0)


class TestTruthStatistics:
    def test_constant_wind_zero_ti(self):
        fld = wf.affine_field(small_grid(), 10.0, dt=0.5, duration=60.0)
        stats = wf.truth_statistics(fld, (0.0, 59.0))
        assert stats.i_eff == 0.0
        assert stats.delta_std == 0.0

    def test_pythagorean_resultant(self):
        fld = wf.affine_field(small_grid(), 10.0, delta_h=3e-2, delta_v=4e-2, dt=0.5, duration=60.0)
        stats = wf.truth_statistics(fld, (0.0, 59.0))
        assert stats.delta_mean == pytest.approx(5e-2, rel=1e-12)
        assert stats.delta_std == pytest.approx(0.0, abs=1e-15)

    def test_matches_two_pass_oracle(self):
        turb = wf.TurbulenceSpec(mean_wind=12.0, seed=11)
        fld = wf.synthesize(small_grid(), turb, dt=0.5, duration=120.0)
        stats = wf.truth_statistics(fld, (0.0, 119.0))
        truth = wf.truth_series(fld)
        sel = truth.t <= 119.0 + 1e-9

        def two_pass(x):
            m = math.fsum(x) / len(x)
            var = math.fsum((xi - m) ** 2 for xi in x) / len(x)
            return m, math.sqrt(var)

        u_mean, u_std = two_pass(truth.u_eff[sel])
        d_mean, d_std = two_pass(truth.delta[sel])
        assert stats.u_mean == pytest.approx(u_mean, abs=1e-12)
        assert stats.u_std == pytest.approx(u_std, abs=1e-12)
        assert stats.delta_mean == pytest.approx(d_mean, abs=1e-12)
        assert stats.delta_std == pytest.approx(d_std, abs=1e-12)
        assert stats.i_eff >= 0.0

    def test_delta_dominates_components(self):
        turb = wf.TurbulenceSpec(mean_wind=12.0, seed=5)
        fld = wf.synthesize(small_grid(), turb, dt=0.5, duration=60.0)
        truth = wf.truth_series(fld)
        assert np.all(truth.delta >= np.abs(truth.delta_h) - 1e-15)
        assert np.all(truth.delta >= np.abs(truth.delta_v) - 1e-15)

    def test_short_segment_rejected(self):
        fld = wf.affine_field(small_grid(), 10.0, dt=0.5, duration=60.0)
        with pytest.raises(ValueError):
            wf.truth_statistics(fld, (0.0, 5.0))


class TestSampling:
    def test_bilinear_reproduces_affine(self):
        fld = wf.affine_field(small_grid(), 10.0, delta_h=0.02, delta_v=-0.01, dt=0.5, duration=60.0)
        dy = np.array([-60.0, 0.0, 33.3, 72.1])
        dz = np.array([10.0, -45.2, 0.0, 61.0])
        got = fld.sample_u(dy, dz, 12.3)
        expect = 10.0 + 0.02 * dy - 0.01 * dz
        assert np.allclose(got, expect, atol=1e-12)

    def test_time_interpolation(self):
        g = small_grid()
        fld = wf.affine_field(g, 10.0, dt=0.5, duration=60.0)
        fld.u[:, 0] = 10.0
        fld.u[:, 1] = 12.0
        got = fld.sample_u(np.array([0.0]), np.array([0.0]), 0.25)
        assert got[0] == pytest.approx(11.0, abs=1e-12)


class TestCache:
    def test_round_trip(self, tmp_path):
        turb = wf.TurbulenceSpec(mean_wind=12.0, seed=4, direction=8.0)
        fld = wf.synthesize(small_grid(), turb, dt=0.5, duration=60.0)
        p = tmp_path / "field.bin"
        wf.save_field(fld, p)
        back = wf.load_field(p)
        assert np.array_equal(back.u, fld.u)
        assert back.grid == fld.grid
        assert back.turbulence == fld.turbulence

    def test_cache_key_stable_and_sensitive(self):
        g = small_grid()
        t1 = wf.TurbulenceSpec(seed=1)
        t2 = wf.TurbulenceSpec(seed=2)
        assert wf.field_cache_key(g, t1, 0.25, 60.0) == wf.field_cache_key(g, t1, 0.25, 60.0)
        assert wf.field_cache_key(g, t1, 0.25, 60.0) != wf.field_cache_key(g, t2, 0.25, 60.0)
