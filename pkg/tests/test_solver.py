import numpy as np
import pytest

from conftest import box_datum
from fracpme.field import Field, FieldKind, Grid, ModelParams, mass
from fracpme.oracles import poisson_kernel
from fracpme.solver import (PressureSolver, SolverState, Trajectory, pressure_backend,
                            run, step, vanishing_sweep)


def poisson_datum(grid):
    vals = poisson_kernel(1.0, grid).values.copy()
    vals[0] = vals[-1] = 0.0
    return Field(grid, vals, FieldKind.DENSITY)


class TestStep:
    def test_zero_stays_zero(self):
        g = Grid.centered(256, 10.0)
        for m, s in [(1.5, 0.25), (2.0, 0.4), (3.0, 0.25)]:
            st = SolverState(0.0, Field(g, np.zeros(256)), ModelParams(m=m, s=s, R=10.0))
            out = step(st, dt_max=0.1)
            assert np.all(out.u.values == 0.0)

    def test_mass_conserved_per_step(self):
        g = Grid.centered(512, 20.0)
        st = SolverState(0.0, box_datum(g), ModelParams(m=1.5, s=0.25, R=20.0))
        m0 = mass(st.u)
        for _ in range(20):
            st = step(st)
        assert abs(mass(st.u) - m0) < 1e-13 * m0

    def test_linearity_at_m1(self):
        # with mu = delta = 0 and m = 1 the update map is linear in u
        g = Grid.centered(512, 50.0)
        params = ModelParams(m=1.0, s=0.25, R=50.0)
        u = poisson_datum(g)
        a = 2.5
        dt = 1e-4
        s1 = step(SolverState(0.0, u, params), forced_dt=dt)
        s2 = step(SolverState(0.0, Field(g, a * u.values), params), forced_dt=dt)
        assert np.max(np.abs(s2.u.values - a * s1.u.values)) < 1e-12 * a * np.max(u.values)

    def test_boundary_datum_validated(self):
        g = Grid.centered(256, 10.0)
        vals = np.ones(256)
        with pytest.raises(ValueError):
            run(ModelParams(m=1.5, s=0.25, R=10.0), Field(g, vals), 0.1)


class TestRun:
    def test_short_horizon_two_snapshots(self):
        g = Grid.centered(256, 10.0)
        traj = run(ModelParams(m=2.0, s=0.25, R=10.0), box_datum(g), 1e-9)
        assert traj.times == [0.0, 1e-9]

    def test_snapshot_times_exact(self):
        g = Grid.centered(256, 10.0)
        times = [0.0, 0.0123456789, 0.1]
        traj = run(ModelParams(m=1.5, s=0.25, R=10.0), box_datum(g), 0.1, times)
        assert traj.times == times  # bit-level landing

    def test_linf_nonincreasing_and_nonnegative(self, bench_run):
        linfs = [r.linf for r in bench_run.diagnostics]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(linfs, linfs[1:]))
        for _, u in bench_run.snapshots:
            assert np.all(u.values >= 0.0)

    def test_interior_mass_conservation(self, bench_run):
        masses = [r.mass for r in bench_run.diagnostics]
        assert all(abs(mm - masses[0]) < 1e-12 * masses[0] for mm in masses)

    def test_m2_monotone_support_and_linf(self):
        g = Grid.centered(1024, 50.0)
        traj = run(ModelParams(m=2.0, s=0.25, R=50.0), box_datum(g), 1.0,
                   np.linspace(0, 1, 6))
        theta = 1e-10 * 0.5
        radii = [np.max(np.abs(g.x)[u.values > theta], initial=0.0)
                 for _, u in traj.snapshots]
        assert all(b >= a for a, b in zip(radii, radii[1:]))
        linfs = [r.linf for r in traj.diagnostics]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(linfs, linfs[1:]))

    def test_deterministic(self):
        g = Grid.centered(512, 20.0)
        p = ModelParams(m=1.5, s=0.25, R=20.0)
        t1 = run(p, box_datum(g), 0.2, [0.1, 0.2])
        t2 = run(p, box_datum(g), 0.2, [0.1, 0.2])
        for (a, fa), (b, fb) in zip(t1.snapshots, t2.snapshots):
            assert a == b and np.array_equal(fa.values, fb.values)

    def test_poisson_semigroup_oracle(self):
        # m=1, s=1/2: u_t = -(-Dl)^{1/2} u, P_1 -> P_2 after unit time
        g = Grid.centered(2**12, 100.0)
        traj = run(ModelParams(m=1.0, s=0.5, R=100.0), poisson_datum(g), 1.0)
        ref = poisson_kernel(2.0, g).values
        err = g.h * np.sum(np.abs(traj.snapshots[-1][1].values - ref)) / (g.h * np.sum(ref))
        assert err < 0.05

    def test_refinement_consistency(self):
        errs = []
        for n in (2**10, 2**11):
            g = Grid.centered(n, 100.0)
            traj = run(ModelParams(m=1.0, s=0.5, R=100.0), poisson_datum(g), 1.0)
            ref = poisson_kernel(2.0, g).values
            errs.append(g.h * np.sum(np.abs(traj.snapshots[-1][1].values - ref))
                        / (g.h * np.sum(ref)))
        assert errs[1] < errs[0]


class TestPressureBackend:
    def test_auto_rule(self):
        assert pressure_backend(ModelParams(m=2.0, s=0.25)) == "quadrature"
        assert pressure_backend(ModelParams(m=2.0, s=0.5)) == "spectral_padded"
        assert pressure_backend(ModelParams(m=2.0, s=0.25, eps=1e-3)) == "spectral_padded"

    def test_quadrature_rejects_smoothed(self):
        g = Grid.centered(256, 10.0)
        with pytest.raises(ValueError):
            PressureSolver(g, ModelParams(m=2.0, s=0.25, eps=1e-3), backend="quadrature")


class TestVanishingSweep:
    def test_single_rung_empty_distances(self):
        g = Grid.centered(256, 10.0)
        rep = vanishing_sweep(ModelParams(m=1.5, s=0.25, R=10.0), box_datum(g), 0.05,
                              [(1e-3, 1e-2, 1e-3, 10.0)])
        assert rep.distances == [] and rep.rungs[0].ok

    def test_delta_ladder_cauchy(self):
        g = Grid.centered(512, 20.0)
        ladder = [(4e-3, 1e-2, 1e-3, 20.0), (2e-3, 1e-2, 1e-3, 20.0),
                  (1e-3, 1e-2, 1e-3, 20.0)]
        rep = vanishing_sweep(ModelParams(m=1.5, s=0.25, R=20.0), box_datum(g), 0.2, ladder)
        assert all(r.ok for r in rep.rungs)
        assert rep.cauchy_decreasing

    def test_mu_ladder_energy_bounded(self):
        from fracpme.diagnostics import fmu

        g = Grid.centered(512, 20.0)
        ladder = [(1e-3, 1e-1, 1e-3, 20.0), (1e-3, 1e-2, 1e-3, 20.0),
                  (1e-3, 1e-3, 1e-3, 20.0)]
        rep = vanishing_sweep(ModelParams(m=2.5, s=0.25, R=20.0), box_datum(g), 0.2, ladder)
        for rung in rep.rungs:
            assert rung.ok
            u0 = rung.trajectory.snapshots[0][1]
            uT = rung.trajectory.snapshots[-1][1]
            f0 = g.h * np.sum(fmu(u0.values, rung.mu, 2.5))
            fT = g.h * np.sum(fmu(uT.values, rung.mu, 2.5))
            assert fT <= f0 * (1 + 1e-8)

    def test_ladder_ordering_enforced(self):
        g = Grid.centered(256, 10.0)
        with pytest.raises(ValueError):
            vanishing_sweep(ModelParams(m=1.5, s=0.25, R=10.0), box_datum(g), 0.05,
                            [(1e-3, 1e-2, 1e-3, 10.0), (2e-3, 1e-2, 1e-3, 10.0)])
