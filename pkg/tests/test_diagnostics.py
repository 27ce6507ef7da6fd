import math

import numpy as np
import pytest

from conftest import box_datum
from fracpme import diagnostics as dg
from fracpme.field import Field, FieldKind, Grid, ModelParams
from fracpme.solver import run


class TestFmu:
    @pytest.mark.parametrize("m", [1.5, 2.0, 2.5, 3.0, 4.0])
    def test_vanishes_at_zero(self, m):
        assert dg.fmu(0.0, 0.01, m) == 0.0

    def test_m2_paper_value(self):
        mu = 0.37
        assert dg.fmu(mu, mu, 2.0) == pytest.approx(2.0 * mu * math.log(2.0) - mu, rel=1e-14)

    @pytest.mark.parametrize("m0", [2.0, 3.0])
    def test_branch_continuity(self, m0):
        for u in (0.1, 1.0, 10.0):
            ref = dg.fmu(u, 0.01, m0)
            for dm in (1e-6, -1e-6):
                general = dg._fmu_general(u, 0.01, m0 + dm)
                assert abs(general - ref) < 1e-4 * (1.0 + ref)

    @pytest.mark.parametrize("m", [1.5, 2.0, 2.7, 3.0, 3.5])
    def test_nonnegative_and_convex(self, m):
        us = np.linspace(0.0, 5.0, 201)
        vals = dg.fmu(us, 0.05, m)
        assert np.all(vals >= -1e-15)
        second = np.diff(vals, 2)
        assert np.all(second >= -1e-12)

    def test_mu_zero_rejected(self):
        with pytest.raises(ValueError):
            dg.fmu(1.0, 0.0, 2.0)


@pytest.fixture(scope="module")
def regularized_traj():
    g = Grid.centered(2**11, 50.0)
    params = ModelParams(m=1.5, s=0.25, delta=1e-3, mu=1e-2, eps=1e-3, R=50.0)
    return run(params, box_datum(g), 0.5, np.linspace(0.0, 0.5, 11))


class TestEnergyIdentity:
    def test_residual_small(self, regularized_traj):
        # the pinned 10% check runs at the reference resolution in the
        # acceptance suite; this moderate-resolution run tracks more loosely
        reps = dg.energy_identity(regularized_traj)
        assert reps[-1].identity_residual < 0.25

    def test_accumulators_nondecreasing(self, regularized_traj):
        reps = dg.energy_identity(regularized_traj)
        visc = [r.visc_dissip_accum for r in reps]
        gradh = [r.gradH_dissip_accum for r in reps]
        assert all(b >= a for a, b in zip(visc, visc[1:]))
        assert all(b >= a for a, b in zip(gradh, gradh[1:]))

    def test_zero_datum_zero_residual(self):
        g = Grid.centered(256, 10.0)
        params = ModelParams(m=1.5, s=0.25, mu=1e-2, R=10.0)
        traj = run(params, Field(g, np.zeros(256)), 0.01)
        reps = dg.energy_identity(traj)
        assert all(r.identity_residual == 0.0 for r in reps)

    def test_unregularized_rejected(self, bench_run):
        with pytest.raises(ValueError):
            dg.energy_identity(bench_run)


class TestDissipation3m:
    def test_constant_paper_value(self):
        assert (2.0 - 1.5) * (3.0 - 1.5) == pytest.approx(0.75)
        rep_m = 1.5
        assert dg.Dissipation3mReport(rep_m, (2 - rep_m) * (3 - rep_m), [], [], [], [], True).C == 0.75

    def test_benchmark_monotone_and_small_residual(self, bench_run):
        # pinned 10% at the reference resolution lives in the acceptance suite
        rep = dg.dissipation_3m(bench_run, 1.5)
        assert rep.monotone
        assert rep.residuals[-1] < 0.25

    def test_regime_validation(self, bench_run):
        with pytest.raises(ValueError):
            dg.dissipation_3m(bench_run, 2.5)

    def test_stationary_zero(self):
        g = Grid.centered(256, 10.0)
        traj = run(ModelParams(m=1.5, s=0.25, R=10.0), Field(g, np.zeros(256)), 0.01)
        rep = dg.dissipation_3m(traj, 1.5)
        assert all(v == 0.0 for v in rep.u3m) and all(d == 0.0 for d in rep.dissipation)


class TestTailMetrics:
    def test_exponential_recovery(self):
        g = Grid.centered(2048, 40.0)
        u = Field(g, 3.0 * np.exp(-1.7 * np.abs(g.x)))
        fit = dg.tail_metrics(u, (5.0, 35.0))
        assert fit.exp_rate == pytest.approx(1.7, abs=1e-6)
        assert fit.flagged == "exponential"

    def test_algebraic_recovery(self):
        g = Grid.centered(2048, 40.0)
        u = Field(g, (np.abs(g.x) + 1e-9) ** -3.0)
        fit = dg.tail_metrics(u, (5.0, 35.0))
        assert fit.alg_exponent == pytest.approx(-3.0, abs=1e-6)
        assert fit.flagged == "algebraic"

    def test_too_few_cells(self):
        g = Grid.centered(256, 10.0)
        u = Field(g, np.zeros(256))
        with pytest.raises(ValueError):
            dg.tail_metrics(u, (2.0, 8.0))

    def test_exponential_tail_run_stays_exponential(self):
        # m > 2 evolution from exponentially decaying data keeps an
        # exponential-looking tail
        g = Grid.centered(2**11, 50.0)
        vals = np.exp(-2.0 * np.abs(g.x))
        vals[0] = vals[-1] = 0.0
        traj = run(ModelParams(m=2.5, s=0.25, R=50.0), Field(g, vals), 0.5, [0.5])
        fit = dg.tail_metrics(traj.snapshots[-1][1], (5.0, 40.0))
        assert fit.flagged == "exponential"


@pytest.fixture(scope="module")
def finite_traj():
    g = Grid.centered(2**11, 50.0)
    return run(ModelParams(m=3.0, s=0.25, R=50.0), box_datum(g), 1.0,
               np.linspace(0.0, 1.0, 11))


class TestCheckPropagation:
    def test_infinite_classification(self, bench_run):
        rep = dg.check_propagation(bench_run)
        assert rep.classification is dg.Propagation.INFINITE

    def test_finite_classification(self, finite_traj):
        rep = dg.check_propagation(finite_traj)
        assert rep.classification is dg.Propagation.FINITE

    def test_deterministic(self, finite_traj):
        r1 = dg.check_propagation(finite_traj)
        r2 = dg.check_propagation(finite_traj)
        assert r1.to_dict() == r2.to_dict()

    def test_theta_monotone_no_finite_to_infinite_flip(self, bench_run, finite_traj):
        for traj in (bench_run, finite_traj):
            base = dg.check_propagation(traj)
            prev = base.classification
            for mult in (10.0, 100.0):
                rep = dg.check_propagation(traj, theta=base.theta * mult)
                if prev is dg.Propagation.FINITE:
                    assert rep.classification is not dg.Propagation.INFINITE
                prev = rep.classification

    def test_empty_initial_support_rejected(self):
        g = Grid.centered(256, 10.0)
        traj = run(ModelParams(m=1.5, s=0.25, R=10.0), Field(g, np.zeros(256)), 0.01)
        with pytest.raises(ValueError):
            dg.check_propagation(traj)

    def test_report_serializes(self, finite_traj):
        d = dg.check_propagation(finite_traj).to_dict()
        import json

        json.dumps(d)
        assert d["classification"] == "finite_evidence"
