import numpy as np
import pytest

from gkdv.diagnostics import (
    ReferenceMismatch,
    attach_breather_columns,
    convergence_study,
    drift_series,
    linf_error,
    make_reference,
    max_drifts,
)
from gkdv.integrators import RunLog
from gkdv.sav import InvariantRecord
from gkdv.scenarios import get_scenario
from gkdv.spectral import make_grid


def fake_log(scheme="SAV-IRK4", I=(1.0, 1.0, 1.0), M=(2.0, 2.0, 2.0),
             Em=(3.0, 3.0, 3.0), E=None):
    E = E or Em
    records = [
        InvariantRecord(t=float(k), momentum=I[k], mass=M[k], energy=E[k],
                        energy_mod=Em[k])
        for k in range(len(I))
    ]
    return RunLog(scheme=scheme, tau=1.0, T=float(len(I) - 1), records=records)


class TestLinfError:
    def test_identical(self):
        u = np.arange(5.0)
        assert linf_error(u, u) == 0.0

    def test_single_node_bump(self):
        u = np.zeros(8)
        v = u.copy()
        v[3] += 1e-3
        assert np.isclose(linf_error(v, u), 1e-3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linf_error(np.zeros(4), np.zeros(5))


class TestDriftSeries:
    def test_constant_invariants(self):
        dI, dM, dE = drift_series(fake_log())
        assert dI.max() == dM.max() == dE.max() == 0.0

    def test_monotone_input_gives_cumulative_max(self):
        log = fake_log(M=(2.0, 2.5, 2.2))
        _, dM, _ = drift_series(log)
        np.testing.assert_allclose(dM, [0.0, 0.5, 0.5])

    def test_non_decreasing(self):
        log = fake_log(I=(0.0, 0.3, 0.1), M=(1.0, 0.2, 0.9), Em=(5.0, 5.4, 5.2))
        for series in drift_series(log):
            assert np.all(np.diff(series) >= 0)

    def test_energy_column_selection(self):
        log = fake_log(scheme="MCN", Em=(3.0, 4.0, 5.0), E=(3.0, 3.0, 3.0))
        _, _, dE = drift_series(log)  # physical energy for non-SAV schemes
        assert dE.max() == 0.0
        _, _, dEm = drift_series(log, use_modified=True)
        assert dEm.max() == 2.0

    def test_empty_log(self):
        with pytest.raises(ValueError):
            drift_series(RunLog(scheme="MCN", tau=1.0, T=0.0))

    def test_max_drifts_dict(self):
        d = max_drifts(fake_log(I=(0.0, 1.0, 0.5)))
        assert d["I"] == 1.0 and d["M"] == 0.0 and d["E"] == 0.0


class TestAttachBreatherColumns:
    def test_energy_convention_by_scheme(self):
        sav = fake_log(scheme="SAV-IRK4", M=(24.0,) * 3, Em=(104.0,) * 3,
                       E=(100.0,) * 3)
        recs = attach_breather_columns(sav)
        assert np.isclose(recs[0].gamma_num, 26.0)  # modified energy used
        mcn = fake_log(scheme="MCN", M=(24.0,) * 3, Em=(104.0,) * 3,
                       E=(104.0,) * 3)
        recs = attach_breather_columns(mcn)
        assert np.isclose(recs[0].beta_num, 1.0)


class TestConvergenceStudy:
    def test_exact_stepper_double(self):
        sc = get_scenario("two_soliton")
        g = make_grid(sc.L, sc.N)

        def exact_run(scenario, grid, scheme, tau, T, fp_tol):
            rec = InvariantRecord(t=T, momentum=0, mass=0, energy=0,
                                  energy_mod=0)
            return RunLog(scheme=scheme, tau=tau, T=T, records=[rec],
                          final_u=scenario.exact(grid.x, T))

        rows = convergence_study("SAV-IRK4", sc, [0.2, 0.1], 1.0, g=g,
                                 run_fn=exact_run)
        assert all(r.error == 0.0 for r in rows)
        assert all(r.rate is None for r in rows)

    def test_rate_is_error_ratio_sorted_by_tau(self):
        sc = get_scenario("two_soliton")
        g = make_grid(sc.L, sc.N)
        errors = {0.2: 8.0, 0.1: 2.0, 0.05: 0.5}

        def canned(scenario, grid, scheme, tau, T, fp_tol):
            exact = scenario.exact(grid.x, T)
            u = exact.copy()
            u[0] += errors[tau]
            rec = InvariantRecord(t=T, momentum=0, mass=0, energy=0,
                                  energy_mod=0)
            return RunLog(scheme=scheme, tau=tau, T=T, records=[rec], final_u=u)

        rows = convergence_study("SAV-IRK2", sc, [0.05, 0.2, 0.1], 1.0, g=g,
                                 run_fn=canned)
        assert [r.tau for r in rows] == [0.2, 0.1, 0.05]
        assert rows[0].rate is None
        assert np.isclose(rows[1].rate, 4.0)
        assert np.isclose(rows[2].rate, 4.0)

    def test_blowup_row_flagged(self):
        sc = get_scenario("two_soliton")
        g = make_grid(sc.L, sc.N)

        def sometimes_blows(scenario, grid, scheme, tau, T, fp_tol):
            rec = InvariantRecord(t=T, momentum=0, mass=0, energy=0,
                                  energy_mod=0)
            log = RunLog(scheme=scheme, tau=tau, T=T, records=[rec],
                         final_u=scenario.exact(grid.x, T))
            if tau > 0.15:
                log.blowup_time = 0.5
            return log

        rows = convergence_study("SAV-IRK2", sc, [0.2, 0.1], 1.0, g=g,
                                 run_fn=sometimes_blows)
        assert rows[0].blowup and rows[0].error is None and rows[0].rate is None
        assert not rows[1].blowup

    def test_scatter_requires_reference(self):
        sc = get_scenario("scatter")
        with pytest.raises(ValueError, match="reference"):
            convergence_study("SAV-IRK4", sc, [0.1], 0.1)


class TestMakeReference:
    def test_t_zero_returns_initial(self):
        sc = get_scenario("scatter")
        g = make_grid(sc.L, 256)
        u_ref, gap = make_reference(sc, g, 0.01, 0.0)
        np.testing.assert_allclose(u_ref, sc.initial(g.x))
        assert gap == 0.0

    def test_short_horizon_agreement(self):
        sc = get_scenario("scatter")
        g = make_grid(sc.L, 1024)
        u_ref, gap = make_reference(sc, g, 1e-4, 0.05)
        assert gap <= 1e-10
        assert np.isfinite(u_ref).all()

    def test_desk_tau_ref_is_rejected_on_example3(self):
        # the 4th-order reference at tau_ref = 1/6400 still carries ~2e-9 of
        # its own error at T = 1, so the two integrators disagree beyond the
        # 1e-10 acceptance gap and the reference must be rejected
        sc = get_scenario("scatter")
        g = make_grid(sc.L, 1024)
        with pytest.raises(ReferenceMismatch, match="disagree"):
            make_reference(sc, g, 1.0 / 6400.0, 1.0)
