"""The monotone coupling simulator, its certificates and assembled bound."""
import math
from fractions import Fraction

import pytest

from permfix.coupling import (
    Aggregates,
    RunConfig,
    assemble_tv_bound,
    birth_death_thresholds,
    drift_certificate,
    exact_tv_pi_check_zeta,
    monotone_step,
    monotonicity_certificate,
    run_coupling,
    selector_kernels,
    suggested_horizon,
)
from permfix.kernels import StochasticKernel, build_restricted, p_closedform


class TestRunConfig:
    def test_checkpoints_include_horizon(self):
        cfg = RunConfig(N=8, horizon=100, replicas=10, seed=0, checkpoints=(10,))
        assert cfg.checkpoints == (10, 100)

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(N=4, horizon=1, replicas=1, seed=0)
        with pytest.raises(ValueError):
            RunConfig(N=8, horizon=-1, replicas=1, seed=0)
        with pytest.raises(ValueError):
            RunConfig(N=8, horizon=1, replicas=1, seed=0, selector="nope")
        with pytest.raises(ValueError):
            RunConfig(N=8, horizon=5, replicas=1, seed=0, checkpoints=(9,))


class TestMonotoneStep:
    def test_u_zero_steps_down(self):
        p_check, r, _ = build_restricted(10)
        x, y = monotone_step(3, 5, 0.0, p_check, r)
        assert (x, y) == (2, 4)

    def test_u_near_one_steps_up(self):
        p_check, r, _ = build_restricted(10)
        x, y = monotone_step(3, 3, Fraction((1 << 53) - 1, 1 << 53), p_check, r)
        assert (x, y) == (4, 4)

    def test_identical_kernels_stay_coupled(self):
        _, r, _ = build_restricted(9)
        for k in range(0, 64):
            u = Fraction(2 * k + 1, 128)
            x, y = monotone_step(2, 2, u, r, r)
            assert x == y

    def test_disagreement_measure_equals_p_gap(self):
        # from x = y = 3 the set of u splitting the chains is exactly the
        # stay-threshold gap |1 - 2p(3)| / (N(N-1))
        n = 10
        p_check, r, _ = build_restricted(n)
        _, stay_x = birth_death_thresholds(p_check)
        _, stay_y = birth_death_thresholds(r)
        gap = abs(stay_x[3] - stay_y[3])
        p = p_closedform(n)
        assert gap == abs(1 - 2 * p[3]) / Fraction(n * (n - 1))

    def test_boundaries_respected(self):
        _, r, _ = build_restricted(8)
        big_u = Fraction((1 << 53) - 1, 1 << 53)
        assert monotone_step(0, 0, 0.0, r, r) == (0, 0)
        top = r.states[-1]
        assert monotone_step(top, top, big_u, r, r) == (top, top)


class TestRunCoupling:
    def test_identical_selector_zero_disagreement(self):
        cfg = RunConfig(N=8, horizon=400, replicas=300, seed=7, selector="r-r")
        stats = run_coupling(cfg)
        assert stats.final.counts["neq"] == 0
        assert stats.final.counts["tau_gt"] == 0

    def test_deterministic_across_jobs_and_blocks(self):
        cfg = RunConfig(N=8, horizon=300, replicas=500, seed=3)
        a = run_coupling(cfg, jobs=1, block_size=128)
        b = run_coupling(cfg, jobs=3, block_size=64)
        c = run_coupling(cfg, jobs=1, block_size=1 << 14)
        assert a.final.counts == b.final.counts == c.final.counts

    def test_exact_mode_matches_double(self):
        kwargs = dict(N=8, horizon=400, replicas=200, seed=42, checkpoints=(0, 100, 400))
        double = run_coupling(RunConfig(precision="double", **kwargs))
        exact = run_coupling(RunConfig(precision="exact", **kwargs))
        for n in (0, 100, 400):
            assert double.by_time[n].counts == exact.by_time[n].counts

    def test_trace_mode_matches_vector(self):
        kwargs = dict(N=8, horizon=250, replicas=150, seed=11, checkpoints=(0, 250))
        plain = run_coupling(RunConfig(**kwargs))
        traced = run_coupling(RunConfig(emit_traces=True, **kwargs))
        assert plain.final.counts == traced.final.counts
        assert len(traced.traces) == 150

    def test_trace_contents(self):
        cfg = RunConfig(N=8, horizon=120, replicas=40, seed=5, emit_traces=True)
        stats = run_coupling(cfg)
        for tr in stats.traces:
            assert len(tr.steps) == 120
            for x, y, u in tr.steps:
                assert 0 <= x <= 4 and 0 <= y <= 4 and 0.0 <= u < 1.0
            if tr.tau is not None:
                assert tr.tau <= 120
            # counters and order preservation are asserted inside the engine;
            # here just check increments are recorded in increasing order
            assert list(tr.z_incr) == sorted(tr.z_incr)

    def test_stationarity_start_dominates_exact_tv(self):
        # first inequality of the coupling bound at the sample level
        n = 8
        cfg = RunConfig(N=n, horizon=300, replicas=4000, seed=17)
        stats = run_coupling(cfg)
        tv = float(exact_tv_pi_check_zeta(n))
        assert tv <= stats.final.estimate("neq") + 3 * stats.final.sigma("neq") + 1e-12

    def test_independent_start_mode(self):
        cfg = RunConfig(N=8, horizon=50, replicas=200, seed=1, start_mode="independent")
        stats = run_coupling(cfg)
        assert stats.by_time[50].replicas == 200

    def test_copy_start_mode_keeps_equal_for_identical_kernels(self):
        cfg = RunConfig(
            N=8, horizon=100, replicas=100, seed=2, selector="r-r", start_mode="copy_x"
        )
        assert run_coupling(cfg).final.counts["neq"] == 0


class TestMonotonicityCertificate:
    @pytest.mark.parametrize("which", [1, 2])
    def test_r_kernels_monotone(self, which):
        kernels = build_restricted(10)
        report = monotonicity_certificate(kernels[which])
        assert report.ok
        assert all(margin >= 0 for _, margin in report.margins)
        assert any(margin > 0 for _, margin in report.margins)

    def test_pcheck_monotone_too(self):
        p_check, _, _ = build_restricted(10)
        assert monotonicity_certificate(p_check).ok

    def test_constructed_failure(self):
        # down-rate 1 at the top state, but stay+down below it downstairs
        kernel = StochasticKernel(
            (0, 1),
            ({0: Fraction(1, 4), 1: Fraction(3, 4)}, {0: Fraction(1)}),
            label="steep",
        )
        report = monotonicity_certificate(kernel)
        assert not report.ok
        assert report.margins[0][1] < 0


class TestDriftCertificate:
    def test_r_certificate_n10(self):
        cert = drift_certificate(10, "R")
        assert cert.theta == 1.0
        assert cert.c_est > 0
        assert cert.max_at_endpoints
        # vertex (N + e^{1/N}) / 2 of the quadratic lies inside [1, N-4]
        assert 1 <= cert.vertex <= 6
        assert abs(cert.vertex - (10 + math.exp(0.1)) / 2) < 1e-9

    def test_r_values_below_one(self):
        cert = drift_certificate(50, "R")
        assert all(v < 1 for _, v in cert.table)

    def test_exp_over_n_fails_for_r_tilde(self):
        # the literal exp(y/N) test function has no margin for R_tilde
        cert = drift_certificate(12, "R_tilde", theta=Fraction(1))
        assert cert.c_est < 0

    def test_r_tilde_auto_theta_positive(self):
        cert = drift_certificate(12, "R_tilde")
        assert cert.theta < 1
        assert cert.c_est > 0

    def test_tail_bound_decays(self):
        cert = drift_certificate(10, "R")
        assert cert.tail_bound(0) == math.e
        assert cert.tail_bound(10 ** 5) < 1e-6


class TestAssembledBound:
    def test_n_zero_is_vacuous_but_finite(self):
        report = assemble_tv_bound(10, 0)
        assert report.analytic_bound == pytest.approx(2 * math.e)

    def test_dominates_exact_tv(self):
        n_steps = int(10 ** 4 * math.log(10))
        report = assemble_tv_bound(10, n_steps)
        assert report.analytic_bound >= float(exact_tv_pi_check_zeta(10))

    def test_both_horizon_readings_available(self):
        # the quartic rule (forced by the c/N^3 drift rate) and the linear
        # one differ by a factor close to N^3
        quartic = suggested_horizon(10, exponent=4)
        linear = suggested_horizon(10, exponent=1)
        assert 0.9 * 10 ** 3 <= quartic / linear <= 1.1 * 10 ** 3
        assert assemble_tv_bound(10, quartic).analytic_bound > 0
        assert assemble_tv_bound(10, linear).analytic_bound > 0

    def test_empirical_assembly_monotone_in_inputs(self):
        low = Aggregates(n=10, replicas=100, counts={
            "neq": 0, "tau_gt": 0, "z_pos": 1, "ztilde_pos": 1, "zhat_pos": 1,
            "tau0x_gt": 1, "tau0y_gt": 1,
        })
        high = Aggregates(n=10, replicas=100, counts={
            "neq": 0, "tau_gt": 0, "z_pos": 9, "ztilde_pos": 1, "zhat_pos": 1,
            "tau0x_gt": 1, "tau0y_gt": 1,
        })
        a = assemble_tv_bound(8, 10, estimates=low).empirical_bound
        b = assemble_tv_bound(8, 10, estimates=high).empirical_bound
        assert a < b


class TestSelectorKernels:
    def test_stationary_laws_match_selectors(self):
        k_x, k_y, law_x, law_y = selector_kernels(9, "pcheck-r")
        assert k_x.label == "P_check" and k_y.label == "R"
        assert law_x.label.startswith("pi_check")
        assert law_y.label.startswith("zeta")

    def test_rtilde_selector_uses_its_stationary_law(self):
        _, k_y, _, law_y = selector_kernels(9, "pcheck-rtilde")
        assert k_y.label == "R_tilde"
        from permfix.kernels import check_reversibility

        assert check_reversibility(k_y, law_y).ok
