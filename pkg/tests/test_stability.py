import numpy as np
import pytest

from tandemfluid import (
    ConstantInflow,
    Infeasible,
    SimConfig,
    StabilityCertificate,
    SystemParams,
    TwoLink,
    check_necessary,
    check_necessary_feedback,
    check_sufficient,
    check_sufficient_feedback,
    finite_buffer_spectrum,
    simulate,
    verify_drift,
)
from tandemfluid.stability import CERT_TOL, certificate_program, generator_of_certificate


def test_necessary_zero_inflow(nominal):
    verdict = check_necessary(0.0, nominal)
    assert verdict.holds and verdict.prerequisite_ok


def test_necessary_prerequisite_strict(nominal):
    # r equal to min(v, mean capacity) already fails the prerequisite.
    verdict = check_necessary(0.75, nominal)
    assert not verdict.prerequisite_ok
    assert not verdict.holds
    assert verdict.p_hat is None


def test_necessary_verdict_matches_sign(nominal):
    p_hat = finite_buffer_spectrum(0.70, nominal).p_hat
    rhs = (1.0 - p_hat) * 0.75 + p_hat * 0.5
    verdict = check_necessary(0.70, nominal)
    assert verdict.rhs == pytest.approx(rhs, rel=1e-12)
    assert verdict.holds == (0.70 <= rhs)
    assert verdict.holds


def test_sufficient_examples(nominal):
    assert isinstance(check_sufficient(0.60, nominal), StabilityCertificate)
    assert isinstance(check_sufficient(0.65, nominal), StabilityCertificate)
    assert isinstance(check_sufficient(0.70, nominal), Infeasible)


def test_certificate_satisfies_core_rows(nominal):
    # Re-substitute the certificate into the five drift rows and the three
    # base d rows explicitly (independent of the LP plumbing).
    r = 0.63
    cert = check_sufficient(r, nominal)
    v, u1, u2, lam, mu, th = (nominal.v, nominal.u1, nominal.u2,
                              nominal.lam, nominal.mu, nominal.theta)
    a1, a2, b1, b2, c, d = (cert.a1, cert.a2, cert.b1, cert.b2, cert.c, cert.d)
    rows = [
        2 * (r - v) + lam * (b2 - b1) + c,
        2 * (r - v) + a1 * (v - u1) + lam * (a2 - a1) * th + lam * (b2 - b1) + c,
        2 * (r - v) + a2 * (v - u2) + mu * (b1 - b2) + c,
        2 * (r - v) + a2 * (v - u2) + mu * (a1 - a2) * th + mu * (b1 - b2) + c,
        2 * (r - u2) + mu * (a1 - a2) * th + mu * (b1 - b2) + c,
        a1 * (r - v) + c * th - d,
        a2 * (r - u2) + c * th - d,
        c * th - d,
    ]
    assert max(rows) <= CERT_TOL
    assert min(a1, a2, b1, b2, c, d) > 0.0
    assert cert.queue_bound == d / c


def test_feedback_collapses_to_constant(nominal):
    nv_fb = check_necessary_feedback(0.6, 0.6, nominal)
    nv = check_necessary(0.6, nominal)
    assert nv_fb.holds == nv.holds
    assert nv_fb.p_hat == pytest.approx(nv.p_hat, rel=1e-12)
    fb = check_sufficient_feedback(0.6, 0.6, nominal)
    const = check_sufficient(0.6, nominal)
    assert isinstance(fb, StabilityCertificate) and isinstance(const, StabilityCertificate)


def test_feedback_saturating_both_modes_unstable(nominal):
    # Sending full capacity regardless of mode: average admitted inflow
    # exceeds the spillback-adjusted service rate.
    verdict = check_necessary_feedback(0.75, 0.75, nominal)
    assert verdict.lhs == pytest.approx(0.75, abs=1e-15)
    assert verdict.rhs == pytest.approx(0.725, abs=1e-12)
    assert not verdict.holds


def test_feedback_mode_matched_pair(nominal):
    verdict = check_necessary_feedback(0.75, 0.5, nominal)
    assert verdict.holds
    cert = check_sufficient_feedback(0.75, 0.5, nominal)
    assert isinstance(cert, StabilityCertificate)
    report = verify_drift(cert, (0.75, 0.5), nominal)
    assert report.passed, report


def test_feedback_overload_infeasible(nominal):
    assert isinstance(check_sufficient_feedback(1.0, 1.0, nominal), Infeasible)


def test_drift_verifier_oracle_triple(nominal):
    cert = check_sufficient(0.60, nominal)
    assert verify_drift(cert, 0.60, nominal, q1_max=50.0, n_q1=200, n_q2=50).passed

    inflated = StabilityCertificate(cert.a1, cert.a2, cert.b1, cert.b2, 10 * cert.c, cert.d)
    assert not verify_drift(inflated, 0.60, nominal).passed

    eps_cert = StabilityCertificate(1e-9, 1e-9, 1e-9, 1e-9, 1e-9, 1e-9)
    assert not verify_drift(eps_cert, 0.74, nominal).passed


def test_every_returned_certificate_passes_drift(nominal):
    for r in (0.0, 0.2, 0.4, 0.6, 0.65, 0.68):
        cert = check_sufficient(r, nominal)
        assert isinstance(cert, StabilityCertificate), f"r={r}"
        report = verify_drift(cert, r, nominal)
        assert report.passed, f"r={r}: {report}"


def test_feasibility_monotone_on_grid(nominal):
    feasible = [isinstance(check_sufficient(r, nominal), StabilityCertificate)
                for r in np.arange(0.6, 0.7, 0.005)]
    # once infeasible, stays infeasible
    assert feasible == sorted(feasible, reverse=True)


def test_generator_vanishes_at_origin_equilibrium(nominal):
    cert = check_sufficient(0.6, nominal)
    # At (0,0) the inflow passes straight through: L V = 0.
    assert generator_of_certificate(cert, 1, 0.0, 0.0, ConstantInflow(0.6), nominal) == 0.0


def test_certified_bound_holds_in_simulation(nominal):
    r = 0.60
    cert = check_sufficient(r, nominal)
    cfg = SimConfig(horizon=2e4, seed=99, warmup=2e3, replications=20)
    stats = simulate(TwoLink(nominal, ConstantInflow(r)), cfg)
    bound = cert.queue_bound
    assert stats.time_avg_total_queue.mean <= bound + 3 * stats.time_avg_total_queue.stderr


def test_unstable_inflow_shows_growth(nominal):
    # 0.74 violates the necessary condition; the first queue must grow at
    # least at the residual-rate margin.
    assert not check_necessary(0.74, nominal).holds
    cfg = SimConfig(horizon=2e5, seed=7, warmup=0.0, replications=10)
    stats = simulate(TwoLink(nominal, ConstantInflow(0.74)), cfg)
    g = stats.terminal_q_over_t
    assert g.mean - 3 * g.stderr > 0.0


def test_verifier_rejects_malformed_grid(nominal):
    cert = check_sufficient(0.6, nominal)
    with pytest.raises(Exception):
        verify_drift(cert, 0.6, nominal, n_q1=1)


def test_certificate_program_offset_rows_only_bind_d(nominal):
    # The buffer-full offset rows involve d with a -1 coefficient only;
    # they cannot change feasibility of (a, b, c).
    prog = certificate_program(0.66, 0.66, nominal)
    for con in prog.constraints[5:]:
        assert con.coeffs[5] == -1.0
