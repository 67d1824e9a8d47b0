import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from conftest import make_scenario, pair_scenario_dict
from etconsensus.bounds import (DropoutSpec, TriggerParams, certify,
                                event_inequality_margin, gamma_loss,
                                h_coefficients, k_coefficients,
                                max_admissible_delay, min_inter_event_time,
                                xi_gain)
from etconsensus.cli import load_scenario_dict
from etconsensus.errors import (AssumptionViolated, DegenerateBound,
                                InvalidSpectralGap)
from etconsensus.graph import build_graph


def gamma_loss_oracle(beta, lam, rho, delta_bar, tau):
    # term-by-term summation, kept independent of the implementation
    return sum(beta * math.exp(rho * lam * delta_bar) * math.exp(-mu * lam * tau)
               for mu in range(1, rho + 1))


def test_gamma_loss_paper_values():
    got = gamma_loss(1.0, 0.4, 4, 1.5, 0.0)
    assert got == pytest.approx(gamma_loss_oracle(1.0, 0.4, 4, 1.5, 0.0))
    assert got == pytest.approx(4 * math.exp(2.4))
    assert got == pytest.approx(44.0927, abs=1e-4)


def test_gamma_loss_degenerate_single_term():
    assert gamma_loss(1.0, 0.7, 1, 0.0, 0.0) == pytest.approx(1.0)


def test_gamma_loss_linear_in_beta():
    assert gamma_loss(2.0, 0.4, 4, 1.5, 0.0) == pytest.approx(
        2 * gamma_loss(1.0, 0.4, 4, 1.5, 0.0))


@pytest.mark.parametrize("rho_pair", [(2, 3), (3, 5)])
@pytest.mark.parametrize("dbar_pair", [(0.5, 1.0), (1.0, 2.5)])
def test_gamma_loss_monotone_in_rho_and_delta_bar(rho_pair, dbar_pair):
    r0, r1 = rho_pair
    d0, d1 = dbar_pair
    assert gamma_loss(1.0, 0.4, r0, d0) <= gamma_loss(1.0, 0.4, r1, d0)
    assert gamma_loss(1.0, 0.4, r0, d0) <= gamma_loss(1.0, 0.4, r0, d1)


def test_xi_gain_chain():
    g = build_graph([[0, 0], [1, 0]])  # N_1 = 0, N_2 = 1
    beta, gamma = 1.3, 2.7
    assert xi_gain(g, beta, gamma) == pytest.approx(math.sqrt(2) * beta + gamma)


def test_xi_gain_edgeless():
    g = build_graph([[0, 0], [0, 0]])
    assert xi_gain(g, 1.0, 5.0) == 0.0


def test_xi_gain_paper_graph_matches_direct_formula():
    from test_graph import paper_adjacency
    g = build_graph(paper_adjacency())
    beta, gamma = 1.0, 44.0927 + 9.0
    deg = [1, 2, 2, 2, 1, 1]
    direct = max(deg) * math.sqrt(6) * beta + gamma * math.sqrt(sum(d * d for d in deg))
    assert xi_gain(g, beta, gamma) == pytest.approx(direct)
    assert xi_gain(g, beta, gamma) > 0


def test_h_coefficients_trivial_cases():
    h1, h2 = h_coefficients(2.0, 1.5, 1.0, 0.4, 0.0, 0.0, 3.0, 1.0, 2.0)
    assert h1 == 0.0
    assert h2 == pytest.approx(3.0 * (1.0 + 2.0))
    # eta0 exactly cancels the Gamma term
    h1, _ = h_coefficients(2.0, 1.5, 1.0, 0.4, 5.0 / 0.6, 5.0, 3.0, 1.0, 2.0)
    assert h1 == pytest.approx(0.0, abs=1e-12)


def test_h_coefficients_requires_spectral_gap():
    with pytest.raises(InvalidSpectralGap):
        h_coefficients(1.0, 1.0, 0.4, 0.4, 1.0, 1.0, 1.0, 1.0, 1.0)


def test_k_coefficients_trivial_cases():
    k1, k2 = k_coefficients(2.0, 1.5, 1.0, 0.4, 3.0, 0.0, 4, 2.0, 1.7)
    assert k1 == pytest.approx(2.0 * 1.5 * 3.0)
    assert k2 == 0.0
    eta0 = 2.0 * math.sqrt(4) * 1.7 / 0.6
    k1, _ = k_coefficients(2.0, 1.5, 1.0, 0.4, eta0, 2.0, 4, 2.0, 1.7)
    assert k1 == pytest.approx(0.0, abs=1e-9)


def test_min_inter_event_time_log2_case():
    lam, lam_hat, beta = 0.4, 1.0, 2.0
    tau = min_inter_event_time(0.0, lam * beta, beta, lam, lam_hat)
    assert tau == pytest.approx(math.log(2.0) / lam_hat)


def test_min_inter_event_time_vanishes_with_beta():
    taus = [min_inter_event_time(0.0, 10.0, b, 0.4, 1.0) for b in (1e-2, 1e-5, 1e-9)]
    assert taus[0] > taus[1] > taus[2]
    assert taus[2] < 1e-9


def test_min_inter_event_time_negative_h1_clamped():
    tau = min_inter_event_time(-100.0, 10.0, 1.0, 0.4, 1.0)
    assert tau == pytest.approx(min_inter_event_time(0.0, 10.0, 1.0, 0.4, 1.0))


def test_max_admissible_delay_vanishes_with_gamma_d():
    ds = [max_admissible_delay(0.0, 10.0, gd, 0.4, 1.0) for gd in (1e-2, 1e-6)]
    assert ds[0] > ds[1]
    assert ds[1] < 1e-6


def test_max_admissible_delay_analytic_inversion():
    h2, lam, lam_hat = 5.0, 0.4, 1.3
    gamma_d = h2 / lam * (math.exp(lam_hat) - 1.0)
    assert max_admissible_delay(0.0, h2, gamma_d, lam, lam_hat) == pytest.approx(1.0)


def test_bounds_monotone_in_h2_and_gamma_d():
    taus = [min_inter_event_time(0.0, h2, 1.0, 0.4, 1.0) for h2 in (1.0, 5.0, 50.0)]
    assert taus == sorted(taus, reverse=True)
    ds = [max_admissible_delay(0.0, 10.0, gd, 0.4, 1.0) for gd in (0.1, 1.0, 10.0)]
    assert ds == sorted(ds)


def test_degenerate_bound_raised():
    with pytest.raises(DegenerateBound):
        min_inter_event_time(0.0, -1.0, 1.0, 0.4, 1.0)


def test_trigger_params_effective_values():
    p = TriggerParams(beta=1.0, lam=0.4, delta_bar=1.0, gamma_d=1.0,
                      per_agent=((1.0, 0.5), (2.0, 0.3), (1.5, 0.9)))
    assert p.effective_beta == 2.0
    assert p.effective_lam == 0.3


def test_dropout_spec_validation():
    with pytest.raises(ValueError):
        DropoutSpec(rho=1)
    with pytest.raises(ValueError):
        DropoutSpec(rho=4, drop_prob=1.5)


def test_certify_small_pair_all_positive():
    s = load_scenario_dict(pair_scenario_dict(mode="theorem", rho=2,
                                              delta_bar=1.0, gamma_d=1.0))
    report = certify(s)
    for name, value in asdict(report).items():
        if name in ("h1", "k1"):  # may legitimately be negative before clamping
            assert np.isfinite(value)
        else:
            assert np.isfinite(value) and value > 0, name


def test_certify_rejects_lambda_above_gap():
    s = load_scenario_dict(pair_scenario_dict(mode="theorem", **{"lambda": 5.0}))
    with pytest.raises(AssumptionViolated):
        certify(s)


def test_certify_rejects_no_spanning_tree():
    s = load_scenario_dict(pair_scenario_dict(
        mode="theorem", adjacency=[[0, 0], [0, 0]]))
    with pytest.raises(AssumptionViolated):
        certify(s)


def test_certify_gamma_decomposition_exact():
    report = certify(make_scenario())
    assert report.gamma == report.gamma_l + 9.0


def test_certify_grid_inequalities_hold():
    s = make_scenario()
    report = certify(s)
    grid = np.linspace(0.0, 50.0 / 0.4, 1000)
    assert event_inequality_margin(report.h1, report.h2, 1.0, 0.4,
                                   report.lambda_hat, report.tau, grid) >= 0.0
    assert event_inequality_margin(report.h1, report.h2, 9.0, 0.4,
                                   report.lambda_hat, report.d_max, grid) >= 0.0


def test_certify_monotone_in_gamma_d():
    reports = [certify(make_scenario(gamma_d=gd)) for gd in (1.0, 5.0, 9.0)]
    ds = [r.d_max for r in reports]
    assert ds == sorted(ds)


def test_certify_per_agent_reduces_to_worst_case():
    uniform = make_scenario(beta=2.0, **{"lambda": 0.3})
    per_agent = make_scenario(per_agent=[
        {"beta": 1.0, "lambda": 0.5}, {"beta": 2.0, "lambda": 0.3},
        {"beta": 1.5, "lambda": 0.8}, {"beta": 0.5, "lambda": 0.4},
        {"beta": 1.0, "lambda": 0.6}, {"beta": 1.9, "lambda": 0.7}])
    assert asdict(certify(uniform)) == asdict(certify(per_agent))
