import numpy as np
import pytest

from interference_lab.core import BipartiteGraph, TreatmentPanel, validate_dataset
from interference_lab.sim import (
    DgpParams,
    GraphParams,
    RolloutParams,
    assign_staggered_rollout,
    generate_graph,
    ground_truth_tte,
    simulate_experiment,
    simulate_outcomes,
)


def line_graph(degrees, n_ineligible=0, weights=None):
    """Hand-built graph where eligible unit i+1 has its own `degrees[i]` connected units."""
    edge_t, edge_c = [], []
    next_c = 1
    for i, deg in enumerate(degrees):
        for _ in range(deg):
            edge_t.append(i + 1)
            edge_c.append(next_c)
            next_c += 1
    n = len(degrees) + n_ineligible
    return BipartiteGraph(
        treatment_ids=np.arange(1, n + 1),
        eligible=np.arange(n) < len(degrees),
        connected_ids=np.arange(1, next_c),
        edge_treatment=edge_t,
        edge_connected=edge_c,
        edge_weight=np.ones(len(edge_t)) if weights is None else weights,
    )


def test_single_possible_topology():
    g = generate_graph(GraphParams(n_eligible=1, n_ineligible=0, n_connected=1, avg_degree=1.0), seed=0)
    assert g.edge_treatment.tolist() == [1]
    assert g.edge_connected.tolist() == [1]
    assert g.eligible.tolist() == [True]


def test_generated_graph_is_valid_and_deterministic():
    gp = GraphParams(n_eligible=40, n_ineligible=10, n_connected=60, avg_degree=3.0)
    a = generate_graph(gp, seed=5)
    b = generate_graph(gp, seed=5)
    assert np.array_equal(a.edge_treatment, b.edge_treatment)
    assert np.array_equal(a.edge_connected, b.edge_connected)
    assert np.array_equal(a.edge_weight, b.edge_weight)
    assert (a.degrees() >= 1).all()
    c = generate_graph(gp, seed=6)
    assert not np.array_equal(a.edge_connected, c.edge_connected)


def test_empirical_mean_degree_over_50_seeds():
    # Poisson(3) redrawn into [1, n_connected]; mean over seeds must sit in [2.4, 3.6]
    gp = GraphParams(n_eligible=100, n_ineligible=0, n_connected=500, avg_degree=3.0)
    means = [generate_graph(gp, seed=s).degrees().mean() for s in range(50)]
    assert 2.4 <= np.mean(means) <= 3.6


def test_lognormal_weights():
    gp = GraphParams(
        n_eligible=30, n_connected=50, avg_degree=2.0, weight_mode="lognormal", weight_mu=0.0, weight_sd=0.5
    )
    g = generate_graph(gp, seed=1)
    assert (g.edge_weight > 0).all()
    assert len(np.unique(g.edge_weight)) > 1


def test_rollout_all_zero_and_all_one():
    zeros = assign_staggered_rollout(5, 4, RolloutParams((1,), (0.0,)), seed=0)
    assert zeros.assignments.max() == 0
    ones = assign_staggered_rollout(5, 4, RolloutParams((1,), (1.0,)), seed=0)
    assert ones.assignments.min() == 1
    assert ones.design_tag == "staggered"


def test_rollout_two_stage_fractions():
    # binomial SE at n=10000 is 0.004-0.005; 0.02 is a 4+ sigma bound
    rp = RolloutParams((1, 5), (0.2, 0.5))
    panel = assign_staggered_rollout(10000, 8, rp, seed=3)
    frac = panel.assignments.mean(axis=0)
    assert abs(frac[0] - 0.2) < 0.02
    assert abs(frac[7] - 0.5) < 0.02
    assert np.all(np.diff(panel.assignments, axis=1) >= 0)


def test_rollout_boundaries_must_fit_horizon():
    with pytest.raises(ValueError, match="within 1..T"):
        assign_staggered_rollout(5, 3, RolloutParams((1, 4), (0.2, 0.5)), seed=0)


def test_rollout_params_validation():
    with pytest.raises(ValueError, match="nondecreasing"):
        RolloutParams((1, 2), (0.5, 0.2))
    with pytest.raises(ValueError, match="increasing"):
        RolloutParams((2, 2), (0.2, 0.5))


def test_constant_outcomes_when_all_effects_off():
    g = line_graph([1, 2])
    p = DgpParams(beta=0.0, gamma=0.0, rho=0.0, sigma=0.0, baseline_mean=4.0, baseline_sd=1.0)
    panel = TreatmentPanel(np.ones((2, 5), dtype=np.int8), design_tag="fixed")
    y = simulate_outcomes(g, panel, p, seed=2).outcomes
    for t in range(1, 6):
        np.testing.assert_allclose(y[:, t], y[:, 0], atol=1e-12)


def test_single_edge_direct_effect():
    g = line_graph([1])
    p = DgpParams(beta=2.0, gamma=0.0, rho=0.0, sigma=0.0, baseline_mean=1.0, baseline_sd=0.5)
    a = np.array([[0, 1, 1, 1]], dtype=np.int8)
    y = simulate_outcomes(g, TreatmentPanel(a), p, seed=4).outcomes[0]
    assert y[1] == pytest.approx(y[0])  # untreated at t=1
    for t in (2, 3, 4):
        assert y[t] == pytest.approx(y[0] + 2.0)


def test_interference_through_shared_connected_unit():
    # units 1 and 2 both serve connected unit 1; treating unit 2 moves unit 1 by gamma/2
    g = BipartiteGraph(
        treatment_ids=[1, 2],
        eligible=[True, True],
        connected_ids=[1],
        edge_treatment=[1, 2],
        edge_connected=[1, 1],
        edge_weight=[1.0, 1.0],
    )
    p = DgpParams(beta=0.0, gamma=1.0, rho=0.0, sigma=0.0, baseline_mean=3.0, baseline_sd=1.0)
    a = np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8)
    y = simulate_outcomes(g, TreatmentPanel(a, design_tag="fixed"), p, seed=9).outcomes
    assert y[0, 1] == pytest.approx(y[0, 0] + 0.5)
    assert y[0, 2] == pytest.approx(y[0, 0] + 0.5)


def test_no_interference_reduction_when_gamma_zero():
    g = generate_graph(GraphParams(n_eligible=8, n_connected=12, avg_degree=2.0), seed=1)
    p = DgpParams(beta=1.5, gamma=0.0, rho=0.4, sigma=0.7, baseline_mean=2.0, baseline_sd=1.0)
    a = np.zeros((8, 6), dtype=np.int8)
    a[0, 2:] = 1
    base = simulate_outcomes(g, TreatmentPanel(a), p, seed=11).outcomes
    b = a.copy()
    b[3, 1:] = 1  # toggle another unit's row
    toggled = simulate_outcomes(g, TreatmentPanel(b), p, seed=11).outcomes
    keep = np.arange(8) != 3
    np.testing.assert_array_equal(base[keep], toggled[keep])
    assert not np.array_equal(base[3], toggled[3])


def test_ineligible_rows_must_stay_control():
    g = line_graph([1, 1], n_ineligible=1)
    p = DgpParams()
    a = np.zeros((3, 3), dtype=np.int8)
    a[2, :] = 1  # ineligible unit treated
    with pytest.raises(ValueError, match="ineligible"):
        simulate_outcomes(g, TreatmentPanel(a, design_tag="fixed"), p, seed=0)


def test_ground_truth_zero_when_no_effects():
    g = line_graph([1, 2, 3])
    p = DgpParams(beta=0.0, gamma=0.0, rho=0.0, sigma=0.0, baseline_mean=1.0, baseline_sd=1.0)
    assert ground_truth_tte(g, p, T=4, seed=0, n_reps=1) == 0.0


def test_ground_truth_equals_beta_times_mean_degree():
    g = line_graph([1, 2, 3])
    p = DgpParams(beta=1.5, gamma=0.0, rho=0.0, sigma=0.0, baseline_mean=1.0, baseline_sd=1.0)
    assert ground_truth_tte(g, p, T=6, seed=0, n_reps=1) == pytest.approx(1.5 * 2.0, abs=1e-12)


def test_ground_truth_geometric_accumulation():
    g = line_graph([1, 2, 3])
    rho, beta, T = 0.5, 2.0, 12
    p = DgpParams(beta=beta, gamma=0.0, rho=rho, sigma=0.0, baseline_mean=0.0, baseline_sd=1.0)
    expected = beta * 2.0 * (1 - rho**T) / (1 - rho)
    assert ground_truth_tte(g, p, T=T, seed=0, n_reps=1) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(beta * 2.0 / (1 - rho), rel=1e-3)  # near equilibrium


def test_ground_truth_exact_with_common_random_numbers_and_noise():
    g = line_graph([2, 2])
    p = DgpParams(beta=1.0, gamma=0.5, rho=0.2, sigma=1.0, baseline_mean=1.0, baseline_sd=1.0)
    a = ground_truth_tte(g, p, T=5, seed=7, n_reps=2)
    b = ground_truth_tte(g, p, T=5, seed=7, n_reps=2)
    assert a == b
    # noise cancels exactly under common random numbers for a linear recursion
    p0 = DgpParams(beta=1.0, gamma=0.5, rho=0.2, sigma=0.0, baseline_mean=1.0, baseline_sd=1.0)
    assert a == pytest.approx(ground_truth_tte(g, p0, T=5, seed=7, n_reps=1), abs=1e-10)


def test_simulate_experiment_produces_valid_dataset():
    d = simulate_experiment(
        GraphParams(n_eligible=15, n_ineligible=5, n_connected=30, avg_degree=2.0),
        DgpParams(beta=1.0, sigma=0.2),
        RolloutParams((2, 4), (0.3, 0.6)),
        T=6,
        seed=3,
    )
    assert validate_dataset(d) == []
    assert d.pre_period_end == 1
    assert d.n_units == 15


def test_simulate_outcomes_deterministic():
    gp = GraphParams(n_eligible=10, n_connected=15, avg_degree=2.0)
    g = generate_graph(gp, seed=2)
    p = DgpParams(beta=1.0, gamma=0.3, rho=0.1, sigma=0.5, baseline_mean=0.0, baseline_sd=1.0)
    panel = assign_staggered_rollout(10, 5, RolloutParams((1,), (0.5,)), seed=4)
    y1 = simulate_outcomes(g, panel, p, seed=6).outcomes
    y2 = simulate_outcomes(g, panel, p, seed=6).outcomes
    np.testing.assert_array_equal(y1, y2)


def test_dgp_params_validation():
    with pytest.raises(ValueError, match="rho"):
        DgpParams(rho=1.0)
    with pytest.raises(ValueError, match="sigma"):
        DgpParams(sigma=-0.1)
    with pytest.raises(ValueError, match="avg_degree"):
        GraphParams(n_eligible=5, n_connected=3, avg_degree=4.0)
