"""Power-flow solver tests against independent oracles.

Oracles (tests/oracles.py):
- closed-form complex solution of the 2-bus constant-power case;
- dense nodal-admittance fixed point solved with matrix factorizations,
  structurally unrelated to the tree sweep.
"""

import numpy as np
import pytest

from oracles import dense_nodal_solve, line_pu, make_model, random_radial, two_bus_closed_form
from pvramp.errors import ConnectivityError, PowerFlowDivergenceError, TopologyError
from pvramp.feeder.model import Bus, PHASES
from pvramp.feeder.powerflow import solve_powerflow


def test_zero_load_flat_voltage():
    buses = [Bus("src", 0.0), Bus("b1", 1.0), Bus("b2", 2.0)]
    lines = [line_pu("src", "b1", 0.01, 0.02), line_pu("b1", "b2", 0.01, 0.02)]
    model = make_model(buses, lines)
    result = solve_powerflow(model, {})
    for bus in ("src", "b1", "b2"):
        for phase in PHASES:
            assert result.v[(bus, phase)] == pytest.approx(1.0 + 0j, abs=1e-12)
    assert result.loss_p_kw == pytest.approx(0.0, abs=1e-12)
    assert result.loss_q_kvar == pytest.approx(0.0, abs=1e-12)


def test_two_bus_matches_closed_form():
    buses = [Bus("src", 0.0), Bus("b1", 1.0)]
    lines = [line_pu("src", "b1", 0.01, 0.01)]
    model = make_model(buses, lines)
    s = 0.1 + 0j
    injections = {("b1", p): s for p in PHASES}
    result = solve_powerflow(model, injections)
    expected = two_bus_closed_form(1.0, 0.01 + 0.01j, s)
    for phase in PHASES:
        assert abs(result.v[("b1", phase)] - expected) < 1e-8


def test_two_bus_closed_form_random_cases():
    rng = np.random.default_rng(17)
    for _ in range(50):
        r, x = rng.uniform(0.002, 0.05, size=2)
        p = rng.uniform(0.01, 0.3)
        q = rng.uniform(-0.1, 0.15)
        buses = [Bus("src", 0.0), Bus("b1", 1.0)]
        model = make_model(buses, [line_pu("src", "b1", r, x)])
        s = complex(p, q)
        result = solve_powerflow(model, {("b1", "a"): s})
        expected = two_bus_closed_form(1.0, complex(r, x), s)
        assert abs(result.v[("b1", "a")] - expected) < 1e-8


def test_sweep_matches_dense_nodal_oracle_100_trials():
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(3, 11))
        buses, lines, s_consumed = random_radial(rng, n)
        model = make_model(buses, lines)
        injections = {(bid, "a"): s for bid, s in s_consumed.items()}
        result = solve_powerflow(model, injections)
        oracle = dense_nodal_solve(buses, lines, "src", 1.0, s_consumed)
        for bid, expected in oracle.items():
            assert abs(result.v[(bid, "a")] - expected) < 1e-7
        assert result.mismatch_pu <= 1e-6


def test_power_balance_every_converged_case():
    rng = np.random.default_rng(29)
    for _ in range(30):
        n = int(rng.integers(3, 11))
        buses, lines, s_consumed = random_radial(rng, n)
        model = make_model(buses, lines)
        injections = {}
        for bid, s in s_consumed.items():
            for phase in PHASES:
                injections[(bid, phase)] = s
        result = solve_powerflow(model, injections)
        assert result.mismatch_pu <= 1e-6


def test_divergence_reports_trace():
    # A load far beyond the feeder's maximum transferable power cannot
    # converge; the error carries the per-iteration mismatch trace.
    buses = [Bus("src", 0.0), Bus("b1", 1.0)]
    model = make_model(buses, [line_pu("src", "b1", 0.05, 0.1)])
    with pytest.raises(PowerFlowDivergenceError) as err:
        solve_powerflow(model, {("b1", "a"): 30.0 + 10.0j})
    assert len(err.value.trace) > 0


def test_pv_injection_raises_voltage():
    buses = [Bus("src", 0.0), Bus("b1", 1.0), Bus("b2", 2.0)]
    lines = [line_pu("src", "b1", 0.01, 0.02), line_pu("b1", "b2", 0.01, 0.02)]
    model = make_model(buses, lines)
    loaded = solve_powerflow(model, {("b2", "a"): 0.2 + 0.05j})
    with_pv = solve_powerflow(model, {("b2", "a"): 0.2 + 0.05j - 0.15})
    assert abs(with_pv.v[("b2", "a")]) > abs(loaded.v[("b2", "a")])


def test_losses_increase_with_loading():
    buses = [Bus("src", 0.0), Bus("b1", 1.0)]
    model = make_model(buses, [line_pu("src", "b1", 0.02, 0.03)])
    light = solve_powerflow(model, {("b1", "a"): 0.05})
    heavy = solve_powerflow(model, {("b1", "a"): 0.2})
    assert heavy.loss_p_kw > light.loss_p_kw > 0


# ---------------------------------------------------------------------------
# model validation
# ---------------------------------------------------------------------------


def test_loop_detected():
    buses = [Bus("src", 0.0), Bus("b1", 1.0), Bus("b2", 2.0)]
    lines = [
        line_pu("src", "b1", 0.01, 0.01),
        line_pu("b1", "b2", 0.01, 0.01),
        line_pu("b2", "src", 0.01, 0.01),
    ]
    with pytest.raises(TopologyError):
        make_model(buses, lines)


def test_dangling_bus_detected():
    buses = [Bus("src", 0.0), Bus("b1", 1.0), Bus("orphan", 3.0)]
    lines = [line_pu("src", "b1", 0.01, 0.01)]
    with pytest.raises(ConnectivityError, match="orphan"):
        make_model(buses, lines)


def test_unknown_edge_endpoint():
    buses = [Bus("src", 0.0), Bus("b1", 1.0)]
    lines = [line_pu("src", "ghost", 0.01, 0.01)]
    with pytest.raises(ConnectivityError):
        make_model(buses, lines)
