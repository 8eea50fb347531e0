"""Forward-backward sweep power flow on the radial, per-phase circuits.

Backward sweep converts constant-power injections to currents at the current
voltage guess and accumulates edge currents leaves-to-root; forward sweep
propagates voltage drops root-to-leaves, applying ideal tap ratios on
regulated edges.  Iterates to a fixed point of the bus voltages.

Switched capacitors enter as constant shunt admittance (injection scales
with |V|^2); their drawn current is j*q_pu*V.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import PowerFlowDivergenceError
from .model import FeederModel

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100


@dataclass
class PowerFlowResult:
    v: dict  # (bus, phase) -> complex voltage pu
    i_edge: dict  # (to_bus, phase) -> complex current pu on the edge into the bus
    loss_p_kw: float
    loss_q_kvar: float
    cap_q_kvar: dict  # (cap_id, phase) -> injected kvar at the solved voltage
    iterations: int
    mismatch_pu: float  # max per-phase complex power balance residual

    def vmag(self, bus: str, phase: str) -> float:
        return abs(self.v[(bus, phase)])


def _ratios(model: FeederModel, taps: dict | None) -> dict:
    """Tap ratio per (bus, phase) for the edge feeding the bus (1.0 bare)."""
    out = {}
    for device in model.tap_devices:
        for phase in device.phases:
            tap = 0
            if taps is not None:
                tap = taps.get(device.id, {}).get(phase, 0)
            out[(device.bus, phase)] = device.ratio(tap)
    return out


def _cap_admittance(model: FeederModel, caps_on: dict | None) -> dict:
    """Shunt susceptance (pu) per (bus, phase) from energized capacitors."""
    out = {}
    for cap in model.capacitors:
        for phase in cap.phases:
            on = True if not cap.switched else bool(
                caps_on is not None and caps_on.get(cap.id, {}).get(phase, False)
            )
            if on and cap.q_kvar > 0:
                key = (cap.bus, phase)
                out[key] = out.get(key, 0.0) + cap.q_kvar / model.base_kva_1ph
    return out


def solve_powerflow(
    model: FeederModel,
    injections: dict,
    taps: dict | None = None,
    caps_on: dict | None = None,
    v_init: dict | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PowerFlowResult:
    """Solve one steady state.

    ``injections`` maps (bus, phase) to net consumed complex power in pu
    (load minus PV).  ``taps`` maps device id -> phase -> integer tap;
    ``caps_on`` maps capacitor id -> phase -> bool for switched banks.
    Raises :class:`PowerFlowDivergenceError` with the iteration trace if the
    voltage fixed point is not reached.
    """
    ratios = _ratios(model, taps)
    y_cap = _cap_admittance(model, caps_on)

    keys = [
        (bus, phase)
        for bus in model.order
        for phase in model.bus_index[bus].phases
    ]
    v = {}
    for key in keys:
        if v_init is not None and key in v_init:
            v[key] = v_init[key]
        else:
            v[key] = complex(model.source_v_pu, 0.0)
    for phase in model.bus_index[model.source_bus].phases:
        v[(model.source_bus, phase)] = complex(model.source_v_pu, 0.0)

    i_down: dict = {}
    trace = []
    for iteration in range(1, max_iter + 1):
        # Backward: node injection currents, accumulated leaves -> root.
        i_down = {}
        for key in keys:
            s = injections.get(key, 0j)
            current = (s / v[key]).conjugate() if s != 0 else 0j
            b = y_cap.get(key)
            if b:
                current += 1j * b * v[key]
            i_down[key] = current
        for bus in reversed(model.order[1:]):
            parent = model.parent[bus]
            for phase in model.bus_index[bus].phases:
                if phase not in model.bus_index[parent].phases:
                    continue
                ratio = ratios.get((bus, phase), 1.0)
                i_down[(parent, phase)] += ratio * i_down[(bus, phase)]

        # Forward: voltage drops root -> leaves.
        delta = 0.0
        for bus in model.order[1:]:
            parent = model.parent[bus]
            for phase in model.bus_index[bus].phases:
                if phase not in model.bus_index[parent].phases:
                    continue
                ratio = ratios.get((bus, phase), 1.0)
                z = model.z_pu(bus, phase)
                i_line = ratio * i_down[(bus, phase)]
                new = (v[(parent, phase)] - z * i_line) * ratio
                change = abs(new - v[(bus, phase)])
                if change > delta:
                    delta = change
                v[(bus, phase)] = new
        trace.append(delta)
        if delta < tol:
            break
    else:
        raise PowerFlowDivergenceError(
            f"{model.name}: no fixed point after {max_iter} iterations "
            f"(last |dV| = {trace[-1]:.3e} pu)",
            trace=trace,
        )

    # Losses and edge currents at the solution.
    i_edge = {}
    loss = 0j
    for bus in model.order[1:]:
        parent = model.parent[bus]
        for phase in model.bus_index[bus].phases:
            if phase not in model.bus_index[parent].phases:
                continue
            ratio = ratios.get((bus, phase), 1.0)
            i_line = ratio * i_down[(bus, phase)]
            i_edge[(bus, phase)] = i_line
            loss += abs(i_line) ** 2 * model.z_pu(bus, phase)

    cap_q = {}
    for cap in model.capacitors:
        for phase in cap.phases:
            on = True if not cap.switched else bool(
                caps_on is not None and caps_on.get(cap.id, {}).get(phase, False)
            )
            q = 0.0
            if on and cap.q_kvar > 0:
                q = cap.q_kvar / model.base_kva_1ph * abs(v[(cap.bus, phase)]) ** 2
            cap_q[(cap.id, phase)] = q * model.base_kva_1ph

    # Power balance: source injection = consumed + losses (capacitor draw is
    # negative reactive consumption already included via its admittance).
    mismatch = 0.0
    for phase in model.bus_index[model.source_bus].phases:
        s_source = v[(model.source_bus, phase)] * i_down[(model.source_bus, phase)].conjugate()
        consumed = 0j
        for key in keys:
            if key[1] != phase:
                continue
            consumed += injections.get(key, 0j)
            b = y_cap.get(key)
            if b:
                consumed += -1j * b * abs(v[key]) ** 2
        loss_phase = 0j
        for (bus, p), current in i_edge.items():
            if p == phase:
                loss_phase += abs(current) ** 2 * model.z_pu(bus, p)
        residual = abs(s_source - consumed - loss_phase)
        if residual > mismatch:
            mismatch = residual

    return PowerFlowResult(
        v=v,
        i_edge=i_edge,
        loss_p_kw=loss.real * model.base_kva_1ph,
        loss_q_kvar=loss.imag * model.base_kva_1ph,
        cap_q_kvar=cap_q,
        iterations=iteration,
        mismatch_pu=mismatch,
    )
