"""Voltage-regulating device state and the intra-timestep control loop.

Each bus/phase belongs to the zone of its electrically nearest upstream tap
device (regulator or transformer LTC); a device taps to hold its zone's
extreme voltages inside its band.  Switched capacitor banks watch their own
bus voltage against an on/off band.  Within a timestep the loop applies one
device action at a time, re-solving after each, until no device wants to
move; capacitors act before regulators when both are eligible.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ControlOscillationError
from .model import FeederModel
from .powerflow import PowerFlowResult, solve_powerflow

ANSI_LOW = 0.95
ANSI_HIGH = 1.05

# Safety net: a single (device, phase, direction) repeating beyond this
# within one timestep means the deadbands are mis-set.
MAX_REPEATS_PER_STEP = 5
MAX_ACTIONS_PER_STEP = 200


@dataclass
class RegulatorState:
    taps: dict  # phase -> int
    changes_today: dict  # phase -> int
    total_changes: dict  # phase -> int


@dataclass
class CapacitorState:
    on: dict  # phase -> bool
    switches_today: dict  # phase -> int
    total_switches: dict  # phase -> int


@dataclass
class DeviceStates:
    regulators: dict  # id -> RegulatorState
    capacitors: dict  # id -> CapacitorState

    def roll_day(self) -> None:
        for st in self.regulators.values():
            for phase in st.changes_today:
                st.changes_today[phase] = 0
        for st in self.capacitors.values():
            for phase in st.switches_today:
                st.switches_today[phase] = 0

    def taps_view(self) -> dict:
        return {rid: dict(st.taps) for rid, st in self.regulators.items()}

    def caps_view(self) -> dict:
        return {cid: dict(st.on) for cid, st in self.capacitors.items()}


def init_states(model: FeederModel) -> DeviceStates:
    regulators = {
        d.id: RegulatorState(
            taps={p: 0 for p in d.phases},
            changes_today={p: 0 for p in d.phases},
            total_changes={p: 0 for p in d.phases},
        )
        for d in model.tap_devices
    }
    capacitors = {
        c.id: CapacitorState(
            # Fixed banks are always in; switched banks start de-energized.
            on={p: not c.switched for p in c.phases},
            switches_today={p: 0 for p in c.phases},
            total_switches={p: 0 for p in c.phases},
        )
        for c in model.capacitors
    }
    return DeviceStates(regulators=regulators, capacitors=capacitors)


@dataclass(frozen=True)
class ControlAction:
    device_id: str
    kind: str  # "regulator" | "capacitor"
    phase: str
    from_value: str
    to_value: str


def _capacitor_candidate(model: FeederModel, states: DeviceStates, result: PowerFlowResult):
    best = None
    for cap in model.capacitors:
        if not cap.switched:
            continue
        st = states.capacitors[cap.id]
        for phase in cap.phases:
            vmag = result.vmag(cap.bus, phase)
            if st.switches_today[phase] >= cap.max_daily_switching:
                continue
            if not st.on[phase] and vmag < cap.control.on_pu:
                deviation = cap.control.on_pu - vmag
                candidate = (deviation, cap, phase, True)
            elif st.on[phase] and vmag > cap.control.off_pu:
                deviation = vmag - cap.control.off_pu
                candidate = (deviation, cap, phase, False)
            else:
                continue
            if best is None or candidate[0] > best[0]:
                best = candidate
    return best


def _regulator_candidate(model: FeederModel, states: DeviceStates, result: PowerFlowResult):
    best = None
    for device in model.tap_devices:
        st = states.regulators[device.id]
        step = device.step_pct / 100.0
        lo = device.band_center_pu - device.bandwidth_pu
        hi = device.band_center_pu + device.bandwidth_pu
        for phase in device.phases:
            zone = model.zone_buses(device.id, phase)
            if not zone:
                continue
            if st.changes_today[phase] >= device.max_daily_taps:
                continue
            mags = [result.vmag(b, phase) for b in zone]
            vmin, vmax = min(mags), max(mags)
            under = lo - vmin
            over = vmax - hi
            if under > 0 and over > 0:
                continue  # zone spread exceeds the band; tapping cannot fix it
            if under > 0:
                # One tap raises the zone by ~step; don't overshoot the top.
                if st.taps[phase] >= device.tap_high or vmax + step > hi:
                    continue
                candidate = (under, device, phase, +1)
            elif over > 0:
                if st.taps[phase] <= device.tap_low or vmin - step < lo:
                    continue
                candidate = (over, device, phase, -1)
            else:
                continue
            if best is None or candidate[0] > best[0]:
                best = candidate
    return best


def control_step(
    model: FeederModel,
    states: DeviceStates,
    injections: dict,
    v_init: dict | None = None,
    tol: float = 1e-8,
) -> tuple[PowerFlowResult, list, bool]:
    """Settle device controls for one timestep.

    Mutates ``states`` in place; returns the final power flow, the ordered
    action list, and an infeasibility flag set when any bus voltage remains
    outside the ANSI 0.95-1.05 pu band after control settles.
    """
    result = solve_powerflow(
        model, injections, taps=states.taps_view(), caps_on=states.caps_view(),
        v_init=v_init, tol=tol,
    )
    actions: list[ControlAction] = []
    repeats: dict = {}

    while True:
        cap_candidate = _capacitor_candidate(model, states, result)
        if cap_candidate is not None:
            _, cap, phase, turn_on = cap_candidate
            key = (cap.id, phase, turn_on)
            repeats[key] = repeats.get(key, 0) + 1
            if repeats[key] > MAX_REPEATS_PER_STEP or len(actions) >= MAX_ACTIONS_PER_STEP:
                raise ControlOscillationError(
                    f"capacitor {cap.id} phase {phase} toggling within one timestep"
                )
            st = states.capacitors[cap.id]
            st.on[phase] = turn_on
            st.switches_today[phase] += 1
            st.total_switches[phase] += 1
            actions.append(
                ControlAction(
                    device_id=cap.id,
                    kind="capacitor",
                    phase=phase,
                    from_value="off" if turn_on else "on",
                    to_value="on" if turn_on else "off",
                )
            )
        else:
            reg_candidate = _regulator_candidate(model, states, result)
            if reg_candidate is None:
                break
            _, device, phase, direction = reg_candidate
            key = (device.id, phase, direction)
            repeats[key] = repeats.get(key, 0) + 1
            if repeats[key] > MAX_REPEATS_PER_STEP or len(actions) >= MAX_ACTIONS_PER_STEP:
                raise ControlOscillationError(
                    f"regulator {device.id} phase {phase} oscillating within one timestep"
                )
            st = states.regulators[device.id]
            old = st.taps[phase]
            st.taps[phase] = old + direction
            st.changes_today[phase] += 1
            st.total_changes[phase] += 1
            actions.append(
                ControlAction(
                    device_id=device.id,
                    kind="regulator",
                    phase=phase,
                    from_value=str(old),
                    to_value=str(old + direction),
                )
            )
        result = solve_powerflow(
            model, injections, taps=states.taps_view(), caps_on=states.caps_view(),
            v_init=result.v, tol=tol,
        )

    infeasible = any(
        not (ANSI_LOW <= result.vmag(bus, phase) <= ANSI_HIGH)
        for bus in model.order
        for phase in model.bus_index[bus].phases
    )
    return result, actions, infeasible
