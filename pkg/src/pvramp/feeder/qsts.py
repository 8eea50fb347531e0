"""Quasi-static time-series simulation over profile-driven timesteps.

Each timestep: PV injections come from the plant estimation chain evaluated
on the irradiance/temperature profiles, loads scale by their shape channel,
then the power flow is solved and device controls settle fully before time
advances.  Device state (taps, capacitor switching, daily counters) carries
across steps; voltages warm-start from the previous step.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from ..ingest import AlignedSeries
from ..perf import estimate_power
from .controls import ANSI_HIGH, ANSI_LOW, ControlAction, DeviceStates, control_step, init_states
from .model import FeederModel


@dataclass
class StepRecord:
    t: datetime
    v: dict  # (bus, phase) -> complex pu
    taps: dict  # device id -> phase -> int
    caps_on: dict  # cap id -> phase -> bool
    cap_q_kvar: dict  # (cap id, phase) -> injected kvar
    loss_p_kw: float
    loss_q_kvar: float
    pv_p_kw: dict  # plant id -> kW injected
    infeasible: bool
    mismatch_pu: float


@dataclass
class QstsResult:
    model: FeederModel
    steps: list
    actions: list  # (datetime, ControlAction)

    def tap_series(self, device_id: str, phase: str) -> list:
        return [(s.t, s.taps[device_id][phase]) for s in self.steps]

    def loss_series(self) -> list:
        return [(s.t, s.loss_p_kw, s.loss_q_kvar) for s in self.steps]

    def tap_change_counts(
        self, t0: datetime | None = None, t1: datetime | None = None
    ) -> dict:
        """Tap changes per (device, phase) within [t0, t1)."""
        counts: dict = {}
        for t, action in self.actions:
            if action.kind != "regulator":
                continue
            if t0 is not None and t < t0:
                continue
            if t1 is not None and t >= t1:
                continue
            key = (action.device_id, action.phase)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def cap_switch_counts(
        self, t0: datetime | None = None, t1: datetime | None = None
    ) -> dict:
        counts: dict = {}
        for t, action in self.actions:
            if action.kind != "capacitor":
                continue
            if t0 is not None and t < t0:
                continue
            if t1 is not None and t >= t1:
                continue
            key = (action.device_id, action.phase)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def step_at(self, t: datetime) -> StepRecord:
        for s in self.steps:
            if s.t == t:
                return s
        raise KeyError(f"no timestep at {t.isoformat()}")


def _profile_value(series: AlignedSeries, index: int, channel: str, t: datetime):
    v = series.values[index]
    if v is None:
        raise ValueError(f"profile channel {channel!r} missing a sample at {t.isoformat()}")
    return v


def run_qsts(
    model: FeederModel,
    profiles: dict,
    window: tuple[datetime, datetime] | None = None,
    states: DeviceStates | None = None,
) -> QstsResult:
    """Run the feeder through the profile window (all of it by default).

    ``profiles`` maps channel name to AlignedSeries; every channel referenced
    by loads and PV plants must be present and on one shared grid.  Profiles
    must cover the window with present samples.
    """
    needed = set()
    for load in model.loads:
        if load.shape is not None:
            needed.add(load.shape)
    for pv in model.pvs:
        needed.add(pv.irradiance)
        needed.add(pv.temperature)
    missing = sorted(n for n in needed if n not in profiles)
    if missing:
        raise ValueError(f"profiles missing channels: {missing}")

    reference = None
    for name in sorted(needed):
        series = profiles[name]
        if reference is None:
            reference = series
        elif not series.same_grid(reference):
            raise ValueError(f"profile channel {name!r} is not on the shared grid")
    if reference is None:
        raise ValueError("model references no profile channels; nothing to drive")

    if window is None:
        i0, i1 = 0, len(reference)
    else:
        t0, t1 = window
        i0 = reference.index_of(t0)
        i1 = reference.index_of(t1)
        if i0 < 0 or i1 > len(reference) or i1 <= i0:
            raise ValueError("window is not covered by the profiles")

    if states is None:
        states = init_states(model)
    steps: list[StepRecord] = []
    action_log: list = []
    v_init = None
    current_day = None

    for i in range(i0, i1):
        t = reference.time_at(i)
        if current_day is None:
            current_day = t.date()
        elif t.date() != current_day:
            current_day = t.date()
            states.roll_day()

        injections: dict = {}
        for load in model.loads:
            scale = 1.0
            if load.shape is not None:
                scale = _profile_value(profiles[load.shape], i, load.shape, t)
            s = complex(load.p_kw * scale, load.q_kvar * scale) / model.base_kva_1ph
            key = (load.bus, load.phase)
            injections[key] = injections.get(key, 0j) + s

        pv_p: dict = {}
        for pv in model.pvs:
            ir = _profile_value(profiles[pv.irradiance], i, pv.irradiance, t)
            tc = _profile_value(profiles[pv.temperature], i, pv.temperature, t)
            p_kw = estimate_power(pv.system, ir, tc, pv.correction)
            pv_p[pv.id] = p_kw
            share = p_kw / len(pv.phases) / model.base_kva_1ph
            for phase in pv.phases:
                key = (pv.bus, phase)
                injections[key] = injections.get(key, 0j) - share

        result, actions, infeasible = control_step(model, states, injections, v_init=v_init)
        v_init = result.v
        for action in actions:
            action_log.append((t, action))
        steps.append(
            StepRecord(
                t=t,
                v=dict(result.v),
                taps=states.taps_view(),
                caps_on=states.caps_view(),
                cap_q_kvar=dict(result.cap_q_kvar),
                loss_p_kw=result.loss_p_kw,
                loss_q_kvar=result.loss_q_kvar,
                pv_p_kw=pv_p,
                infeasible=infeasible,
                mismatch_pu=result.mismatch_pu,
            )
        )

    return QstsResult(model=model, steps=steps, actions=action_log)


def voltage_profile(result: QstsResult, t: datetime) -> dict:
    """Per-phase (distance_km, |V| pu) pairs at one timestep, by distance."""
    step = result.step_at(t)
    model = result.model
    out: dict = {}
    for bus in model.order:
        b = model.bus_index[bus]
        for phase in b.phases:
            out.setdefault(phase, []).append((b.distance_km, abs(step.v[(bus, phase)])))
    for phase in out:
        out[phase].sort(key=lambda dv: dv[0])
    return out


def audit_device_constraints(result: QstsResult) -> list:
    """Post-run audit of the device operating constraints.

    Checks every timestep: taps inside [tap_low, tap_high]; capacitor
    injection within its bound; ANSI band satisfied unless the step was
    flagged infeasible.  Checks per day: tap changes and capacitor switching
    within their daily maxima.  Returns human-readable violations ([] = pass).
    """
    model = result.model
    violations = []
    devices = {d.id: d for d in model.tap_devices}
    caps = {c.id: c for c in model.capacitors}

    for step in result.steps:
        for rid, taps in step.taps.items():
            d = devices[rid]
            for phase, tap in taps.items():
                if not d.tap_low <= tap <= d.tap_high:
                    violations.append(
                        f"{step.t.isoformat()}: {rid} phase {phase} tap {tap} outside "
                        f"[{d.tap_low}, {d.tap_high}]"
                    )
        for (cid, phase), q in step.cap_q_kvar.items():
            bound = caps[cid].q_bound_kvar
            if abs(q) > bound + 1e-9:
                violations.append(
                    f"{step.t.isoformat()}: {cid} phase {phase} injects {q:.3f} kvar "
                    f"beyond bound {bound:.3f}"
                )
        if not step.infeasible:
            for (bus, phase), v in step.v.items():
                if not ANSI_LOW <= abs(v) <= ANSI_HIGH:
                    violations.append(
                        f"{step.t.isoformat()}: bus {bus} phase {phase} at {abs(v):.4f} pu "
                        "outside ANSI band without infeasibility flag"
                    )

    per_day_taps: dict = {}
    per_day_switches: dict = {}
    for t, action in result.actions:
        key = (t.date(), action.device_id, action.phase)
        if action.kind == "regulator":
            per_day_taps[key] = per_day_taps.get(key, 0) + 1
        else:
            per_day_switches[key] = per_day_switches.get(key, 0) + 1
    for (day, rid, phase), count in sorted(per_day_taps.items()):
        limit = devices[rid].max_daily_taps
        if count > limit:
            violations.append(
                f"{day.isoformat()}: {rid} phase {phase} made {count} tap changes "
                f"(limit {limit})"
            )
    for (day, cid, phase), count in sorted(per_day_switches.items()):
        limit = caps[cid].max_daily_switching
        if count > limit:
            violations.append(
                f"{day.isoformat()}: {cid} phase {phase} switched {count} times "
                f"(limit {limit})"
            )
    return violations
