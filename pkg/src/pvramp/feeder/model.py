"""Static feeder description and the JSON file loader.

The network is a radial tree: buses joined by lines and transformer edges,
one path from every bus back to the source.  Impedances are entered in ohms
and converted to per-unit on the declared per-phase base.  Voltage regulators
attach to a bus and act as an ideal tap ratio on the edge feeding that bus;
a transformer may carry an LTC, which behaves the same way.

Per-phase modeling is decoupled: each phase is its own radial circuit and
mutual coupling between phases is neglected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ConnectivityError, TopologyError
from ..perf import CorrectionMode, PvSystemSpec

PHASES = ("a", "b", "c")


def _phase_tuple(text: str) -> tuple:
    phases = tuple(sorted(set(text.lower())))
    for p in phases:
        if p not in PHASES:
            raise ValueError(f"unknown phase {p!r}")
    if not phases:
        raise ValueError("empty phase set")
    return phases


def _per_phase_ohms(raw, phases: tuple) -> dict:
    if isinstance(raw, dict):
        out = {p: float(raw[p]) for p in phases}
    else:
        out = {p: float(raw) for p in phases}
    for p, v in out.items():
        if v < 0:
            raise ValueError(f"impedance must be >= 0, got {v} on phase {p}")
    return out


@dataclass(frozen=True)
class Bus:
    id: str
    distance_km: float
    phases: tuple = PHASES

    def __post_init__(self):
        if self.distance_km < 0:
            raise ValueError(f"bus {self.id}: distance_km must be >= 0")


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    r_ohm: dict
    x_ohm: dict
    phases: tuple = PHASES


@dataclass(frozen=True)
class RegulatorSpec:
    """Tap-changer settings: 32 steps of 0.625 % across taps -16..+16.

    The regulator holds the lowest (highest) voltage of its downstream zone
    above (below) ``band_center_pu -/+ bandwidth_pu``.
    """

    id: str
    bus: str
    phases: tuple = PHASES
    steps: int = 32
    step_pct: float = 0.625
    tap_low: int = -16
    tap_high: int = 16
    band_center_pu: float = 1.0
    bandwidth_pu: float = 0.01667
    max_daily_taps: int = 273

    def __post_init__(self):
        if self.tap_low >= self.tap_high:
            raise ValueError(f"regulator {self.id}: tap_low must be < tap_high")
        if self.tap_high - self.tap_low != self.steps:
            raise ValueError(
                f"regulator {self.id}: steps ({self.steps}) must equal "
                f"tap_high - tap_low ({self.tap_high - self.tap_low})"
            )
        if self.bandwidth_pu <= 0 or self.step_pct <= 0:
            raise ValueError(f"regulator {self.id}: band and step must be > 0")

    def ratio(self, tap: int) -> float:
        return 1.0 + tap * self.step_pct / 100.0


@dataclass(frozen=True)
class TransformerEdge:
    id: str
    from_bus: str
    to_bus: str
    r_ohm: dict
    x_ohm: dict
    phases: tuple = PHASES
    ltc: RegulatorSpec | None = None


class CapControlKind(Enum):
    FIXED = "fixed"
    VOLTAGE_BAND = "voltage_band"


@dataclass(frozen=True)
class CapControl:
    kind: CapControlKind
    on_pu: float = 0.97
    off_pu: float = 1.04

    def __post_init__(self):
        if self.kind is CapControlKind.VOLTAGE_BAND and self.on_pu >= self.off_pu:
            raise ValueError("capacitor on_pu must be < off_pu")


@dataclass(frozen=True)
class CapacitorSpec:
    """Shunt bank modeled as constant admittance when switched in.

    ``q_kvar`` is the per-phase injection at 1.0 pu voltage (actual injection
    scales with |V|^2); ``q_max_kvar`` is the per-phase injection bound
    audited after each run and defaults to 1.15x the nominal rating so ANSI
    overvoltages cannot breach it.
    """

    id: str
    bus: str
    phases: tuple = PHASES
    q_kvar: float = 0.0
    q_max_kvar: float | None = None
    control: CapControl = field(default_factory=lambda: CapControl(CapControlKind.FIXED))
    max_daily_switching: int = 30

    def __post_init__(self):
        if self.q_kvar < 0:
            raise ValueError(f"capacitor {self.id}: q_kvar must be >= 0")
        if self.q_max_kvar is not None and self.q_max_kvar < self.q_kvar:
            raise ValueError(f"capacitor {self.id}: q_max_kvar below nominal rating")

    @property
    def q_bound_kvar(self) -> float:
        return self.q_max_kvar if self.q_max_kvar is not None else 1.15 * self.q_kvar

    @property
    def switched(self) -> bool:
        return self.control.kind is CapControlKind.VOLTAGE_BAND


@dataclass(frozen=True)
class LoadSpec:
    bus: str
    phase: str
    p_kw: float
    q_kvar: float
    shape: str | None = None  # profile channel name; None = constant


@dataclass(frozen=True)
class PvPlant:
    id: str
    bus: str
    system: PvSystemSpec
    phases: tuple = PHASES
    irradiance: str = "ghi_wm2"  # profile channel names
    temperature: str = "t_mod_c"
    correction: CorrectionMode = CorrectionMode.TO_STC


@dataclass
class FeederModel:
    """Validated radial feeder with precomputed traversal structure."""

    name: str
    base_kv_ln: float
    base_kva_1ph: float
    source_bus: str
    source_v_pu: float
    buses: tuple
    lines: tuple
    transformers: tuple
    regulators: tuple
    capacitors: tuple
    loads: tuple
    pvs: tuple

    # Derived in __post_init__:
    bus_index: dict = field(init=False, repr=False)
    parent: dict = field(init=False, repr=False)
    edge_into: dict = field(init=False, repr=False)
    order: tuple = field(init=False, repr=False)
    tap_devices: tuple = field(init=False, repr=False)
    tap_at_bus: dict = field(init=False, repr=False)
    zone_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.base_kv_ln <= 0 or self.base_kva_1ph <= 0:
            raise ValueError("voltage and power bases must be > 0")
        self.bus_index = {b.id: b for b in self.buses}
        if len(self.bus_index) != len(self.buses):
            raise TopologyError("duplicate bus ids")
        if self.source_bus not in self.bus_index:
            raise ConnectivityError(f"source bus {self.source_bus!r} not defined")

        edges = list(self.lines) + list(self.transformers)
        adjacency: dict[str, list] = {b.id: [] for b in self.buses}
        for e in edges:
            for end in (e.from_bus, e.to_bus):
                if end not in self.bus_index:
                    raise ConnectivityError(f"edge references unknown bus {end!r}")
            adjacency[e.from_bus].append((e.to_bus, e))
            adjacency[e.to_bus].append((e.from_bus, e))

        # A tree has exactly |buses| - 1 edges; more means a loop.
        if len(edges) >= len(self.buses):
            raise TopologyError(
                f"{len(edges)} edges for {len(self.buses)} buses: loop detected"
            )

        self.parent = {}
        self.edge_into = {}
        order = [self.source_bus]
        seen = {self.source_bus}
        cursor = 0
        while cursor < len(order):
            bus = order[cursor]
            cursor += 1
            for neighbor, e in sorted(adjacency[bus], key=lambda t: t[0]):
                if neighbor in seen:
                    continue
                seen.add(neighbor)
                self.parent[neighbor] = bus
                self.edge_into[neighbor] = e
                order.append(neighbor)
        if len(seen) != len(self.buses):
            missing = sorted(set(self.bus_index) - seen)
            raise ConnectivityError(f"buses not reachable from source: {missing}")
        self.order = tuple(order)

        # Tap devices: standalone regulators plus any transformer LTC.  A
        # device rides the edge into its bus, so the bus must not be the root.
        devices = list(self.regulators)
        for t in self.transformers:
            if t.ltc is not None:
                if t.ltc.bus != t.to_bus:
                    raise ValueError(
                        f"LTC {t.ltc.id}: bus must be the transformer secondary {t.to_bus!r}"
                    )
                devices.append(t.ltc)
        self.tap_devices = tuple(sorted(devices, key=lambda d: d.id))
        self.tap_at_bus = {}
        for d in self.tap_devices:
            if d.bus not in self.bus_index:
                raise ConnectivityError(f"regulator {d.id}: unknown bus {d.bus!r}")
            if d.bus == self.source_bus:
                raise ValueError(f"regulator {d.id}: cannot regulate the source bus")
            if d.bus in self.tap_at_bus:
                raise ValueError(f"two tap devices on bus {d.bus!r}")
            self.tap_at_bus[d.bus] = d

        for c in self.capacitors:
            if c.bus not in self.bus_index:
                raise ConnectivityError(f"capacitor {c.id}: unknown bus {c.bus!r}")
        for load in self.loads:
            if load.bus not in self.bus_index:
                raise ConnectivityError(f"load references unknown bus {load.bus!r}")
            if load.phase not in self.bus_index[load.bus].phases:
                raise ValueError(
                    f"load on {load.bus} phase {load.phase}: phase absent at bus"
                )
        for pv in self.pvs:
            if pv.bus not in self.bus_index:
                raise ConnectivityError(f"pv {pv.id}: unknown bus {pv.bus!r}")

        # Zone map: every bus/phase belongs to its nearest upstream tap
        # device (walking toward the source), or to None above all devices.
        self.zone_of = {}
        for bus in self.order:
            for phase in self.bus_index[bus].phases:
                node = bus
                owner = None
                while node != self.source_bus:
                    d = self.tap_at_bus.get(node)
                    if d is not None and phase in d.phases:
                        owner = d.id
                        break
                    node = self.parent[node]
                self.zone_of[(bus, phase)] = owner

    @property
    def z_base_ohm(self) -> float:
        return (self.base_kv_ln**2) * 1000.0 / self.base_kva_1ph

    def z_pu(self, bus: str, phase: str) -> complex:
        """Series impedance (pu) of the edge feeding ``bus`` on ``phase``."""
        e = self.edge_into[bus]
        if phase not in e.phases:
            raise ValueError(f"edge into {bus} does not carry phase {phase}")
        return complex(e.r_ohm[phase], e.x_ohm[phase]) / self.z_base_ohm

    def zone_buses(self, device_id: str, phase: str) -> list:
        return [
            bus
            for (bus, p), owner in self.zone_of.items()
            if owner == device_id and p == phase
        ]


# ---------------------------------------------------------------------------
# JSON loader
# ---------------------------------------------------------------------------


def _regulator_from_json(raw: dict, bus: str | None = None) -> RegulatorSpec:
    return RegulatorSpec(
        id=raw["id"],
        bus=bus if bus is not None else raw["bus"],
        phases=_phase_tuple(raw.get("phases", "abc")),
        steps=int(raw.get("steps", 32)),
        step_pct=float(raw.get("step_pct", 0.625)),
        tap_low=int(raw.get("tap_low", -16)),
        tap_high=int(raw.get("tap_high", 16)),
        band_center_pu=float(raw.get("band_center_pu", 1.0)),
        bandwidth_pu=float(raw.get("bandwidth_pu", 0.01667)),
        max_daily_taps=int(raw.get("max_daily_taps", 273)),
    )


def load_feeder(path) -> FeederModel:
    """Load and validate a feeder JSON file (schema: docs/feeder_schema.md)."""
    with open(path) as fh:
        raw = json.load(fh)

    buses = tuple(
        Bus(
            id=b["id"],
            distance_km=float(b.get("distance_km", 0.0)),
            phases=_phase_tuple(b.get("phases", "abc")),
        )
        for b in raw["buses"]
    )

    lines = tuple(
        Line(
            from_bus=ln["from"],
            to_bus=ln["to"],
            phases=_phase_tuple(ln.get("phases", "abc")),
            r_ohm=_per_phase_ohms(ln["r_ohm"], _phase_tuple(ln.get("phases", "abc"))),
            x_ohm=_per_phase_ohms(ln["x_ohm"], _phase_tuple(ln.get("phases", "abc"))),
        )
        for ln in raw.get("lines", [])
    )

    transformers = tuple(
        TransformerEdge(
            id=t["id"],
            from_bus=t["from"],
            to_bus=t["to"],
            phases=_phase_tuple(t.get("phases", "abc")),
            r_ohm=_per_phase_ohms(t["r_ohm"], _phase_tuple(t.get("phases", "abc"))),
            x_ohm=_per_phase_ohms(t["x_ohm"], _phase_tuple(t.get("phases", "abc"))),
            ltc=_regulator_from_json(t["ltc"], bus=t["to"]) if t.get("ltc") else None,
        )
        for t in raw.get("transformers", [])
    )

    regulators = tuple(_regulator_from_json(r) for r in raw.get("regulators", []))

    capacitors = []
    for c in raw.get("capacitors", []):
        ctl_raw = c.get("control", {"kind": "fixed"})
        kind = CapControlKind(ctl_raw.get("kind", "fixed"))
        control = CapControl(
            kind=kind,
            on_pu=float(ctl_raw.get("on_pu", 0.97)),
            off_pu=float(ctl_raw.get("off_pu", 1.04)),
        )
        capacitors.append(
            CapacitorSpec(
                id=c["id"],
                bus=c["bus"],
                phases=_phase_tuple(c.get("phases", "abc")),
                q_kvar=float(c.get("q_kvar", 0.0)),
                q_max_kvar=float(c["q_max_kvar"]) if "q_max_kvar" in c else None,
                control=control,
                max_daily_switching=int(c.get("max_daily_switching", 30)),
            )
        )

    loads = tuple(
        LoadSpec(
            bus=load["bus"],
            phase=load["phase"],
            p_kw=float(load["p_kw"]),
            q_kvar=float(load.get("q_kvar", 0.0)),
            shape=load.get("shape"),
        )
        for load in raw.get("loads", [])
    )

    pvs = tuple(
        PvPlant(
            id=pv["id"],
            bus=pv["bus"],
            phases=_phase_tuple(pv.get("phases", "abc")),
            system=PvSystemSpec(
                name=pv["system"].get("name", pv["id"]),
                p_dc_kw=float(pv["system"]["p_dc_kw"]),
                p_dirt=float(pv["system"].get("p_dirt", 1.0)),
                p_mismatch=float(pv["system"].get("p_mismatch", 1.0)),
                p_cable=float(pv["system"].get("p_cable", 1.0)),
                p_inverter=float(pv["system"].get("p_inverter", 1.0)),
                temp_coeff_pct=float(pv["system"].get("temp_coeff_pct", -0.5)),
                t_cell_avg_c=pv["system"].get("t_cell_avg_c"),
            ),
            irradiance=pv.get("irradiance", "ghi_wm2"),
            temperature=pv.get("temperature", "t_mod_c"),
            correction=CorrectionMode(pv.get("correction", "to_stc")),
        )
        for pv in raw.get("pvs", [])
    )

    return FeederModel(
        name=raw.get("name", "feeder"),
        base_kv_ln=float(raw["base"]["kv_ln"]),
        base_kva_1ph=float(raw["base"]["kva_1ph"]),
        source_bus=raw["source"]["bus"],
        source_v_pu=float(raw["source"].get("v_pu", 1.0)),
        buses=buses,
        lines=lines,
        transformers=transformers,
        regulators=regulators,
        capacitors=tuple(capacitors),
        loads=loads,
        pvs=pvs,
    )


def penetration_level(model: FeederModel, profiles: dict | None = None) -> float:
    """PV nameplate as a percentage of total peak load.

    Each load's peak is its base power times the maximum of its shape channel
    (1.0 when constant or when ``profiles`` is not given).
    """
    total_pv = sum(pv.system.p_dc_kw for pv in model.pvs)
    total_load = 0.0
    for load in model.loads:
        peak = 1.0
        if profiles is not None and load.shape is not None:
            shape = profiles[load.shape]
            present = shape.present()
            if present.size:
                peak = float(present.max())
        total_load += load.p_kw * peak
    if total_load <= 0:
        raise ValueError("total load must be > 0 to define a penetration level")
    return 100.0 * total_pv / total_load
