"""PV power/energy estimation, de-rate, performance indices, ramp summaries.

The estimation chain is::

    P_estimate = p_dc * (irradiance / 1000) * X * D

where ``D`` multiplies the dirt, mismatch, cable, and inverter de-rate
coefficients and ``X`` is the temperature correction factor.  The power
performance index (PPI) is the instantaneous ratio of observed to estimated
power; unlike the performance ratio it is comparable across plants of
different size and model, which is what matters during a fast ramp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from .errors import ResolutionError, UndefinedPpiError, ZeroInsolationError
from .ingest import AlignedSeries, Unit

STC_IRRADIANCE_W_M2 = 1000.0
STC_CELL_TEMP_C = 25.0


class CorrectionMode(Enum):
    """Temperature handling for the power estimate."""

    UNCORRECTED = "uncorrected"  # X = 1
    TO_STC = "to_stc"  # correct module temperature to 25 degC
    TO_AVG_CELL = "to_avg_cell"  # correct to the plant's average cell temperature


@dataclass(frozen=True)
class PvSystemSpec:
    """Nameplate and loss model of one PV plant.

    De-rate coefficients are fractions in (0, 1]; ``temp_coeff_pct`` is the
    module power temperature coefficient in %/degC (typically negative).
    ``t_cell_avg_c`` is required only for :attr:`CorrectionMode.TO_AVG_CELL`;
    see :func:`with_avg_cell_temperature` to derive it from measured data.
    """

    name: str
    p_dc_kw: float
    p_dirt: float
    p_mismatch: float
    p_cable: float
    p_inverter: float
    temp_coeff_pct: float = -0.5
    t_cell_avg_c: float | None = None

    def __post_init__(self):
        if self.p_dc_kw <= 0:
            raise ValueError(f"p_dc_kw must be > 0, got {self.p_dc_kw}")
        for attr in ("p_dirt", "p_mismatch", "p_cable", "p_inverter"):
            v = getattr(self, attr)
            if not 0 < v <= 1:
                raise ValueError(f"{attr} must be in (0, 1], got {v}")


def derate(spec: PvSystemSpec) -> float:
    """Net de-rate factor: product of the four loss coefficients."""
    return spec.p_dirt * spec.p_mismatch * spec.p_cable * spec.p_inverter


def correction_factor(mode: CorrectionMode, t_module_c: float | None, spec: PvSystemSpec) -> float:
    """Temperature correction factor X for the power estimate."""
    if mode is CorrectionMode.UNCORRECTED:
        return 1.0
    if t_module_c is None or not math.isfinite(t_module_c):
        raise ValueError(f"{mode.value} correction needs a finite module temperature")
    if mode is CorrectionMode.TO_STC:
        reference = STC_CELL_TEMP_C
    else:
        if spec.t_cell_avg_c is None:
            raise ValueError(
                f"{spec.name}: t_cell_avg_c is unset; derive it with "
                "with_avg_cell_temperature() or configure it"
            )
        reference = spec.t_cell_avg_c
    return 1.0 + (spec.temp_coeff_pct / 100.0) * (t_module_c - reference)


def with_avg_cell_temperature(spec: PvSystemSpec, t_module: AlignedSeries) -> PvSystemSpec:
    """Spec with ``t_cell_avg_c`` set to the mean of the supplied module
    temperatures (used when the plant config does not pin it)."""
    present = t_module.present()
    if present.size == 0:
        raise ValueError("module temperature series has no present samples")
    return PvSystemSpec(
        name=spec.name,
        p_dc_kw=spec.p_dc_kw,
        p_dirt=spec.p_dirt,
        p_mismatch=spec.p_mismatch,
        p_cable=spec.p_cable,
        p_inverter=spec.p_inverter,
        temp_coeff_pct=spec.temp_coeff_pct,
        t_cell_avg_c=float(present.mean()),
    )


def estimate_power(
    spec: PvSystemSpec,
    irradiance_w_m2: float,
    t_module_c: float | None = None,
    mode: CorrectionMode = CorrectionMode.UNCORRECTED,
) -> float:
    """Expected AC power (kW) at one instant."""
    if irradiance_w_m2 < 0:
        raise ValueError(f"irradiance must be >= 0, got {irradiance_w_m2}")
    x = correction_factor(mode, t_module_c, spec)
    return spec.p_dc_kw * (irradiance_w_m2 / STC_IRRADIANCE_W_M2) * x * derate(spec)


def estimate_power_series(
    spec: PvSystemSpec,
    irradiance: AlignedSeries,
    t_module: AlignedSeries | None = None,
    mode: CorrectionMode = CorrectionMode.UNCORRECTED,
) -> AlignedSeries:
    """Per-sample power estimate; missing inputs yield missing estimates."""
    needs_t = mode is not CorrectionMode.UNCORRECTED
    if needs_t:
        if t_module is None:
            raise ValueError(f"{mode.value} correction needs a module temperature series")
        if not irradiance.same_grid(t_module):
            raise ValueError("irradiance and temperature series are not on the same grid")
    out = []
    for i, ir in enumerate(irradiance.values):
        t = t_module.values[i] if needs_t else None
        if ir is None or (needs_t and t is None):
            out.append(None)
        else:
            out.append(estimate_power(spec, ir, t, mode))
    return AlignedSeries(
        name=f"{spec.name}_estimate_kw",
        unit=Unit.KW,
        start=irradiance.start,
        resolution_s=irradiance.resolution_s,
        values=tuple(out),
    )


def estimate_energy(
    spec: PvSystemSpec,
    irradiance: AlignedSeries,
    t_module: AlignedSeries | None = None,
    mode: CorrectionMode = CorrectionMode.UNCORRECTED,
) -> tuple[float, float]:
    """Expected energy (kWh) over a 1-minute series, with input coverage.

    Minutes lacking a usable estimate contribute zero energy; ``coverage`` is
    the fraction of minutes that did contribute.  Requires 60 s resolution.
    The temperature correction is applied inside the sum, minute by minute.
    """
    if irradiance.resolution_s != 60:
        raise ResolutionError(
            f"energy estimation expects 60 s resolution, got {irradiance.resolution_s} s"
        )
    estimates = estimate_power_series(spec, irradiance, t_module, mode)
    kwh = 0.0
    n_used = 0
    for p in estimates.values:
        if p is not None:
            kwh += p / 60.0
            n_used += 1
    coverage = n_used / len(estimates) if len(estimates) else 0.0
    return kwh, coverage


def performance_ratio(actual_kwh: float, spec: PvSystemSpec, irradiance: AlignedSeries) -> float:
    """Observed energy normalised by nameplate and summed irradiance.

    PR = (actual_kwh / p_dc) * (1000 / sum_t Ir(t)), the sum taken over
    present samples.
    """
    total_ir = float(irradiance.present().sum())
    if total_ir <= 0:
        raise ZeroInsolationError(f"{irradiance.name}: summed irradiance is not positive")
    return (actual_kwh / spec.p_dc_kw) * (STC_IRRADIANCE_W_M2 / total_ir)


def ppi(actual_kw: float, estimate_kw: float) -> float:
    """Power performance index: observed over estimated power at an instant."""
    if estimate_kw <= 0:
        raise UndefinedPpiError(f"estimate must be > 0, got {estimate_kw}")
    return actual_kw / estimate_kw


def ppi_series(
    actual: AlignedSeries,
    estimate: AlignedSeries,
    min_estimate_kw: float = 0.0,
) -> AlignedSeries:
    """Per-sample PPI with an explicit missing marker where undefined.

    Samples where the estimate is missing or <= ``min_estimate_kw`` (deep
    ramp, night) stay missing rather than blowing up toward infinity, so
    downstream summaries skip them.
    """
    if not actual.same_grid(estimate):
        raise ValueError("actual and estimate series are not on the same grid")
    out = []
    for a, e in zip(actual.values, estimate.values):
        if a is None or e is None or e <= min_estimate_kw:
            out.append(None)
        else:
            out.append(a / e)
    return AlignedSeries(
        name="ppi",
        unit=Unit.DIMENSIONLESS,
        start=actual.start,
        resolution_s=actual.resolution_s,
        values=tuple(out),
    )


# ---------------------------------------------------------------------------
# Ramp-window impact summary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelImpact:
    """Pre-event reference versus in-window extreme for one channel.

    ``pre`` is the first present sample in the window; ``extreme`` is the
    in-window value farthest from it (the minimum for a sag, the maximum for
    a rise).  ``drop_pct`` is positive for a sag, negative for a rise, and
    ``None`` when the reference is zero.
    """

    name: str
    unit: str
    pre: float
    vmin: float
    vmax: float
    time_of_min: datetime
    extreme: float
    drop_abs: float
    drop_pct: float | None


@dataclass(frozen=True)
class EclipseSummary:
    window_start: datetime
    window_end: datetime
    channels: tuple

    def channel(self, name: str) -> ChannelImpact:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "window_start": self.window_start.isoformat(),
            "window_end": self.window_end.isoformat(),
            "channels": [
                {
                    "name": c.name,
                    "unit": c.unit,
                    "pre": c.pre,
                    "min": c.vmin,
                    "max": c.vmax,
                    "time_of_min": c.time_of_min.isoformat(),
                    "extreme": c.extreme,
                    "drop_abs": c.drop_abs,
                    "drop_pct": c.drop_pct,
                }
                for c in self.channels
            ],
        }


def eclipse_summary(
    channels: dict[str, AlignedSeries],
    window: tuple[datetime, datetime],
) -> EclipseSummary:
    """Per-channel drop statistics over a ramp window.

    Missing samples are skipped; a channel with no present sample in the
    window raises ValueError.
    """
    t0, t1 = window
    impacts = []
    for name, series in channels.items():
        w = series.window(t0, t1)
        present = [(w.time_at(i), v) for i, v in enumerate(w.values) if v is not None]
        if not present:
            raise ValueError(f"channel {name!r}: no present samples in window")
        pre = present[0][1]
        t_min, vmin = min(present, key=lambda tv: (tv[1], tv[0]))
        vmax = max(v for _, v in present)
        extreme = vmin if abs(pre - vmin) >= abs(pre - vmax) else vmax
        drop_abs = pre - extreme
        drop_pct = 100.0 * drop_abs / pre if pre != 0 else None
        impacts.append(
            ChannelImpact(
                name=name,
                unit=series.unit.value,
                pre=pre,
                vmin=vmin,
                vmax=vmax,
                time_of_min=t_min,
                extreme=extreme,
                drop_abs=drop_abs,
                drop_pct=drop_pct,
            )
        )
    return EclipseSummary(window_start=t0, window_end=t1, channels=tuple(impacts))
