"""Point-of-interconnection power-quality metrics and limit checks.

Covers voltage change from PV/load imbalance, harmonic distortion (THD
normalised to the fundamental, TDD normalised to maximum demand current),
and flicker severity (Pst over 10-minute windows, Plt as the cube-mean of
12 consecutive Pst).

Flicker caveat: a true flickermeter needs waveform-bandwidth input.  These
routines accept 1-minute RMS voltage and extract the percentile levels from
the relative deviation about the window median, so Pst/Plt outputs are
approximate severity indices, comparable across windows of the same data but
not IEC-certified readings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

import numpy as np

from .errors import SpectrumKindError
from .ingest import AlignedSeries

MIN_HARMONIC_ORDER = 2
MAX_HARMONIC_ORDER = 50

# Pst percentile weights at the 0.1, 1, 3, 10 and 50 % exceedance levels.
PST_WEIGHTS = ((0.1, 0.0314), (1.0, 0.0525), (3.0, 0.0657), (10.0, 0.28), (50.0, 0.08))


class SpectrumKind(Enum):
    VOLTAGE = "voltage"
    CURRENT = "current"


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Per-order RMS magnitudes of one waveform.

    ``harmonics`` maps order (2..50) to RMS magnitude; absent orders count
    as zero.
    """

    kind: SpectrumKind
    fundamental_rms: float
    harmonics: tuple  # ((order, magnitude), ...)

    def __post_init__(self):
        if self.fundamental_rms <= 0:
            raise ValueError(f"fundamental_rms must be > 0, got {self.fundamental_rms}")
        for order, mag in self.harmonics:
            if not MIN_HARMONIC_ORDER <= order <= MAX_HARMONIC_ORDER:
                raise ValueError(f"harmonic order {order} outside {MIN_HARMONIC_ORDER}..{MAX_HARMONIC_ORDER}")
            if mag < 0 or not math.isfinite(mag):
                raise ValueError(f"harmonic magnitude at order {order} must be finite and >= 0")

    @classmethod
    def of(cls, kind: SpectrumKind, fundamental_rms: float, harmonics: dict[int, float]):
        return cls(
            kind=kind,
            fundamental_rms=fundamental_rms,
            harmonics=tuple(sorted(harmonics.items())),
        )

    def rss(self) -> float:
        """Root-sum-square of the harmonic magnitudes (fundamental excluded)."""
        return math.sqrt(sum(mag * mag for _, mag in self.harmonics))


@dataclass(frozen=True)
class PoiContext:
    """Interconnection-point electrical context.

    Powers are in kW/kVAr; impedances in ohms; ``max_demand_current_a`` is
    the demand-current base for TDD.
    """

    r_ohm: float
    x_ohm: float
    v_base: float
    p_load_kw: float = 0.0
    p_pv_kw: float = 0.0
    q_load_kvar: float = 0.0
    q_pv_kvar: float = 0.0
    max_demand_current_a: float = 1.0

    def __post_init__(self):
        if self.v_base <= 0:
            raise ValueError("v_base must be > 0")
        if self.max_demand_current_a <= 0:
            raise ValueError("max_demand_current_a must be > 0")


def voltage_change(ctx: PoiContext) -> float:
    """Voltage change (V) at the POI from the net load/PV power imbalance:
    dV = [R (P_L - P_PV) + X (Q_L - Q_PV)] / V_base with powers in watts."""
    p = (ctx.p_load_kw - ctx.p_pv_kw) * 1e3
    q = (ctx.q_load_kvar - ctx.q_pv_kvar) * 1e3
    return (ctx.r_ohm * p + ctx.x_ohm * q) / ctx.v_base


def thd(spectrum: HarmonicSpectrum) -> float:
    """Total harmonic distortion in percent of the fundamental."""
    return 100.0 * spectrum.rss() / spectrum.fundamental_rms


def tdd(spectrum: HarmonicSpectrum, ctx: PoiContext) -> float:
    """Total demand distortion in percent of maximum demand load current.

    Unlike THD the denominator is fixed, so changes in non-harmonic load
    leave TDD unchanged.
    """
    if spectrum.kind is not SpectrumKind.CURRENT:
        raise SpectrumKindError("TDD is defined for current spectra only")
    return 100.0 * spectrum.rss() / ctx.max_demand_current_a


@dataclass(frozen=True)
class FlickerLevels:
    """Flicker perception levels exceeded 0.1/1/3/10/50 % of the time."""

    p01: float
    p1: float
    p3: float
    p10: float
    p50: float

    def __post_init__(self):
        for name in ("p01", "p1", "p3", "p10", "p50"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def as_tuple(self) -> tuple:
        return (self.p01, self.p1, self.p3, self.p10, self.p50)


def pst(levels: FlickerLevels) -> float:
    """Short-term flicker severity from weighted percentile levels."""
    p01, p1, p3, p10, p50 = levels.as_tuple()
    weighted = (
        PST_WEIGHTS[0][1] * p01
        + PST_WEIGHTS[1][1] * p1
        + PST_WEIGHTS[2][1] * p3
        + PST_WEIGHTS[3][1] * p10
        + PST_WEIGHTS[4][1] * p50
    )
    return math.sqrt(weighted)


def plt(psts) -> float:
    """Long-term flicker severity: cube root of the mean cubed Pst over a
    2-hour block (exactly 12 ten-minute values)."""
    values = list(psts)
    if len(values) != 12:
        raise ValueError(f"plt needs exactly 12 Pst values, got {len(values)}")
    if any(v < 0 for v in values):
        raise ValueError("Pst values must be >= 0")
    return (sum(v**3 for v in values) / 12.0) ** (1.0 / 3.0)


def flicker_levels_from_voltage(
    voltage: AlignedSeries,
    window_s: int = 600,
    v_base: float | None = None,
) -> list[tuple[datetime, FlickerLevels]]:
    """Approximate flicker levels per window from RMS voltage.

    Within each window the relative deviation d(t) = |V(t) - median| / v_base
    is ranked and the value exceeded k % of the time becomes the P_k level.
    ``v_base`` defaults to the median of the whole series.  Windows with
    fewer than two present samples raise ValueError.
    """
    if window_s % voltage.resolution_s != 0:
        raise ValueError(
            f"window {window_s}s is not a multiple of resolution {voltage.resolution_s}s"
        )
    per_window = window_s // voltage.resolution_s
    if v_base is None:
        allp = voltage.present()
        if allp.size == 0:
            raise ValueError("voltage series has no present samples")
        v_base = float(np.median(allp))
    if v_base <= 0:
        raise ValueError("v_base must be > 0")

    out = []
    for w0 in range(0, len(voltage.values) - per_window + 1, per_window):
        chunk = [v for v in voltage.values[w0 : w0 + per_window] if v is not None]
        if len(chunk) < 2:
            raise ValueError(
                f"window at {voltage.time_at(w0).isoformat()} has fewer than 2 present samples"
            )
        arr = np.array(chunk)
        d = np.abs(arr - np.median(arr)) / v_base
        # Value exceeded k % of the time = (100 - k)th percentile.
        p01, p1, p3, p10, p50 = (
            float(np.quantile(d, 1.0 - k / 100.0)) for k, _ in PST_WEIGHTS
        )
        out.append(
            (voltage.time_at(w0), FlickerLevels(p01=p01, p1=p1, p3=p3, p10=p10, p50=p50))
        )
    return out


# ---------------------------------------------------------------------------
# Compliance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplianceLimits:
    """Interconnection limits.  Defaults: 265-292 V low-voltage service
    band, 5 % voltage THD, 5 % TDD, Pst 1.0, Plt 0.8."""

    v_min: float = 265.0
    v_max: float = 292.0
    vthd_max_pct: float = 5.0
    tdd_max_pct: float = 5.0
    pst_max: float = 1.0
    plt_max: float = 0.8

    def __post_init__(self):
        if self.v_min >= self.v_max:
            raise ValueError("v_min must be < v_max")
        for name in ("vthd_max_pct", "tdd_max_pct", "pst_max", "plt_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class PhaseMetrics:
    """Measured metric values for one phase; ``None`` means not measured."""

    phase: str
    v_rms_avg: float | None = None
    vthd_pct: float | None = None
    ithd_pct: float | None = None  # reported only, no limit
    tdd_pct: float | None = None
    pst: float | None = None
    plt: float | None = None


@dataclass(frozen=True)
class MetricCheck:
    metric: str
    phase: str
    value: float
    limit_low: float | None
    limit_high: float | None
    status: str  # "pass" | "fail_low" | "fail_high"
    margin: float  # distance to the nearest limit; negative when violated

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class ComplianceReport:
    checks: tuple
    overall_pass: bool

    def check(self, metric: str, phase: str) -> MetricCheck:
        for c in self.checks:
            if c.metric == metric and c.phase == phase:
                return c
        raise KeyError((metric, phase))

    def to_json(self) -> dict:
        return {
            "overall_pass": self.overall_pass,
            "checks": [
                {
                    "metric": c.metric,
                    "phase": c.phase,
                    "value": c.value,
                    "limit_low": c.limit_low,
                    "limit_high": c.limit_high,
                    "status": c.status,
                    "margin": c.margin,
                }
                for c in self.checks
            ],
        }


def _band_check(metric, phase, value, lo, hi) -> MetricCheck:
    if value < lo:
        status, margin = "fail_low", value - lo
    elif value > hi:
        status, margin = "fail_high", hi - value
    else:
        status, margin = "pass", min(value - lo, hi - value)
    return MetricCheck(metric, phase, value, lo, hi, status, margin)


def _upper_check(metric, phase, value, limit) -> MetricCheck:
    margin = limit - value
    status = "pass" if margin >= 0 else "fail_high"
    return MetricCheck(metric, phase, value, None, limit, status, margin)


def compliance(metrics: list[PhaseMetrics], limits: ComplianceLimits | None = None) -> ComplianceReport:
    """Pass/fail with margin per metric per phase; metrics left ``None``
    are skipped.  Overall verdict requires every performed check to pass."""
    limits = limits or ComplianceLimits()
    checks = []
    for m in metrics:
        if m.v_rms_avg is not None:
            checks.append(_band_check("v_rms_avg", m.phase, m.v_rms_avg, limits.v_min, limits.v_max))
        if m.vthd_pct is not None:
            checks.append(_upper_check("vthd_pct", m.phase, m.vthd_pct, limits.vthd_max_pct))
        if m.tdd_pct is not None:
            checks.append(_upper_check("tdd_pct", m.phase, m.tdd_pct, limits.tdd_max_pct))
        if m.pst is not None:
            checks.append(_upper_check("pst", m.phase, m.pst, limits.pst_max))
        if m.plt is not None:
            checks.append(_upper_check("plt", m.phase, m.plt, limits.plt_max))
    return ComplianceReport(
        checks=tuple(checks),
        overall_pass=all(c.passed for c in checks),
    )
