#!/usr/bin/env python3
"""Regenerate the bundled demo dataset (deterministic, seeded).

Writes CSV/JSON inputs into src/pvramp/data/demo/: one eclipse day
(2017-08-21, US Eastern daylight time, UTC-4) of 1-minute PV and weather
channels for two plants, a POI meter export, a 12-bus radial feeder with its
driving profiles, a daily reliability history, and a scenario config wiring
it all together.

Run from the repository root:  python3 scripts/make_demo_data.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "pvramp" / "data" / "demo"

MINUTES = 1440
ECLIPSE_START_H = 13.0 + 26.0 / 60.0  # local clock hours
ECLIPSE_END_H = 16.5
SUNRISE_H = 7.0
SUNSET_H = 20.2


def local_stamp(minute: int) -> str:
    return f"2017-08-21 {minute // 60:02d}:{minute % 60:02d}"


def clear_sky(h: float, peak: float) -> float:
    if not SUNRISE_H < h < SUNSET_H:
        return 0.0
    return peak * math.sin(math.pi * (h - SUNRISE_H) / (SUNSET_H - SUNRISE_H)) ** 1.2


def eclipse_factor(h: float, depth: float) -> float:
    if not ECLIPSE_START_H <= h <= ECLIPSE_END_H:
        return 1.0
    u = (h - ECLIPSE_START_H) / (ECLIPSE_END_H - ECLIPSE_START_H)
    return 1.0 - depth * 0.5 * (1.0 - math.cos(2.0 * math.pi * u))


def ambient_temp(h: float, ghi: float, base: float, swing: float) -> float:
    diurnal = base + swing * math.sin(math.pi * max(0.0, h - 6.0) / 15.0)
    return diurnal + 2.5 * ghi / 1000.0


def write_csv(name: str, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    (OUT / name).write_text("\n".join(lines) + "\n")
    print(f"wrote {name} ({len(lines) - 1} rows)")


def derate(*factors: float) -> float:
    out = 1.0
    for f in factors:
        out *= f
    return out


def make_pv_csvs(rng: np.random.Generator) -> None:
    # System A: 1.4 MW, healthy irradiance sensor, observed/expected ~ 1.08.
    # System B: 355 kW with its irradiance channel reading ~10x low, so the
    # estimate is mis-scaled and the observed/estimate ratio sits near 10.
    d_a = derate(0.9, 0.97, 0.99, 0.98)
    d_b = derate(0.9, 0.97, 0.99, 0.9725)
    rows_a, rows_b = [], []
    for minute in range(MINUTES):
        h = minute / 60.0
        ghi_true_a = clear_sky(h, 940.0) * eclipse_factor(h, 0.708)
        ghi_true_b = clear_sky(h, 905.0) * eclipse_factor(h, 0.874)
        noise_a = float(rng.normal(0, 3.0)) if ghi_true_a > 0 else 0.0
        noise_b = float(rng.normal(0, 3.0)) if ghi_true_b > 0 else 0.0
        ghi_a = max(0.0, ghi_true_a + noise_a)
        ghi_b_true = max(0.0, ghi_true_b + noise_b)
        ghi_b_meter = ghi_b_true / 10.0  # plant B's sensor bias

        t_amb_a = ambient_temp(h, ghi_a, 26.0, 6.0) + float(rng.normal(0, 0.12))
        t_amb_b = ambient_temp(h, ghi_b_true, 25.0, 7.5) + float(rng.normal(0, 0.12))
        t_mod_a = t_amb_a + 22.0 * ghi_a / 1000.0 + float(rng.normal(0, 0.15))
        t_mod_b = t_amb_b + 24.0 * ghi_b_true / 1000.0 + float(rng.normal(0, 0.15))

        x_a = 1.0 + (-0.5 / 100.0) * (t_mod_a - 25.0)
        x_b = 1.0 + (-0.5 / 100.0) * (t_mod_b - 25.0)
        power_a = max(0.0, 1400.0 * ghi_a / 1000.0 * x_a * d_a * 1.08 + float(rng.normal(0, 1.5)))
        power_b = max(0.0, 355.0 * ghi_b_true / 1000.0 * x_b * d_b * 1.0 + float(rng.normal(0, 0.6)))
        if ghi_a <= 0:
            power_a = 0.0
        if ghi_b_true <= 0:
            power_b = 0.0

        stamp = local_stamp(minute)
        rows_a.append((stamp, f"{power_a:.3f}", f"{ghi_a:.2f}", f"{t_amb_a:.3f}", f"{t_mod_a:.3f}"))
        rows_b.append((stamp, f"{power_b:.3f}", f"{ghi_b_meter:.3f}", f"{t_amb_b:.3f}", f"{t_mod_b:.3f}"))
    header = ["time", "power_kw", "ghi_wm2", "t_amb_c", "t_mod_c"]
    write_csv("pv_system_a.csv", header, rows_a)
    write_csv("pv_system_b.csv", header, rows_b)


def make_meter_csv(rng: np.random.Generator) -> None:
    # POI of system A, 13:00-17:00 local.  Harmonic voltages sit near 3.5 %
    # THD; harmonic currents are inverter switching artifacts that stay
    # roughly constant while the fundamental tracks plant output, so current
    # THD spikes during the dip and TDD stays flat.
    d_a = derate(0.9, 0.97, 0.99, 0.98)
    rows = []
    header = ["time", "v_rms_a", "v_rms_b", "v_rms_c", "i_rms_a", "i_rms_b", "i_rms_c"]
    for order in (3, 5, 7):
        header += [f"v_h{order}_a", f"v_h{order}_b", f"v_h{order}_c"]
    for order in (3, 5, 7):
        header += [f"i_h{order}_a", f"i_h{order}_b", f"i_h{order}_c"]
    for minute in range(13 * 60, 17 * 60 + 1):
        h = minute / 60.0
        ghi = clear_sky(h, 940.0) * eclipse_factor(h, 0.708)
        power = 1400.0 * ghi / 1000.0 * d_a * 1.08
        row = [local_stamp(minute)]
        v_phase = []
        for k, phase in enumerate("abc"):
            v = (
                283.0
                + 0.8 * k * 0.5
                + 1.6 * math.sin(2.0 * math.pi * (h - 6.0) / 24.0)
                + 1.1 * (1.0 - eclipse_factor(h, 0.708))
                + float(rng.normal(0, 0.25))
            )
            v_phase.append(v)
            row.append(f"{v:.3f}")
        i_fund = []
        for k in range(3):
            i = power * 1000.0 / (3.0 * v_phase[k]) * (1.0 + 0.02 * k) + float(rng.normal(0, 2.0))
            i = max(6.0, i)  # inverter tare/no-load draw
            i_fund.append(i)
            row.append(f"{i:.2f}")
        vthd_scale = {3: 0.0225, 5: 0.019, 7: 0.013}
        for order in (3, 5, 7):
            for k in range(3):
                mag = v_phase[k] * vthd_scale[order] * (1.0 + 0.03 * k) + float(rng.normal(0, 0.05))
                row.append(f"{max(0.0, mag):.3f}")
        ithd_base = {3: 16.0, 5: 11.0, 7: 7.0}
        for order in (3, 5, 7):
            for k in range(3):
                mag = ithd_base[order] * (1.0 + 0.05 * k) + float(rng.normal(0, 0.4))
                row.append(f"{max(0.0, mag):.3f}")
        rows.append(tuple(row))
    write_csv("meter_poi_a.csv", header, rows)


def make_feeder_profiles(rng: np.random.Generator) -> None:
    raw_shape = []
    for minute in range(MINUTES):
        h = minute / 60.0
        shape = (
            0.55
            + 0.22 * math.exp(-(((h - 13.5) / 4.0) ** 2))
            + 0.28 * math.exp(-(((h - 19.0) / 2.0) ** 2))
        )
        raw_shape.append(shape)
    peak = max(raw_shape)
    rows = []
    for minute in range(MINUTES):
        h = minute / 60.0
        ghi = max(0.0, clear_sky(h, 940.0) * eclipse_factor(h, 0.708) + (float(rng.normal(0, 2.0)) if clear_sky(h, 940.0) > 0 else 0.0))
        t_amb = ambient_temp(h, ghi, 26.0, 6.0)
        t_mod = t_amb + 22.0 * ghi / 1000.0
        rows.append(
            (
                local_stamp(minute),
                f"{ghi:.2f}",
                f"{t_mod:.3f}",
                f"{raw_shape[minute] / peak:.6f}",
            )
        )
    write_csv("feeder_profiles.csv", ["time", "ghi_wm2", "t_mod_c", "load_shape"], rows)


def make_feeder_json() -> None:
    # 12-bus radial feeder, 17 km trunk: substation LTC, three line
    # regulators, four capacitor banks (three controlled + one fixed), and
    # the two plants at 3.75 km and 12.5 km.  PV nameplate over summed peak
    # load = 1755 / 4743 = 37 %.
    phase_split = {"a": 0.35, "b": 0.33, "c": 0.32}
    bus_km = {
        "sub": 0.05, "b1": 1.5, "b2": 3.0, "b3": 3.75, "b4": 5.5, "b5": 7.0,
        "b6": 9.0, "b7": 10.5, "b8": 12.5, "b9": 14.5, "b10": 17.0,
    }
    load_kw_3ph = {
        "b1": 420.0, "b2": 400.0, "b3": 380.0, "b4": 440.0, "b5": 430.0,
        "b6": 460.0, "b7": 440.0, "b8": 420.0, "b9": 480.0, "b10": 873.0,
    }
    spans = [
        ("sub", "b1", 1.45), ("b1", "b2", 1.5), ("b2", "b3", 0.75),
        ("b3", "b4", 1.75), ("b4", "b5", 1.5), ("b5", "b6", 2.0),
        ("b6", "b7", 1.5), ("b7", "b8", 2.0), ("b8", "b9", 2.0),
        ("b9", "b10", 2.5),
    ]
    r_per_km, x_per_km = 0.30, 0.45
    phase_skew = {"a": 1.03, "b": 1.00, "c": 0.97}

    feeder = {
        "name": "demo12",
        "base": {"kv_ln": 7.2, "kva_1ph": 2000.0},
        "source": {"bus": "src", "v_pu": 1.0},
        "buses": [{"id": "src", "distance_km": 0.0, "phases": "abc"}]
        + [{"id": b, "distance_km": km, "phases": "abc"} for b, km in bus_km.items()],
        "transformers": [
            {
                "id": "subxf",
                "from": "src",
                "to": "sub",
                "r_ohm": 0.05,
                "x_ohm": 0.5,
                "ltc": {
                    "id": "ltc",
                    "phases": "abc",
                    "band_center_pu": 1.0,
                    "bandwidth_pu": 0.03,
                    "max_daily_taps": 273,
                },
            }
        ],
        "lines": [
            {
                "from": a,
                "to": b,
                "r_ohm": {p: round(r_per_km * km * phase_skew[p], 6) for p in "abc"},
                "x_ohm": {p: round(x_per_km * km * phase_skew[p], 6) for p in "abc"},
            }
            for a, b, km in spans
        ],
        "regulators": [
            {"id": "vr1", "bus": "b2", "phases": "abc", "band_center_pu": 1.0,
             "bandwidth_pu": 0.01667, "max_daily_taps": 273},
            {"id": "vr2", "bus": "b5", "phases": "abc", "band_center_pu": 1.0,
             "bandwidth_pu": 0.01667, "max_daily_taps": 273},
            {"id": "vr3", "bus": "b7", "phases": "abc", "band_center_pu": 1.0,
             "bandwidth_pu": 0.01667, "max_daily_taps": 273},
        ],
        "capacitors": [
            {"id": "cap0", "bus": "b9", "phases": "abc", "q_kvar": 150.0,
             "control": {"kind": "fixed"}},
            {"id": "cap1", "bus": "b1", "phases": "abc", "q_kvar": 100.0,
             "control": {"kind": "voltage_band", "on_pu": 0.955, "off_pu": 1.045},
             "max_daily_switching": 60},
            {"id": "cap2", "bus": "b4", "phases": "abc", "q_kvar": 100.0,
             "control": {"kind": "voltage_band", "on_pu": 0.960, "off_pu": 1.045},
             "max_daily_switching": 60},
            {"id": "cap3", "bus": "b6", "phases": "abc", "q_kvar": 150.0,
             "control": {"kind": "voltage_band", "on_pu": 0.985, "off_pu": 1.048},
             "max_daily_switching": 60},
        ],
        "loads": [
            {
                "bus": bus,
                "phase": p,
                "p_kw": round(kw * phase_split[p], 3),
                "q_kvar": round(kw * phase_split[p] * 0.426, 3),
                "shape": "load_shape",
            }
            for bus, kw in load_kw_3ph.items()
            for p in "abc"
        ],
        "pvs": [
            {
                "id": "pv_a",
                "bus": "b8",
                "phases": "abc",
                "system": {
                    "name": "system_a", "p_dc_kw": 1400.0, "p_dirt": 0.9,
                    "p_mismatch": 0.97, "p_cable": 0.99, "p_inverter": 0.98,
                    "temp_coeff_pct": -0.5,
                },
                "irradiance": "ghi_wm2",
                "temperature": "t_mod_c",
                "correction": "to_stc",
            },
            {
                "id": "pv_b",
                "bus": "b3",
                "phases": "abc",
                "system": {
                    "name": "system_b", "p_dc_kw": 355.0, "p_dirt": 0.9,
                    "p_mismatch": 0.97, "p_cable": 0.99, "p_inverter": 0.9725,
                    "temp_coeff_pct": -0.5,
                },
                "irradiance": "ghi_wm2",
                "temperature": "t_mod_c",
                "correction": "to_stc",
            },
        ],
    }
    (OUT / "feeder12.json").write_text(json.dumps(feeder, indent=1) + "\n")
    print("wrote feeder12.json")


def make_reliability_csv(rng: np.random.Generator) -> None:
    import datetime as dt

    rows = []
    day = dt.date(2015, 1, 1)
    end = dt.date(2017, 4, 30)
    while day <= end:
        doy = day.timetuple().tm_yday
        season = math.sin(2.0 * math.pi * (doy - 105) / 365.0)
        summer = max(0.0, season)
        t_avg = 22.0 + 8.0 * season + float(rng.normal(0, 1.5))
        pressure = 1016.0 - 4.0 * season + float(rng.normal(0, 2.0))
        wind = max(0.3, 4.0 + 2.0 * float(rng.normal(0, 1.0)) + 1.5 * summer)
        rain_prob = 0.15 + 0.35 * summer
        precip = float(rng.exponential(9.0)) if rng.uniform() < rain_prob else 0.0
        lightning = int(rng.poisson(2.0 + 55.0 * summer**2))
        # Lightning dominates the interruption count per raw unit.
        n_sustained = max(
            0,
            int(
                round(
                    2.0
                    + 0.25 * lightning
                    + 0.04 * wind
                    + 0.02 * precip
                    + float(rng.normal(0, 1.5))
                )
            ),
        )
        n_momentary = max(0, int(round(1.6 * n_sustained + float(rng.normal(0, 2.5)))))
        rows.append(
            (
                day.isoformat(),
                n_sustained,
                n_momentary,
                f"{t_avg:.2f}",
                f"{wind:.2f}",
                f"{precip:.2f}",
                f"{pressure:.2f}",
                lightning,
            )
        )
        day += dt.timedelta(days=1)
    write_csv(
        "reliability_miami.csv",
        ["date", "n_sustained", "n_momentary", "t_avg_c", "wind_ms", "precip_mm", "pressure_hpa", "lightning"],
        rows,
    )


def make_scenario() -> None:
    def channel(file, column, unit):
        return {"file": file, "column": column, "unit": unit, "utc_offset_hours": -4.0}

    window = {"start": "2017-08-21T18:00:00+00:00", "end": "2017-08-21T19:01:00+00:00"}
    scenario = {
        "seed": 42,
        "perf": {
            "systems": [
                {
                    "spec": {
                        "name": "system_a", "p_dc_kw": 1400.0, "p_dirt": 0.9,
                        "p_mismatch": 0.97, "p_cable": 0.99, "p_inverter": 0.98,
                        "temp_coeff_pct": -0.5,
                    },
                    "correction": "to_stc",
                    "power": channel("demo:pv_system_a.csv", "power_kw", "kW"),
                    "irradiance": channel("demo:pv_system_a.csv", "ghi_wm2", "W/m2"),
                    "module_temp": channel("demo:pv_system_a.csv", "t_mod_c", "degC"),
                    "ambient_temp": channel("demo:pv_system_a.csv", "t_amb_c", "degC"),
                    "window": window,
                },
                {
                    "spec": {
                        "name": "system_b", "p_dc_kw": 355.0, "p_dirt": 0.9,
                        "p_mismatch": 0.97, "p_cable": 0.99, "p_inverter": 0.9725,
                        "temp_coeff_pct": -0.5,
                    },
                    "correction": "to_stc",
                    "power": channel("demo:pv_system_b.csv", "power_kw", "kW"),
                    "irradiance": channel("demo:pv_system_b.csv", "ghi_wm2", "W/m2"),
                    "module_temp": channel("demo:pv_system_b.csv", "t_mod_c", "degC"),
                    "ambient_temp": channel("demo:pv_system_b.csv", "t_amb_c", "degC"),
                    "window": window,
                },
            ]
        },
        "quality": {
            "meter": {
                "file": "demo:meter_poi_a.csv",
                "v_base": 277.0,
                "utc_offset_hours": -4.0,
            }
        },
        "feeder": {
            "feeder_file": "demo:feeder12.json",
            "profiles": {"file": "demo:feeder_profiles.csv", "utc_offset_hours": -4.0},
        },
        "reliability": {
            "records": "demo:reliability_miami.csv",
            "train": {"hidden": 20, "max_epochs": 600, "patience": 600},
        },
    }
    (OUT / "scenario_demo.json").write_text(json.dumps(scenario, indent=1) + "\n")
    print("wrote scenario_demo.json")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20170821)
    make_pv_csvs(rng)
    make_meter_csv(rng)
    make_feeder_profiles(rng)
    make_feeder_json()
    make_reliability_csv(rng)
    make_scenario()


if __name__ == "__main__":
    main()
