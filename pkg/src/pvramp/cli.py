"""Batch command-line front end.

One scenario config file drives up to four analyses (perf, quality, feeder,
reliability); each writes JSON/CSV reports plus plot-ready series files into
its own subdirectory of the output tree.  Artifacts contain no wall-clock
values and dictionary keys are sorted, so identical config + seed reproduces
a byte-identical tree; a manifest records the file inventory with hashes.

Exit codes: 0 success, 1 runtime failure, 2 configuration problem.  Failures
print a machine-readable error JSON to stdout.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ToolkitError
from .ingest import (
    AlignedSeries,
    SeriesSchema,
    Unit,
    align,
    bivariate_report,
    parse_series,
    parse_table,
    read_reliability_csv,
)
from .perf import (
    CorrectionMode,
    PvSystemSpec,
    eclipse_summary,
    estimate_power_series,
    ppi_series,
    with_avg_cell_temperature,
)
from .quality import (
    ComplianceLimits,
    HarmonicSpectrum,
    PhaseMetrics,
    PoiContext,
    SpectrumKind,
    compliance,
    flicker_levels_from_voltage,
    plt,
    pst,
    tdd,
    thd,
)
from .feeder import load_feeder, penetration_level, run_qsts, voltage_profile
from .feeder.qsts import audit_device_constraints
from .reliability import (
    TrainConfig,
    build_features,
    fit_cubic,
    fit_two_term_exp,
    mlp_train,
    sensitivity,
)
from .reliability.mlp import model_to_json

log = logging.getLogger(__name__)

ANALYSES = ("perf", "quality", "feeder", "reliability")
CONFIG_DIR_ENV = "PVRAMP_CONFIG_DIR"
DEMO_PREFIX = "demo:"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _resolve_path(value: str, base_dir: Path) -> Path:
    """Resolve a config path; ``demo:`` names map to bundled data files."""
    if value.startswith(DEMO_PREFIX):
        name = value[len(DEMO_PREFIX):]
        ref = resources.files("pvramp").joinpath("data", "demo", name)
        with resources.as_file(ref) as p:
            return Path(p)
    p = Path(value)
    return p if p.is_absolute() else base_dir / p


def _require(config: dict, keys: list, where: str) -> list:
    return [f"{where}.{k}" for k in keys if k not in config]


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode()


class ArtifactWriter:
    """Collects written files so the manifest can inventory them."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def write_json(self, relative: str, payload) -> None:
        self._write(relative, _json_bytes(payload))

    def write_csv(self, relative: str, header: list, rows) -> None:
        out = [",".join(header)]
        for row in rows:
            out.append(",".join("" if v is None else _fmt(v) for v in row))
        self._write(relative, ("\n".join(out) + "\n").encode())

    def _write(self, relative: str, data: bytes) -> None:
        path = self.root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files.append(relative)

    def manifest(self, config_echo: dict, seed: int) -> dict:
        entries = []
        for rel in sorted(self.files):
            digest = hashlib.sha256((self.root / rel).read_bytes()).hexdigest()
            entries.append({"path": rel, "sha256": digest})
        return {
            "tool": f"pvramp {__version__}",
            "seed": seed,
            "config": config_echo,
            "artifacts": entries,
        }


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, datetime):
        return v.isoformat()
    return str(v)


def emit_plot_data(report: dict) -> list:
    """Flatten an analysis report into plot-ready series payloads.

    Each payload is ``{"name", "x_label", "y_label", "x", "y"}`` with
    parallel coordinate lists, one file per figure-equivalent series.
    """
    kind = report.get("kind")
    series = []

    def add(name, x_label, y_label, points):
        xs, ys = [], []
        for x, y in points:
            if y is None:
                continue
            xs.append(x)
            ys.append(y)
        series.append({"name": name, "x_label": x_label, "y_label": y_label, "x": xs, "y": ys})

    if kind == "perf":
        for label, channel in report["series"].items():
            times = channel["t"]
            add(label, "time_utc", channel["y_label"], zip(times, channel["values"]))
    elif kind == "quality":
        for label, channel in report["series"].items():
            add(label, "time_utc", channel["y_label"], zip(channel["t"], channel["values"]))
    elif kind == "feeder":
        for label, channel in report["series"].items():
            add(label, channel.get("x_label", "time_utc"), channel["y_label"],
                zip(channel["t"] if "t" in channel else channel["x"], channel["values"]))
    elif kind == "reliability":
        add("target_interruptions", "day", "count",
            zip(report["days"], report["target"]))
        add("predicted_interruptions", "day", "count",
            zip(report["days"], report["predicted"]))
    else:
        raise ValueError(f"unknown report kind {kind!r}")
    return series


def _write_plots(writer: ArtifactWriter, subdir: str, report: dict) -> None:
    for payload in emit_plot_data(report):
        writer.write_json(f"{subdir}/plots/{payload['name']}.json", payload)


# ---------------------------------------------------------------------------
# perf analysis
# ---------------------------------------------------------------------------


def _parse_channel(spec: dict, base_dir: Path, default_resolution: int = 60) -> AlignedSeries:
    keys = _require(spec, ["file", "column", "unit"], "channel")
    if keys:
        raise ConfigError("channel definition incomplete", keys=keys)
    path = _resolve_path(spec["file"], base_dir)
    if not path.exists():
        raise ConfigError(f"input file not found: {spec['file']}", keys=["file"])
    return parse_series(
        path,
        SeriesSchema(
            timestamp_column=spec.get("timestamp_column", "time"),
            value_column=spec["column"],
            unit=Unit(spec["unit"]),
            resolution_s=int(spec.get("resolution_s", default_resolution)),
            name=spec.get("name", spec["column"]),
            utc_offset_hours=float(spec.get("utc_offset_hours", 0.0)),
        ),
    )


def _window(raw: dict) -> tuple[datetime, datetime]:
    t0 = datetime.fromisoformat(raw["start"])
    t1 = datetime.fromisoformat(raw["end"])
    if t0.tzinfo is None:
        t0 = t0.replace(tzinfo=timezone.utc)
    if t1.tzinfo is None:
        t1 = t1.replace(tzinfo=timezone.utc)
    if t0 >= t1:
        raise ConfigError("window start must precede end", keys=["window"])
    return t0, t1


def run_perf(config: dict, writer: ArtifactWriter, base_dir: Path) -> None:
    missing = _require(config, ["systems"], "perf")
    if missing:
        raise ConfigError("perf config incomplete", keys=missing)

    for system_cfg in config["systems"]:
        keys = _require(system_cfg, ["spec", "power", "irradiance"], "perf.system")
        if keys:
            raise ConfigError("perf system incomplete", keys=keys)
        raw_spec = system_cfg["spec"]
        spec = PvSystemSpec(
            name=raw_spec.get("name", "plant"),
            p_dc_kw=float(raw_spec["p_dc_kw"]),
            p_dirt=float(raw_spec.get("p_dirt", 1.0)),
            p_mismatch=float(raw_spec.get("p_mismatch", 1.0)),
            p_cable=float(raw_spec.get("p_cable", 1.0)),
            p_inverter=float(raw_spec.get("p_inverter", 1.0)),
            temp_coeff_pct=float(raw_spec.get("temp_coeff_pct", -0.5)),
            t_cell_avg_c=raw_spec.get("t_cell_avg_c"),
        )
        mode = CorrectionMode(system_cfg.get("correction", "to_stc"))
        power = _parse_channel(system_cfg["power"], base_dir)
        irradiance = _parse_channel(system_cfg["irradiance"], base_dir)
        t_module = None
        if "module_temp" in system_cfg:
            t_module = _parse_channel(system_cfg["module_temp"], base_dir)
            if mode is CorrectionMode.TO_AVG_CELL and spec.t_cell_avg_c is None:
                spec = with_avg_cell_temperature(spec, t_module)
        t_ambient = (
            _parse_channel(system_cfg["ambient_temp"], base_dir)
            if "ambient_temp" in system_cfg
            else None
        )

        estimate = estimate_power_series(spec, irradiance, t_module, mode)
        power_a, estimate_a = align(power, estimate)
        index = ppi_series(power_a, estimate_a)

        channels = {"power_kw": power_a, "irradiance_wm2": irradiance, "ppi": index}
        if t_module is not None:
            channels["module_temp_c"] = t_module
        if t_ambient is not None:
            channels["ambient_temp_c"] = t_ambient
        summary = eclipse_summary(channels, _window(system_cfg["window"]))

        name = spec.name
        writer.write_json(f"perf/{name}/eclipse_summary.json", summary.to_json())
        writer.write_csv(
            f"perf/{name}/timeseries.csv",
            ["t", "actual_kw", "estimate_kw", "ppi"],
            (
                (power_a.time_at(i), power_a.values[i], estimate_a.values[i], index.values[i])
                for i in range(len(power_a))
            ),
        )

        stats_channels = [power_a, estimate_a]
        if t_module is not None:
            t_mod_a = align(power_a, t_module)[1]
            stats_channels.append(t_mod_a)
        try:
            correlations = bivariate_report(stats_channels)
            writer.write_json(f"perf/{name}/bivariate.json", correlations.to_json())
        except (ToolkitError, ValueError) as exc:
            log.warning("%s: bivariate report skipped: %s", name, exc)

        report = {
            "kind": "perf",
            "series": {
                f"ppi_{name}": {
                    "t": [t.isoformat() for t in index.timestamps()],
                    "values": list(index.values),
                    "y_label": "ppi",
                },
                f"power_{name}": {
                    "t": [t.isoformat() for t in power_a.timestamps()],
                    "values": list(power_a.values),
                    "y_label": "kW",
                },
            },
        }
        _write_plots(writer, f"perf/{name}", report)


# ---------------------------------------------------------------------------
# quality analysis
# ---------------------------------------------------------------------------


def _spectrum_series(channels: dict, prefix: str, phase: str, kind: SpectrumKind, fundamental: AlignedSeries):
    """Per-sample spectra assembled from <prefix>_h<order>_<phase> columns.

    Returns all-None when the export carries no harmonic columns for this
    prefix/phase (pre-computed THD columns take over in that case).
    """
    orders = {}
    for name, series in channels.items():
        parts = name.split("_")
        if len(parts) == 3 and parts[0] == prefix and parts[2] == phase and parts[1].startswith("h"):
            orders[int(parts[1][1:])] = series
    if not orders:
        return [None] * len(fundamental.values)
    spectra = []
    for i, fund in enumerate(fundamental.values):
        if fund is None or fund <= 0:
            spectra.append(None)
            continue
        harmonics = {}
        usable = True
        for order, series in orders.items():
            v = series.values[i]
            if v is None:
                usable = False
                break
            harmonics[order] = v
        spectra.append(HarmonicSpectrum.of(kind, fund, harmonics) if usable else None)
    return spectra


def _channel_values(channels: dict, name: str, length: int) -> list:
    series = channels.get(name)
    if series is None:
        return [None] * length
    return list(series.values)


def run_quality(config: dict, writer: ArtifactWriter, base_dir: Path) -> None:
    missing = _require(config, ["meter"], "quality")
    if missing:
        raise ConfigError("quality config incomplete", keys=missing)
    meter_cfg = config["meter"]
    missing = _require(meter_cfg, ["file"], "quality.meter")
    if missing:
        raise ConfigError("quality config incomplete", keys=missing)
    path = _resolve_path(meter_cfg["file"], base_dir)
    if not path.exists():
        raise ConfigError(f"input file not found: {meter_cfg['file']}", keys=["meter.file"])

    resolution = int(meter_cfg.get("resolution_s", 60))
    offset = float(meter_cfg.get("utc_offset_hours", 0.0))
    phases = tuple(meter_cfg.get("phases", "abc"))
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    ts_col = meter_cfg.get("timestamp_column", "time")
    # Meter exports carry RMS channels plus either raw harmonic magnitudes
    # (v_h<order>_<ph>, i_h<order>_<ph>) or the meter's own pre-computed
    # distortion/flicker columns (vthd_, ithd_, tdd_, pst_, plt_, ifl_),
    # which pass through unchanged.
    units: dict[str, Unit] = {}
    for col in header:
        if col == ts_col:
            continue
        if col.startswith(("vthd_", "ithd_", "tdd_")):
            units[col] = Unit.PERCENT
        elif col.startswith(("pst_", "plt_", "ifl_")):
            units[col] = Unit.DIMENSIONLESS
        elif col.startswith("v_"):
            units[col] = Unit.VOLT
        elif col.startswith("i_"):
            units[col] = Unit.AMP
    channels = parse_table(path, ts_col, resolution, units, utc_offset_hours=offset)

    limits_cfg = config.get("limits", {})
    limits = ComplianceLimits(
        v_min=float(limits_cfg.get("v_min", 265.0)),
        v_max=float(limits_cfg.get("v_max", 292.0)),
        vthd_max_pct=float(limits_cfg.get("vthd_max_pct", 5.0)),
        tdd_max_pct=float(limits_cfg.get("tdd_max_pct", 5.0)),
        pst_max=float(limits_cfg.get("pst_max", 1.0)),
        plt_max=float(limits_cfg.get("plt_max", 0.8)),
    )
    v_base = float(meter_cfg.get("v_base", 277.0))

    metric_rows = []
    plot_series = {}
    for phase in phases:
        v_rms = channels.get(f"v_rms_{phase}")
        i_rms = channels.get(f"i_rms_{phase}")
        if v_rms is None:
            raise ConfigError(f"meter file lacks column v_rms_{phase}", keys=["meter.file"])

        # Demand-current base: max 15-minute average unless configured.
        if "max_demand_current_a" in meter_cfg:
            demand = float(meter_cfg["max_demand_current_a"])
        elif i_rms is not None:
            window = max(1, 900 // resolution)
            means = []
            for k in range(0, max(1, len(i_rms.values) - window + 1)):
                chunk = [v for v in i_rms.values[k : k + window] if v is not None]
                if chunk:
                    means.append(sum(chunk) / len(chunk))
            demand = max(means) if means else 1.0
        else:
            demand = 1.0
        ctx = PoiContext(r_ohm=0.0, x_ohm=0.0, v_base=v_base, max_demand_current_a=demand)

        v_spectra = _spectrum_series(channels, "v", phase, SpectrumKind.VOLTAGE, v_rms)
        vthd_vals = [None if s is None else thd(s) for s in v_spectra]
        if not any(v is not None for v in vthd_vals):
            vthd_vals = _channel_values(channels, f"vthd_{phase}", len(v_rms))
        if i_rms is not None:
            i_spectra = _spectrum_series(channels, "i", phase, SpectrumKind.CURRENT, i_rms)
            ithd_vals = [None if s is None else thd(s) for s in i_spectra]
            tdd_vals = [None if s is None else tdd(s, ctx) for s in i_spectra]
        else:
            ithd_vals = [None] * len(v_rms)
            tdd_vals = [None] * len(v_rms)
        if not any(v is not None for v in ithd_vals):
            ithd_vals = _channel_values(channels, f"ithd_{phase}", len(v_rms))
        if not any(v is not None for v in tdd_vals):
            tdd_vals = _channel_values(channels, f"tdd_{phase}", len(v_rms))

        pst_chan = channels.get(f"pst_{phase}")
        if pst_chan is not None:
            # Meter-supplied Pst: one reading per 10-minute window.
            per_window = max(1, 600 // pst_chan.resolution_s)
            pst_points = [
                (pst_chan.time_at(i), v)
                for i, v in enumerate(pst_chan.values)
                if v is not None and i % per_window == 0
            ]
        else:
            flicker = flicker_levels_from_voltage(v_rms, window_s=600, v_base=v_base)
            pst_points = [(t, pst(levels)) for t, levels in flicker]
        plt_chan = channels.get(f"plt_{phase}")
        if plt_chan is not None:
            plt_points = [
                (plt_chan.time_at(i), v)
                for i, v in enumerate(plt_chan.values)
                if v is not None
            ]
        else:
            plt_points = []
            for k in range(0, len(pst_points) - 11, 12):
                block = [p for _, p in pst_points[k : k + 12]]
                plt_points.append((pst_points[k][0], plt(block)))

        present_v = v_rms.present()
        metric_rows.append(
            PhaseMetrics(
                phase=phase,
                v_rms_avg=float(present_v.mean()) if present_v.size else None,
                vthd_pct=max((v for v in vthd_vals if v is not None), default=None),
                ithd_pct=max((v for v in ithd_vals if v is not None), default=None),
                tdd_pct=max((v for v in tdd_vals if v is not None), default=None),
                pst=max((p for _, p in pst_points), default=None),
                plt=max((p for _, p in plt_points), default=None),
            )
        )

        times = [t.isoformat() for t in v_rms.timestamps()]
        plot_series[f"v_rms_{phase}"] = {"t": times, "values": list(v_rms.values), "y_label": "V"}
        plot_series[f"vthd_{phase}"] = {"t": times, "values": vthd_vals, "y_label": "percent"}
        plot_series[f"ithd_{phase}"] = {"t": times, "values": ithd_vals, "y_label": "percent"}
        plot_series[f"tdd_{phase}"] = {"t": times, "values": tdd_vals, "y_label": "percent"}
        plot_series[f"pst_{phase}"] = {
            "t": [t.isoformat() for t, _ in pst_points],
            "values": [p for _, p in pst_points],
            "y_label": "pst",
        }
        plot_series[f"plt_{phase}"] = {
            "t": [t.isoformat() for t, _ in plt_points],
            "values": [p for _, p in plt_points],
            "y_label": "plt",
        }

    report = compliance(metric_rows, limits)
    writer.write_json("quality/compliance.json", report.to_json())
    writer.write_json(
        "quality/metrics.json",
        {
            "phases": [
                {
                    "phase": m.phase,
                    "v_rms_avg": m.v_rms_avg,
                    "vthd_pct_max": m.vthd_pct,
                    "ithd_pct_max": m.ithd_pct,
                    "tdd_pct_max": m.tdd_pct,
                    "pst_max": m.pst,
                    "plt_max": m.plt,
                }
                for m in metric_rows
            ]
        },
    )
    _write_plots(writer, "quality", {"kind": "quality", "series": plot_series})


# ---------------------------------------------------------------------------
# feeder analysis
# ---------------------------------------------------------------------------


def run_feeder(config: dict, writer: ArtifactWriter, base_dir: Path) -> None:
    missing = _require(config, ["feeder_file", "profiles"], "feeder")
    if missing:
        raise ConfigError("feeder config incomplete", keys=missing)
    feeder_path = _resolve_path(config["feeder_file"], base_dir)
    if not feeder_path.exists():
        raise ConfigError(f"input file not found: {config['feeder_file']}", keys=["feeder.feeder_file"])
    model = load_feeder(feeder_path)

    profiles_cfg = config["profiles"]
    missing = _require(profiles_cfg, ["file"], "feeder.profiles")
    if missing:
        raise ConfigError("feeder config incomplete", keys=missing)
    path = _resolve_path(profiles_cfg["file"], base_dir)
    if not path.exists():
        raise ConfigError(f"input file not found: {profiles_cfg['file']}", keys=["feeder.profiles.file"])
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    ts_col = profiles_cfg.get("timestamp_column", "time")
    unit_map = {}
    for col in header:
        if col == ts_col:
            continue
        if "wm2" in col:
            unit_map[col] = Unit.W_PER_M2
        elif col.endswith("_c"):
            unit_map[col] = Unit.DEG_C
        else:
            unit_map[col] = Unit.FRACTION
    profiles = parse_table(
        path,
        ts_col,
        int(profiles_cfg.get("resolution_s", 60)),
        unit_map,
        utc_offset_hours=float(profiles_cfg.get("utc_offset_hours", 0.0)),
    )

    window = _window(config["window"]) if "window" in config else None
    result = run_qsts(model, profiles, window=window)
    violations = audit_device_constraints(result)

    writer.write_csv(
        "feeder/device_actions.csv",
        ["t", "device", "kind", "phase", "from", "to"],
        (
            (t, a.device_id, a.kind, a.phase, a.from_value, a.to_value)
            for t, a in result.actions
        ),
    )
    writer.write_csv(
        "feeder/state.csv",
        ["t", "loss_p_kw", "loss_q_kvar", "infeasible"]
        + [f"pv_{pv.id}_kw" for pv in model.pvs],
        (
            (s.t, s.loss_p_kw, s.loss_q_kvar, int(s.infeasible))
            + tuple(s.pv_p_kw[pv.id] for pv in model.pvs)
            for s in result.steps
        ),
    )

    eclipse_peak = None
    if model.pvs and result.steps:
        # Timestep of deepest aggregate PV output within the run.
        eclipse_peak = min(result.steps, key=lambda s: sum(s.pv_p_kw.values())).t
    profile_payload = {}
    if eclipse_peak is not None:
        prof = voltage_profile(result, eclipse_peak)
        profile_payload = {
            "t": eclipse_peak.isoformat(),
            "phases": {
                phase: [{"distance_km": d, "v_pu": v} for d, v in pairs]
                for phase, pairs in prof.items()
            },
        }
        writer.write_json("feeder/voltage_profile.json", profile_payload)

    writer.write_json(
        "feeder/summary.json",
        {
            "feeder": model.name,
            "penetration_pct": penetration_level(model, profiles),
            "steps": len(result.steps),
            "tap_changes": {
                f"{rid}:{phase}": count
                for (rid, phase), count in sorted(result.tap_change_counts().items())
            },
            "cap_switches": {
                f"{cid}:{phase}": count
                for (cid, phase), count in sorted(result.cap_switch_counts().items())
            },
            "infeasible_steps": sum(1 for s in result.steps if s.infeasible),
            "audit_violations": violations,
        },
    )

    plot_series = {}
    times = [s.t.isoformat() for s in result.steps]
    plot_series["loss_p_kw"] = {"t": times, "values": [s.loss_p_kw for s in result.steps], "y_label": "kW"}
    for device in model.tap_devices:
        for phase in device.phases:
            plot_series[f"tap_{device.id}_{phase}"] = {
                "t": times,
                "values": [s.taps[device.id][phase] for s in result.steps],
                "y_label": "tap",
            }
    for cap in model.capacitors:
        for phase in cap.phases:
            plot_series[f"capq_{cap.id}_{phase}"] = {
                "t": times,
                "values": [s.cap_q_kvar[(cap.id, phase)] for s in result.steps],
                "y_label": "kvar",
            }
    if profile_payload:
        for phase, pairs in profile_payload["phases"].items():
            plot_series[f"voltage_profile_{phase}"] = {
                "x": [p["distance_km"] for p in pairs],
                "values": [p["v_pu"] for p in pairs],
                "x_label": "distance_km",
                "y_label": "v_pu",
            }
    _write_plots(writer, "feeder", {"kind": "feeder", "series": plot_series})


# ---------------------------------------------------------------------------
# reliability analysis
# ---------------------------------------------------------------------------


def run_reliability(config: dict, writer: ArtifactWriter, base_dir: Path, seed: int) -> None:
    missing = _require(config, ["records"], "reliability")
    if missing:
        raise ConfigError("reliability config incomplete", keys=missing)
    path = _resolve_path(config["records"], base_dir)
    if not path.exists():
        raise ConfigError(f"input file not found: {config['records']}", keys=["reliability.records"])
    records = read_reliability_csv(path)

    y = np.array([r.n_sustained for r in records], dtype=float)
    models = {
        "T": fit_cubic([r.temperature_c for r in records], y, target="T"),
        "W": fit_two_term_exp([r.wind_ms for r in records], y, target="W"),
        "P": fit_two_term_exp([r.precipitation_mm for r in records], y, target="P"),
        "A": fit_cubic([r.pressure_hpa for r in records], y, target="A"),
        "L": fit_cubic([float(r.lightning) for r in records], y, target="L"),
    }
    writer.write_json(
        "reliability/regressions.json", {k: m.to_json() for k, m in models.items()}
    )

    features = build_features(records, models)
    train_cfg_raw = config.get("train", {})
    cfg = TrainConfig(
        hidden=int(train_cfg_raw.get("hidden", 20)),
        init=train_cfg_raw.get("init", "xavier_uniform"),
        learning_rate=float(train_cfg_raw.get("learning_rate", 0.005)),
        momentum=float(train_cfg_raw.get("momentum", 0.9)),
        max_epochs=int(train_cfg_raw.get("max_epochs", 2000)),
        patience=int(train_cfg_raw.get("patience", 300)),
        seed=int(train_cfg_raw.get("seed", seed)),
        hidden_act=train_cfg_raw.get("hidden_act", "tanh"),
        output_act=train_cfg_raw.get("output_act", "identity"),
    )
    model, metrics = mlp_train(features, cfg)
    predictions = model.norm.y_denorm(
        model.forward_normalized(model.norm.x_norm(features.x))
    )

    writer.write_json("reliability/model.json", model_to_json(model, cfg))
    writer.write_json(
        "reliability/metrics.json",
        {
            "epochs_run": metrics.epochs_run,
            "best_epoch": metrics.best_epoch,
            "train_mse": metrics.train_mse,
            "val_mse": metrics.val_mse,
            "test_mse": metrics.test_mse,
            "target_variance": metrics.target_variance,
            "split": [metrics.n_train, metrics.n_val, metrics.n_test],
        },
    )
    writer.write_json("reliability/sensitivity.json", sensitivity(model, features.x).to_json())

    report = {
        "kind": "reliability",
        "days": [d.isoformat() for d in features.days],
        "target": [float(v) for v in features.y],
        "predicted": [max(0.0, float(v)) for v in predictions],
    }
    writer.write_csv(
        "reliability/predictions.csv",
        ["day", "target", "predicted"],
        zip(report["days"], report["target"], report["predicted"]),
    )
    _write_plots(writer, "reliability", report)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


@dataclass
class RunError(Exception):
    code: int
    payload: dict


def load_config(path: Path) -> dict:
    if not path.exists():
        raise RunError(EXIT_CONFIG, {"error": "config_not_found", "path": str(path)})
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib

            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path) as fh:
            return json.load(fh)
    except (json.JSONDecodeError, ValueError) as exc:
        raise RunError(EXIT_CONFIG, {"error": "config_parse", "detail": str(exc)})


def run(config: dict, analysis: str, out_dir: Path, seed: int, base_dir: Path) -> int:
    """Execute the requested analyses; returns a process exit code."""
    if analysis != "all" and analysis not in ANALYSES:
        raise RunError(
            EXIT_CONFIG,
            {"error": "unknown_analysis", "analysis": analysis, "known": list(ANALYSES) + ["all"]},
        )
    selected = ANALYSES if analysis == "all" else (analysis,)
    missing = [name for name in selected if name not in config]
    if analysis != "all" and missing:
        raise RunError(EXIT_CONFIG, {"error": "missing_config_section", "keys": missing})

    writer = ArtifactWriter(out_dir)
    ran = []
    try:
        for name in selected:
            if name not in config:
                continue
            if name == "perf":
                run_perf(config["perf"], writer, base_dir)
            elif name == "quality":
                run_quality(config["quality"], writer, base_dir)
            elif name == "feeder":
                run_feeder(config["feeder"], writer, base_dir)
            elif name == "reliability":
                run_reliability(config["reliability"], writer, base_dir, seed)
            ran.append(name)
    except ConfigError as exc:
        raise RunError(EXIT_CONFIG, {"error": "config", "detail": str(exc), "keys": exc.keys})
    except (ToolkitError, ValueError, KeyError, OSError) as exc:
        raise RunError(EXIT_RUNTIME, {"error": type(exc).__name__, "detail": str(exc)})

    if not ran:
        raise RunError(EXIT_CONFIG, {"error": "nothing_to_run", "detail": "no analysis sections in config"})

    manifest = writer.manifest({"analysis": analysis, "sections": ran}, seed)
    (out_dir / "manifest.json").write_bytes(_json_bytes(manifest))
    return EXIT_OK


def main(argv: list | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pvramp",
        description="PV ramp-event analytics: performance, power quality, feeder QSTS, reliability.",
    )
    parser.add_argument("--config", required=True, help="scenario config file (JSON or TOML)")
    parser.add_argument("--analysis", default="all", help="perf | quality | feeder | reliability | all")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed overriding the config value")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.config.startswith(DEMO_PREFIX):
        config_path = _resolve_path(args.config, Path.cwd())
    else:
        config_path = Path(args.config)
        if not config_path.is_absolute() and not config_path.exists():
            env_dir = os.environ.get(CONFIG_DIR_ENV)
            if env_dir and (Path(env_dir) / config_path).exists():
                config_path = Path(env_dir) / config_path

    try:
        config = load_config(config_path)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return run(config, args.analysis, out_dir, seed, base_dir=config_path.parent)
    except RunError as exc:
        print(json.dumps(exc.payload, sort_keys=True))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
