"""Irradiance-ramp impact analytics for distributed PV and the feeder.

Subpackages and modules:

- :mod:`pvramp.ingest` - CSV time-series ingestion, alignment, statistics
- :mod:`pvramp.perf` - PV power/energy estimation and performance indices
- :mod:`pvramp.quality` - point-of-interconnection power-quality metrics
- :mod:`pvramp.feeder` - radial feeder model, power flow, device controls, QSTS
- :mod:`pvramp.reliability` - weather regressions and interruption forecasting
- :mod:`pvramp.cli` - batch front end over scenario config files
"""

__version__ = "0.1.0"
