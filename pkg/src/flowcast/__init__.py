"""Multi-station 120-hour streamflow forecasting toolkit."""

__version__ = "0.1.0"
