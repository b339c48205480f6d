"""Occupancy detection and people counting from BLE RSSI time series.

The package covers the full offline workflow: labeled RSSI ingestion,
synthetic scenario generation, windowed feature extraction, robust
normalization, tree-based feature selection, grid-searched model training,
and hold-out / k-fold evaluation.
"""

__version__ = "0.1.0"
