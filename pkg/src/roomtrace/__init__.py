"""Room-level visitor trajectories from BLE RSSI sighting logs."""

__version__ = "0.1.0"
