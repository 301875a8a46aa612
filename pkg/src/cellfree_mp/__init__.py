"""Max-min fair uplink power control for cell-free massive MIMO."""

__version__ = "0.1.0"
