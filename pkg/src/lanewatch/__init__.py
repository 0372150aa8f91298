"""Lane-wise traffic counting, flow and status estimation from detection streams."""

__version__ = "0.1.0"
