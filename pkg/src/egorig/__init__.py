"""Body-worn sensor rig simulation and pose-evaluation toolkit."""

__version__ = "0.1.0"
