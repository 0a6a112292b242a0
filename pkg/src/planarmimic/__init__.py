"""Physics-based planar character imitation with PPO."""

__version__ = "0.1.0"
