"""Interactive movie maps from omnidirectional street-video trajectories."""

__version__ = "0.1.0"
