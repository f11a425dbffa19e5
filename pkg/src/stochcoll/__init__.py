"""Collision prediction and avoidance for stochastic multi-agent trajectories."""

__version__ = "0.1.0"
