"""Opponent-imitation-augmented multi-agent PPO."""

__version__ = "0.1.0"
