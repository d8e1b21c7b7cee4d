"""Keyframe-driven quadrotor trajectory design and verification."""

__version__ = "0.1.0"
