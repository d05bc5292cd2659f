"""Symmetry analysis of critical points in teacher-student ReLU networks."""

__version__ = "0.1.0"
