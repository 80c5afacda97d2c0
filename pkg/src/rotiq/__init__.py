"""Rotation-equivariant quantum image classifiers on a statevector simulator."""

__version__ = "0.1.0"
