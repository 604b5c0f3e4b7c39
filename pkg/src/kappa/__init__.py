"""Numeric curvature invariants of immersed Riemannian charts."""

__version__ = "0.1.0"

from .geometry import ImmersionChart, MetricChart, NestedChart  # noqa: F401
