"""Convex relaxations of AC optimal power flow: QC and its rotated variants."""

__version__ = "0.1.0"
