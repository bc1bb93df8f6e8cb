"""Capacity and capacity-achieving input distributions for IM-DD optical channels."""

__version__ = "0.1.0"
