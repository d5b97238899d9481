"""Phase-level MapReduce performance models, profiler and cluster simulator."""

__version__ = "0.1.0"
