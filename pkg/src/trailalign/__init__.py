"""trailalign: simulation and evaluation toolkit for tracker-based
cross-site identity alignment."""

__version__ = "0.1.0"
