"""Self-supervised crash-avoidance navigation in a 2.5D indoor simulator."""

__version__ = "0.1.0"
