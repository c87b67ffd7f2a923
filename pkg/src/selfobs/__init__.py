"""Linear versus self-observing quantum evolution, made numerically checkable."""

__version__ = "0.1.0"
