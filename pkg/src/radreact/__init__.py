"""Real-time 1D emitters with local radiation-reaction potentials."""

__version__ = "0.1.0"
