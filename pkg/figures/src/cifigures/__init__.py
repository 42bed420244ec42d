"""Publication-style batch rendering of simulator CSV outputs."""

__version__ = "0.1.0"
