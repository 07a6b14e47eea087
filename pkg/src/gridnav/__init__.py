"""Grid-code analysis and bandwidth-limited multi-agent maze search."""

__version__ = "0.1.0"
