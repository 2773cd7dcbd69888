"""Turn legacy codebases into traceable, confidence-scored specifications."""

__version__ = "0.1.0"
