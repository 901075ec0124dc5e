"""Stage-aware fuzzing of a reference tensor compiler."""

__version__ = "0.1.0"
