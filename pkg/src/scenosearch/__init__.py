"""Search-based safety testing for driving agents on an embedded 2-D simulator."""

__version__ = "0.1.0"
