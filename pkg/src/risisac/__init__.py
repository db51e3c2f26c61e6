"""RIS-aided integrated sensing and communication simulator."""

__version__ = "0.1.0"
