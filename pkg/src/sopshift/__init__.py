"""Cross-system event classification from polarization-intensity spectra."""

__version__ = "0.1.0"
