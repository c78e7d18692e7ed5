"""privpolar - privacy-constrained lossy source coding with q-ary polar codes."""

__version__ = "0.1.0"
