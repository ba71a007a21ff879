"""Square-wave describing-function analysis of Lur'e feedback systems."""

__version__ = "0.1.0"
