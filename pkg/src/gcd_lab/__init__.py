"""gcd-lab - grammar-constrained decoding laboratory."""

__version__ = "0.3.0"
