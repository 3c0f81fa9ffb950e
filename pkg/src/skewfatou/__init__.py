"""Numerical experiments for polynomial skew-products ``F(z, w) = (f(z, w), lam*w)``."""

__version__ = "0.1.0"
