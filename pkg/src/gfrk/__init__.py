"""Linear high-order energy-stable Runge-Kutta schemes for gradient flows."""

__version__ = "0.1.0"
