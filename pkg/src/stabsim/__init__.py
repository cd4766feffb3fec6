"""stabsim: noise-stability laboratory for analog and digital quantum simulation."""

__version__ = "0.1.0"
