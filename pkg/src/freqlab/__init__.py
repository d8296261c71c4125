"""Numerical frequency functions, three-ball inequalities and vanishing orders."""

__version__ = "0.1.0"
