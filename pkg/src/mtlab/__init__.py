"""Verification lab for martingale-transform representations of Riesz and
Beurling-Ahlfors transforms on model manifolds."""

__version__ = "0.1.0"
