"""CART trees, MDI importances and a population-level split oracle."""

__version__ = "0.1.0"
