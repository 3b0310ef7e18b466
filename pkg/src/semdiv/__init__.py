"""Toolkit for synthesizing, scoring, and evaluating cross-lingual semantic divergences."""

__version__ = "0.1.0"
