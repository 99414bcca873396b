"""Markov bases and conditional tests for regular fractional factorial designs."""

__version__ = "0.1.0"
