"""Dynamical optimal transport on periodic graphs and its homogenised limit."""
