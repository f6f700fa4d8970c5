"""Controllability toolkit for impulsive neutral stochastic equations driven by fBm."""
