"""Numerical laboratory for fractional dissipative active scalars.

Moduli of continuity and their certificates, a periodic pseudospectral
solver, time splitting with the fractional heat kernel, the supercritical
Burgers barrier construction, CCF diagnostics and rough-data decay.
"""
__version__ = "0.1.0"
