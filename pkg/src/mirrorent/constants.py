"""CODATA 2018 constants in SI units. Every module imports them from here."""

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C_LIGHT = 2.99792458e8  # m / s
