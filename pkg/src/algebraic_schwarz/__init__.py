"""Two-level additive Schwarz preconditioning built from matrix entries only, for sparse spd systems."""

__version__ = "0.1.0"
