"""Numerical toolkit for L-omega-nonexpansive maps.

Moduli of continuity, sampled minimal moduli and certificates, extensions of
functions dominated by a modulus, a catalog of maps on (truncated) sequence
and function spaces, and fixed-point / minimal-displacement searches.
"""

__version__ = "0.1.0"
