"""Forward and inverse spectral computations for the perturbed Bessel operator

    -f'' + l (l + 1) x**-2 f + q f   on (0, 1).
"""

__version__ = "0.1.0"
