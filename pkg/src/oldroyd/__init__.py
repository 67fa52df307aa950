"""Pseudospectral solver and Littlewood-Paley toolkit for the incompressible
Hookean viscoelastic system on the periodic box [0, 2*pi)^N, N = 2, 3.

The unknowns are a divergence-free velocity ``v`` and the strain ``E = F - I``.
Fields are stored as complex Fourier coefficient arrays whose trailing axes
are the grid axes and whose leading axes index components.
"""

from oldroyd.spectral import Grid, get_grid

__all__ = ["Grid", "get_grid"]
__version__ = "0.1.0"
