"""Finite-element laboratory for nonuniformly elliptic variational problems.

Submodules are imported explicitly (``from elliptlab import solver``) so that
the CLI can cap thread pools before numpy loads.
"""

__version__ = "0.1.0"
