"""Energy-conservative solutions of quasilinear variational wave equations.

The pipeline: coefficient fields (coeffs) and initial data (initdata) define a
data curve in characteristic coordinates; the lattice solver (goursat)
integrates the equivalent semilinear system; the physical map (physmap)
extracts time slices and samples u(t, x); diagnostics quantify conservation,
interaction potential and concentration; chartrace follows single
characteristics; fdoracle is an independent finite-difference cross-check.
"""

from . import coeffs, initdata, goursat, physmap, diagnostics, chartrace, fdoracle
from .errors import VarwaveError

__all__ = [
    "coeffs", "initdata", "goursat", "physmap", "diagnostics",
    "chartrace", "fdoracle", "VarwaveError",
]

__version__ = "0.1.0"
