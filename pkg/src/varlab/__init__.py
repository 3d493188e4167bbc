"""varlab: a numerical laboratory for 1-D variational problems whose
Lagrangians are merely continuous.

Subpackages cover: safe evaluation of the log-log-log special functions and
their envelopes (``special``), the inductive construction of the dense-set
singular minimizer and its weight (``construction``), piecewise-linear
trajectories (``trajectory``), the Lagrangian catalog (``lagrangian``),
quadrature-based energies with certified Jensen lower bounds (``energy``),
direct-method minimization (``solver``), and probe procedures for
approximation, blow-up and necessary-condition checks (``probes``).
"""

__version__ = "0.1.0"

from . import construction, energy, lagrangian, probes, solver, special, trajectory  # noqa: F401
from .logfloat import LogFloat, Offset  # noqa: F401
