"""Numerical Randers-Finsler spacetime geometry with electromagnetic coupling.

Modules: ``adnum`` (truncated Taylor jets), ``exprlang`` (expression
language), ``background`` (metric, potential, current), ``randers``
(Finsler function and fundamental tensor), ``spray`` (geodesic spray,
Berwald test, geodesics), ``curvature`` (connections, curvature, Einstein
tensor), ``maxwell`` (effective fields and residuals), ``cli``.
"""

__version__ = "0.1.0"
