"""Hot kernels with a numba route and a pure-numpy fallback.

``BACKEND`` names the active route. Scalar kernels are always available; the
path kernels come from :mod:`.loops` under numba and from :mod:`.vectorized`
otherwise.
"""

from ._jit import NUMBA_ENABLED
from .scalar import explicit_step, flp_value, flp_value_and_slope, lbem_step, positive_root

if NUMBA_ENABLED:
    from .loops import explicit_paths, lbem_paths

    BACKEND = "numba"
else:
    from .vectorized import explicit_paths, lbem_paths

    BACKEND = "numpy"

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "explicit_paths",
    "explicit_step",
    "flp_value",
    "flp_value_and_slope",
    "lbem_paths",
    "lbem_step",
    "positive_root",
]
