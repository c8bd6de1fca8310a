"""Backend switch.

Set ``LAMPERTI_DISABLE_NUMBA=1`` to run every kernel through the pure-numpy
path. The flag is read once, at import.
"""

import os

_FLAG = os.environ.get("LAMPERTI_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

NUMBA_ENABLED = False
if not _DISABLED:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover
        pass


def jit(fn=None, **options):
    """``numba.njit(cache=True, nogil=True, **options)`` or a no-op."""
    if fn is None:
        return lambda f: jit(f, **options)
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True, **options)(fn)
    return fn
