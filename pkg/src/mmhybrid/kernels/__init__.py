"""Hot loops of the association fixed point.

The numba implementation is used by default.  Set ``MMHYBRID_BACKEND=numpy``
to force the pure-numpy path (also used when numba cannot be imported).
"""
import importlib
import os

_REQUESTED = os.environ.get("MMHYBRID_BACKEND", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ImportError(f"MMHYBRID_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")


def load_backend(name: str):
    return importlib.import_module(f"{__name__}._{name}")


try:
    impl = load_backend(_REQUESTED)
except ImportError:
    impl = load_backend("numpy")

BACKEND = impl.__name__.rsplit("_", 1)[-1]

coupling = impl.coupling
detach = impl.detach
attach = impl.attach
candidate_rates = impl.candidate_rates
best_move = impl.best_move
run_steps = impl.run_steps
