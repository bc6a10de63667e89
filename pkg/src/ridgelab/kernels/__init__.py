"""Hot numeric kernels with a numba path and a pure-numpy path.

The active backend is chosen by ``RIDGELAB_NUMBA`` (see ``ridgelab._accel``).
Both implementations stay importable so they can be compared directly.
"""
from .._accel import USE_NUMBA
from . import _numpy as numpy_backend

if USE_NUMBA:
    from . import _numba as numba_backend

    active = numba_backend
else:
    numba_backend = None
    active = numpy_backend

link_eval = active.link_eval
abs_diff_grid = active.abs_diff_grid
gaht_inner_mins = active.gaht_inner_mins
feasibility_search = active.feasibility_search
integrate_rate = active.integrate_rate

__all__ = [
    "active",
    "numpy_backend",
    "numba_backend",
    "link_eval",
    "abs_diff_grid",
    "gaht_inner_mins",
    "feasibility_search",
    "integrate_rate",
]
