"""Hot numeric kernels with a selectable backend.

The numba path is used when numba imports cleanly. Setting the environment
variable ``UPLIFT_EVAL_BACKEND=numpy`` (read once, at import) forces the
pure-numpy fallback. Both backends expose the same four functions.
"""

import os

from . import _numpy

BACKEND_ENV = "UPLIFT_EVAL_BACKEND"


def _select():
    wanted = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if wanted not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numba":
        try:
            from . import _numba
        except ImportError:
            return "numpy", _numpy
        return "numba", _numba
    return "numpy", _numpy


BACKEND, _impl = _select()

build_tree = _impl.build_tree
predict_forest = _impl.predict_forest
knn_predict = _impl.knn_predict
segment_stats = _impl.segment_stats


def implementation(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy'), regardless of the active backend."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown backend {name!r}")


__all__ = ["BACKEND", "build_tree", "predict_forest", "knn_predict", "segment_stats", "implementation"]
