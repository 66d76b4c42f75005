"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
versions are used. Set ``LPGNN_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("LPGNN_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def backends():
    """Return the available kernel modules keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def encode_rows(probs, u_select, u_bern, m, impl=None):
    impl = impl or _impl
    return impl.encode_rows(
        np.ascontiguousarray(probs, dtype=np.float64),
        np.ascontiguousarray(u_select, dtype=np.float64),
        np.ascontiguousarray(u_bern, dtype=np.float64),
        int(m),
    )


def mean_aggregate(indptr, indices, x, impl=None):
    impl = impl or _impl
    return impl.mean_aggregate(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int32),
        np.ascontiguousarray(x, dtype=np.float64),
    )


def closed_neighborhood_mean(indptr, indices, x, targets, impl=None):
    impl = impl or _impl
    return impl.closed_neighborhood_mean(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int32),
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(targets, dtype=np.int64),
    )
