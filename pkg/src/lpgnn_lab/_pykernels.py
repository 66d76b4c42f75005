"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must produce identical
outputs for identical inputs.
"""

import numpy as np
import scipy.sparse as sp


def encode_rows(probs, u_select, u_bern, m):
    """Multi-bit encode a batch of rows from pre-drawn uniforms.

    Parameters
    ----------
    probs : (n, d) float64
        Raw (unclamped) Bernoulli parameters.
    u_select : (n, d) float64
        Uniforms used to pick the sampled coordinates: the ``m`` smallest
        keys of each row, ties broken by column index.
    u_bern : (n, d) float64
        Uniforms for the Bernoulli draws; ``t = u < clamp(prob)``.
    m : int

    Returns
    -------
    out : (n, d) int8 in {-1, 0, +1}
    n_out_of_range : int
        Number of sampled coordinates whose raw parameter fell outside [0, 1].
    """
    probs = np.asarray(probs, dtype=np.float64)
    n, d = probs.shape
    order = np.argsort(u_select, axis=1, kind="stable")[:, :m]
    sampled = np.zeros((n, d), dtype=bool)
    np.put_along_axis(sampled, order, True, axis=1)

    clamped = np.clip(probs, 0.0, 1.0)
    bits = np.where(u_bern < clamped, 1, -1).astype(np.int8)
    out = np.where(sampled, bits, np.int8(0)).astype(np.int8)
    bad = sampled & ((probs < 0.0) | (probs > 1.0))
    return out, int(bad.sum())


def _closed_operator(indptr, indices):
    n = len(indptr) - 1
    counts = np.diff(indptr)
    rows = np.repeat(np.arange(n), counts)
    # A + I with the diagonal merged into sorted column position
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([np.asarray(indices, dtype=np.int64), np.arange(n)])
    order = np.lexsort((cols, rows))
    ptr = np.concatenate([[0], np.cumsum(counts + 1)])
    op = sp.csr_matrix(
        (np.ones(len(cols)), cols[order], ptr), shape=(n, n)
    )
    op.has_sorted_indices = True
    return op, (counts + 1).astype(np.float64)


def mean_aggregate(indptr, indices, x):
    """One step of self-inclusive neighbourhood mean over a CSR graph.

    ``y[v] = (x[v] + sum(x[u] for u in N(v))) / (deg(v) + 1)``, summed in
    ascending node order with ``v`` inserted at its sorted position.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    op, sizes = _closed_operator(indptr, indices)
    return (op @ x) / sizes[:, None]


def closed_neighborhood_mean(indptr, indices, x, targets):
    """Self-inclusive neighbourhood mean evaluated only at ``targets``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    y = np.empty((len(targets), x.shape[1]))
    for row, v in enumerate(targets):
        nbrs = np.asarray(indices[indptr[v]:indptr[v + 1]], dtype=np.int64)
        pos = np.searchsorted(nbrs, v)
        cols = np.concatenate([nbrs[:pos], [v], nbrs[pos:]])
        acc = np.zeros(x.shape[1])
        for u in cols:
            acc += x[u]
        y[row] = acc / len(cols)
    return y
