import numpy as np


def simpson_cumulative(nodes, f_nodes, f_mids):
    """Running composite-Simpson integral on an arbitrary monotone lattice.

    Each interval ``[nodes[k], nodes[k+1]]`` is integrated with Simpson's
    rule using the node values and the midpoint value ``f_mids[k]``.
    Returns the integral from ``nodes[0]`` to every node (first entry 0).
    Trailing axes of ``f_nodes``/``f_mids`` are integrated independently.
    """
    nodes = np.asarray(nodes, dtype=float)
    f_nodes = np.asarray(f_nodes)
    f_mids = np.asarray(f_mids)
    h = np.diff(nodes).reshape((-1,) + (1,) * (f_nodes.ndim - 1))
    pieces = h / 6.0 * (f_nodes[:-1] + 4.0 * f_mids + f_nodes[1:])
    out = np.zeros((nodes.shape[0],) + pieces.shape[1:], dtype=pieces.dtype)
    np.cumsum(pieces, axis=0, out=out[1:])
    return out


def midpoints(nodes):
    nodes = np.asarray(nodes, dtype=float)
    return 0.5 * (nodes[:-1] + nodes[1:])
