"""
Generalized distance transform used as the message of the tree DP.

For every parent cell p the message is

    max over q of  child[q] + a dx^2 + b dy^2 + c dx + d dy,
    (dx, dy) = q - p - anchor

computed separably, one O(n) lower-envelope pass per row and per column.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from numba import njit

from models.exceptions import ParameterError, PreconditionError
from models.part_model import DeformationParams, deformation_term

logger = logging.getLogger(__name__)


@njit(cache=True)
def _dt_rows(values, quad, lin, shift, n_out):
    """
    Row-wise 1-D transform: out[r, p] = max_q values[r, q] + quad (q - s)^2
    + lin (q - s) with s = p + shift. quad must be negative. Ties keep the
    smallest q.
    """
    n_rows, n_in = values.shape
    out = np.empty((n_rows, n_out))
    arg = np.empty((n_rows, n_out), dtype=np.int64)
    hull = np.empty(n_in, dtype=np.int64)
    bounds = np.empty(n_in + 1)
    alpha = -quad
    for r in range(n_rows):
        f = values[r]
        k = 0
        hull[0] = 0
        bounds[0] = -np.inf
        bounds[1] = np.inf
        for q in range(1, n_in):
            p0 = hull[k]
            s = (p0 + q) / 2.0 + ((f[p0] - f[q]) / (q - p0) - lin) \
                / (2.0 * alpha)
            while s <= bounds[k]:
                k -= 1
                p0 = hull[k]
                s = (p0 + q) / 2.0 + ((f[p0] - f[q]) / (q - p0) - lin) \
                    / (2.0 * alpha)
            k += 1
            hull[k] = q
            bounds[k] = s
            bounds[k + 1] = np.inf
        k = 0
        for p in range(n_out):
            s = p + shift
            while bounds[k + 1] < s:
                k += 1
            q = hull[k]
            dx = q - s
            out[r, p] = f[q] + quad * dx * dx + lin * dx
            arg[r, p] = q
    return out, arg


def distance_transform_message(child_map: np.ndarray,
                               params: DeformationParams,
                               anchor: Tuple[int, int],
                               out_shape: Optional[Tuple[int, int]] = None) \
        -> Tuple[np.ndarray, np.ndarray]:
    """
    :param child_map: (h, w) scores of the child subtree at each placement
    :param anchor: (ax, ay) expected child offset from the parent
    :param out_shape: (h, w) of the parent placement domain, defaults to the
    child's
    :return: (max_map, argmax) where argmax[y, x] = (qx, qy)
    """
    if not params.is_concave():
        raise ParameterError(f"deformation {params} is not concave, the "
                             f"message is unbounded")
    child = np.ascontiguousarray(child_map, dtype=np.float64)
    if child.ndim != 2 or child.size == 0:
        raise PreconditionError("child map must be a non-empty 2-D array")
    out_h, out_w = out_shape if out_shape is not None else child.shape
    ax, ay = anchor

    rows, arg_x = _dt_rows(child, float(params.a), float(params.c),
                           int(ax), int(out_w))
    columns, arg_y = _dt_rows(np.ascontiguousarray(rows.T), float(params.b),
                              float(params.d), int(ay), int(out_h))
    qy = arg_y.T
    px = np.broadcast_to(np.arange(out_w), (out_h, out_w))
    py = np.broadcast_to(np.arange(out_h)[:, np.newaxis], (out_h, out_w))
    qx = arg_x[qy, px]
    # re-evaluate at the argmax so the value is the exact configuration term
    max_map = child[qy, qx] + deformation_term(params, qx - px - ax,
                                               qy - py - ay)
    argmax = np.stack([qx, qy], axis=-1)
    return max_map, argmax
