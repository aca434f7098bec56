"""Uniform-grid interpolation used in the solver's inner loop.

scipy splines are too slow to rebuild per Picard sweep, and the sweep only
ever needs values of one grid row at many fractional index positions, so a
vectorized Catmull-Rom stencil (linear inside the first and last cell) is
used instead.
"""

import numpy as np


def interp_uniform(values, pos):
    """Interpolate 1-D nodal values at fractional index positions.

    values: (n,) samples on the integer grid 0..n-1.
    pos: array of positions in index units; any shape.  Positions may
         overshoot the grid by at most `1e-6` cells (clamped), larger
         overshoots raise ValueError.
    Cubic (Catmull-Rom) where the four-point stencil fits, linear in the
    two edge cells; exactly reproduces nodal values at integer positions.
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    pos = np.asarray(pos, dtype=float)
    shape = pos.shape
    pos = np.atleast_1d(pos)
    if pos.size and (pos.min() < -1e-6 or pos.max() > n - 1.0 + 1e-6):
        raise ValueError(
            "interpolation position outside grid: [%g, %g] vs [0, %d]"
            % (pos.min(), pos.max(), n - 1))
    pos = np.clip(pos, 0.0, n - 1.0)
    k = np.floor(pos).astype(np.int64)
    np.clip(k, 0, n - 2, out=k)
    s = pos - k

    out = v[k] * (1.0 - s) + v[k + 1] * s
    inner = (k >= 1) & (k <= n - 3)
    if np.any(inner):
        ki = k[inner]
        si = s[inner]
        vm = v[ki - 1]
        v0 = v[ki]
        v1 = v[ki + 1]
        v2 = v[ki + 2]
        out[inner] = (
            v0
            + 0.5 * si * (v1 - vm)
            + si * si * (vm - 2.5 * v0 + 2.0 * v1 - 0.5 * v2)
            + si * si * si * (1.5 * (v0 - v1) + 0.5 * (v2 - vm)))
    return out.reshape(shape)
