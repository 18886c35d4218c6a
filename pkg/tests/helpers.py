"""Random band-limited inputs shared by the property tests."""
import numpy as np

from gauduchon.grid import GridFunction, GridShape
from gauduchon.metric import HermitianMetric

POINTS = 24


def shape_on(dims, n=3, points=POINTS):
    return GridShape.active(n, {d: points for d in dims})


def trig(shape, coeffs):
    """sum of a cos(k.x) + b sin(k.x) over all k in {-1,0,1}^dims with k > 0 lexicographically."""
    X = shape.coordinates()
    dims = shape.active_dims
    out = np.zeros(shape.sizes)
    modes = []
    for idx in np.ndindex(*(3,) * len(dims)):
        k = [i - 1 for i in idx]
        nz = [v for v in k if v != 0]
        if nz and nz[0] > 0:
            modes.append(k)
    coeffs = list(coeffs) + [0.0] * (2 * len(modes) - len(coeffs))
    for m, k in enumerate(modes):
        arg = sum(kk * X[d] for kk, d in zip(k, dims))
        out = out + coeffs[2 * m] * np.cos(arg) + coeffs[2 * m + 1] * np.sin(arg)
    return GridFunction(shape, out)


def n_modes(ndims):
    return 2 * ((3 ** ndims - 1) // 2)


def random_metric(rng, dims=(0, 4), n=3, amp=0.3, diagonal=False, points=POINTS):
    """I + band-limited hermitian perturbation, positive definite by construction."""
    shape = shape_on(dims, n, points)
    m = n_modes(len(dims))

    def field(scale):
        return trig(shape, scale * rng.uniform(-1, 1, m) / m)

    entries = {}
    for i in range(1, n + 1):
        entries[(i, i)] = field(amp) + 1.0
        if not diagonal:
            for j in range(i + 1, n + 1):
                entries[(i, j)] = field(amp / n) + 1j * field(amp / n)
    return HermitianMetric.from_matrix(n, entries)


def random_field(rng, dims=(0, 4), n=3, amp=0.3, points=POINTS):
    shape = shape_on(dims, n, points)
    m = n_modes(len(dims))
    return trig(shape, amp * rng.uniform(-1, 1, m) / np.sqrt(m))
