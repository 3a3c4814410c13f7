"""Layer tables for a 256-layer ziggurat normal sampler.

Layer 0 is the base strip (rectangle plus Gaussian tail beyond R); layers
1..255 are equal-area rectangles. ``X[i]`` is the right edge of layer i and
``RATIO[i] = X[i+1] / X[i]`` the fast-accept threshold for ``|u|``.
Both kernel backends read these same tables.
"""
import math

import numpy as np

N_LAYERS = 256
R = 3.6541528853610088
V = 0.00492867323399


def _tables():
    x = [0.0] * (N_LAYERS + 1)
    f = math.exp(-0.5 * R * R)
    x[0] = V / f
    x[1] = R
    for i in range(2, N_LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    x[N_LAYERS] = 0.0
    ratio = [x[i + 1] / x[i] for i in range(N_LAYERS)]
    return np.array(x), np.array(ratio)


X, RATIO = _tables()
