"""Helpers shared by several test modules."""
import numpy as np

from motif import surrogate
from motif.surrogate import Normalizer


def finite_difference_check(model, x, y, h=1e-4):
    """Max elementwise relative error between backprop and central differences."""
    _, g = surrogate.gradients(model, x, y)
    worst = 0.0
    for p, gp in zip(model.params(), g.flat()):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = surrogate.gradients(model, x, y)
            p[idx] = old - h
            down, _ = surrogate.gradients(model, x, y)
            p[idx] = old
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(gp[idx]), 1e-6)
            worst = max(worst, abs(fd - gp[idx]) / denom)
    return worst


def random_model(rng, spec, seed=0):
    x = rng.normal(size=(40, spec.input_dim))
    y = rng.normal(size=(40, spec.output_dim))
    norm = Normalizer.fit(x, y, spec.output_dim // 12)
    return surrogate.init_model(spec, seed, norm), x, y
