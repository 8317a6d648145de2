"""Composite Gauss-Legendre rules on graded meshes."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_panels(breaks, n: int = 16):
    """Nodes and weights of an n-point Gauss-Legendre rule on each [b_i, b_{i+1}]."""
    b = np.asarray(breaks, dtype=float)
    x, w = _gl(n)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def graded_breaks(a: float, b: float, levels: int = 30, ratio: float = 0.5, both: bool = False):
    """Breakpoints on [a, b] refined geometrically toward a (and toward b if ``both``).

    The panel adjacent to the refined end has width ratio**levels times the
    interval (or half-interval) length.
    """
    if both:
        m = 0.5 * (a + b)
        left = graded_breaks(a, m, levels, ratio)
        right = b - graded_breaks(0.0, b - m, levels, ratio)[::-1]
        return np.concatenate([left, right[1:]])
    L = b - a
    k = np.arange(levels, -1, -1)
    inner = a + L * ratio ** k
    return np.concatenate([[a], inner])


def graded_rule(a: float, b: float, n: int = 16, levels: int = 30, both: bool = False):
    return gl_panels(graded_breaks(a, b, levels, 0.5, both), n)
