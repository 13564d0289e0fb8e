"""Shared test helpers: seeded random graphs and a canonical problem."""

import numpy as np

from balancelab.flux import FluxCurve
from balancelab.monotone import MonotoneGraph
from balancelab.problem import ProblemSpec, SourceSpec


def canonical_spec(**kw):
    """Burgers flux, identity nonlinearity, smooth bump datum, no source."""
    defaults = dict(
        x_lo=-2.0,
        x_hi=2.0,
        T=0.5,
        theta_graph=MonotoneGraph.identity(),
        coeff={"kind": "const"},
        flux=FluxCurve.from_function(lambda v: 0.5 * v * v, -4.0, 4.0),
        source=SourceSpec("zero"),
        u0={"id": "bump", "params": {"height": 1.0, "a": -1.0, "b": 1.0}},
        j=16,
        ell=1.0,
        m=1.0,
        sample_radius=2.0,
    )
    defaults.update(kw)
    return ProblemSpec(**defaults)


def _interval_at_zero(b, jumps, slopes, tails):
    """Value interval of the raw piecewise data at u = 0 (pre-validation)."""
    K = len(b)
    if K == 0:
        return 0.0, 0.0
    i = int(np.searchsorted(b, 0.0, side="left"))
    if i < K and b[i] == 0.0:
        return jumps[i][0], jumps[i][1]
    if i == 0:
        v = jumps[0][0] + tails[0] * (0.0 - b[0])
        return v, v
    if i == K:
        v = jumps[K - 1][1] + tails[1] * (0.0 - b[K - 1])
        return v, v
    v = jumps[i - 1][1] + slopes[i - 1] * (0.0 - b[i - 1])
    return v, v


def random_monotone_graph(rng, max_breaks=3):
    """Draw a random maximal monotone graph containing (0, 0).

    Mixes flat and sloped pieces, degenerate and genuine jumps, and
    breakpoints placed exactly at 0 so every resolvent branch gets hit.
    """
    K = int(rng.integers(0, max_breaks + 1))
    if K == 0:
        s = float(rng.uniform(0.0, 3.0)) if rng.random() < 0.8 else 0.0
        return MonotoneGraph.line(s)
    b = np.sort(rng.uniform(-3.0, 3.0, size=K))
    while K > 1 and np.diff(b).min() < 0.1:
        b = np.sort(rng.uniform(-3.0, 3.0, size=K))
    if rng.random() < 0.3:
        b[rng.integers(0, K)] = 0.0
        b = np.sort(b)
        if K > 1 and np.diff(b).min() < 1e-12:
            b = np.unique(b)
            K = len(b)
    slopes = np.where(rng.random(max(K - 1, 0)) < 0.25, 0.0, rng.uniform(0.0, 3.0, max(K - 1, 0)))
    heights = np.where(rng.random(K) < 0.4, 0.0, rng.uniform(0.0, 2.0, K))
    tails = tuple(np.where(rng.random(2) < 0.25, 0.0, rng.uniform(0.0, 3.0, 2)).tolist())
    # chain the values left to right, then shift so the graph passes through 0
    jumps = np.empty((K, 2))
    v = 0.0
    for i in range(K):
        jumps[i, 0] = v
        v += heights[i]
        jumps[i, 1] = v
        if i + 1 < K:
            v += slopes[i] * (b[i + 1] - b[i])
    lo0, hi0 = _interval_at_zero(b, jumps, slopes, tails)
    offset = lo0 + rng.random() * (hi0 - lo0)
    jumps -= offset
    return MonotoneGraph(b, jumps, slopes, tails)
