"""Pure numpy trajectory scanners for coverage simulations.

Each scanner reports the first time a running sup-distance statistic crosses
a per-step boundary, or 0 if it never does.  A full per-step evaluation costs
O(T^2) over a trajectory, so the scanners screen in blocks: the statistic
after w more points can exceed its checkpoint value by at most w/t per
stream, and one checkpoint evaluation certifies the whole block whenever
that envelope stays below the smallest boundary value inside it.  Blocks
where the envelope reaches the boundary are rescanned exactly, so the
result matches the naive scan bit for bit.
"""

import numpy as np

BACKEND = "python"

_BLOCK = 64


def _ks_one(sorted_u: np.ndarray) -> float:
    """Sup distance between the empirical CDF of sorted values and Uniform(0,1)."""
    t = sorted_u.size
    grid = np.arange(1, t + 1, dtype=np.float64)
    hi = np.max(np.abs(grid / t - sorted_u))
    lo = np.max(np.abs((grid - 1) / t - sorted_u))
    return float(max(hi, lo))


def _ks_two(xs: np.ndarray, ys: np.ndarray) -> float:
    """Sup distance between two empirical CDFs; both inputs sorted."""
    grid = np.concatenate([xs, ys])
    fx = np.searchsorted(xs, grid, side="right") / xs.size
    fy = np.searchsorted(ys, grid, side="right") / ys.size
    return float(np.max(np.abs(fx - fy)))


def ks1_first_crossing(u: np.ndarray, gamma: np.ndarray, block: int = _BLOCK) -> int:
    """First t (1-based) with sup-distance of u[:t] above gamma[t-1], else 0.

    u holds probability-integral-transformed observations, so the reference
    CDF is the identity on [0, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    g = np.asarray(gamma, dtype=np.float64)
    t_max = u.size
    if g.size != t_max:
        raise ValueError("gamma must have one entry per observation")
    # the statistic never exceeds 1, so boundary values >= 1 cannot be hit
    feasible = np.nonzero(g < 1.0)[0]
    if feasible.size == 0:
        return 0
    start = int(feasible[0]) + 1
    a = start - 1
    sorted_prefix = np.sort(u[:a])
    ks_a = _ks_one(sorted_prefix) if a else 0.0
    while a < t_max:
        b = min(t_max, a + block)
        if a:
            # pad by well over one ulp so float rounding of the envelope
            # can never certify a block that actually crosses
            env = (a * ks_a + (b - a)) / b + 1e-12
        else:
            env = 2.0
        if env <= np.min(g[a:b]):
            sorted_prefix = np.sort(u[:b])
            ks_a = _ks_one(sorted_prefix)
            a = b
            continue
        for t in range(a + 1, b + 1):
            idx = np.searchsorted(sorted_prefix, u[t - 1])
            sorted_prefix = np.insert(sorted_prefix, idx, u[t - 1])
            ks_a = _ks_one(sorted_prefix)
            if ks_a > g[t - 1]:
                return t
        a = b
    return 0


def ks2_first_crossing(
    xu: np.ndarray, yu: np.ndarray, gamma: np.ndarray, block: int = _BLOCK
) -> int:
    """First step (1-based) with the two-sample sup-distance above gamma.

    Streams alternate starting with x: step i pushes x[(i-1)//2] when i is
    odd and y[i//2-1] when i is even, giving t = ceil(i/2), s = floor(i/2).
    gamma has one entry per step; steps with an empty stream are never
    checked.  Returns 0 when no step crosses.
    """
    xu = np.asarray(xu, dtype=np.float64)
    yu = np.asarray(yu, dtype=np.float64)
    g = np.asarray(gamma, dtype=np.float64)
    if xu.size - yu.size not in (0, 1):
        raise ValueError("alternation requires len(x) in {len(y), len(y)+1}")
    n = xu.size + yu.size
    if g.size != n:
        raise ValueError("gamma must have one entry per step")

    def tally(step):
        return (step + 1) // 2, step // 2

    feasible = np.nonzero(g < 1.0)[0]
    start = int(feasible[0]) + 1 if feasible.size else n + 1
    start = max(start, 2)
    if start > n:
        return 0
    a = start - 1
    ta, sa = tally(a)
    sx = np.sort(xu[:ta])
    sy = np.sort(yu[:sa])
    ks_a = _ks_two(sx, sy) if (ta and sa) else 0.0
    while a < n:
        b = min(n, a + block)
        tb, sb = tally(b)
        if ta and sa:
            env = ks_a + (tb - ta) / tb + (sb - sa) / max(sb, 1) + 1e-12
        else:
            env = 2.0
        if env <= np.min(g[a:b]):
            sx, sy = np.sort(xu[:tb]), np.sort(yu[:sb])
            ks_a = _ks_two(sx, sy) if (tb and sb) else 0.0
            a, ta, sa = b, tb, sb
            continue
        for step in range(a + 1, b + 1):
            tt, ss = tally(step)
            if tt > ta:
                idx = np.searchsorted(sx, xu[tt - 1])
                sx = np.insert(sx, idx, xu[tt - 1])
            else:
                idx = np.searchsorted(sy, yu[ss - 1])
                sy = np.insert(sy, idx, yu[ss - 1])
            ta, sa = tt, ss
            if ta and sa:
                ks_a = _ks_two(sx, sy)
                if ks_a > g[step - 1]:
                    return step
        a = b
    return 0
