"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` signature for signature and are used when the
compiled extension is not importable (or when ``NEIGHBOURTEXT_KERNELS=python``).
"""
from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_KM = 6371.0
DEG2RAD = math.pi / 180.0


def haversine_matrix(lat_a, lon_a, lat_b, lon_b):
    """Great-circle distances (km) between every point of ``a`` and every point of ``b``."""
    la = np.asarray(lat_a, dtype=np.float64)[:, None] * DEG2RAD
    lo_a = np.asarray(lon_a, dtype=np.float64)[:, None] * DEG2RAD
    lb = np.asarray(lat_b, dtype=np.float64)[None, :] * DEG2RAD
    lo_b = np.asarray(lon_b, dtype=np.float64)[None, :] * DEG2RAD
    s_lat = np.sin((lb - la) * 0.5)
    s_lon = np.sin((lo_b - lo_a) * 0.5)
    h = s_lat * s_lat + np.cos(la) * np.cos(lb) * (s_lon * s_lon)
    np.minimum(h, 1.0, out=h)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))


def nearest_within(lat_p, lon_p, lat_c, lon_c, max_km, tie_km):
    """Index of the closest centre for each point, or -1 if none is within ``max_km``.

    Centres closer than ``tie_km`` to the minimum count as tied; the lowest
    index among tied centres wins, so callers pass centres sorted by id.
    """
    n_p = len(lat_p)
    out = np.full(n_p, -1, dtype=np.int64)
    if n_p == 0 or len(lat_c) == 0:
        return out
    # chunk to bound memory on large point sets
    step = max(1, 2_000_000 // max(1, len(lat_c)))
    for start in range(0, n_p, step):
        stop = min(n_p, start + step)
        d = haversine_matrix(lat_p[start:stop], lon_p[start:stop], lat_c, lon_c)
        dmin = d.min(axis=1)
        tied = d <= (dmin + tie_km)[:, None]
        first = np.argmax(tied, axis=1)
        ok = dmin <= max_km
        out[start:stop] = np.where(ok, first, -1)
    return out


def cd_solve(X, y, l1, l2, tol, max_iter, theta, trace):
    """Cyclic coordinate descent for the elastic-net least-squares objective.

    Minimises ``(1/N)||y - X theta||^2 + l1*|theta|_1 + l2*|theta|_2^2`` in place
    on ``theta``.  ``X`` and ``y`` are expected to be centred.  The objective
    after each full sweep is written to ``trace``.

    Returns
    -------
    (sweeps, converged)
    """
    n, p = X.shape
    inv_n2 = 2.0 / n
    a = inv_n2 * np.einsum("ij,ij->j", X, X)
    r = y - X @ theta
    cols = [X[:, j] for j in range(p)]
    active = [j for j in range(p) if a[j] > 0.0]
    for j in range(p):
        if a[j] <= 0.0 and theta[j] != 0.0:
            theta[j] = 0.0
    sweeps = 0
    converged = False
    while sweeps < max_iter:
        max_delta = 0.0
        for j in active:
            xj = cols[j]
            old = theta[j]
            c = inv_n2 * float(xj @ r) + a[j] * old
            if c > l1:
                new = (c - l1) / (a[j] + 2.0 * l2)
            elif c < -l1:
                new = (c + l1) / (a[j] + 2.0 * l2)
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                r -= delta * xj
                theta[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        trace[sweeps] = (
            float(r @ r) / n + l1 * float(np.abs(theta).sum()) + l2 * float(theta @ theta)
        )
        sweeps += 1
        if max_delta < tol:
            converged = True
            break
    return sweeps, converged
