# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: haversine distance matrices and elastic-net coordinate descent."""
import numpy as np

from libc.math cimport sin, cos, asin, sqrt, fabs, M_PI

cdef double EARTH_RADIUS_KM = 6371.0
cdef double DEG2RAD = M_PI / 180.0


cdef inline double _hav(double la1, double lo1, double la2, double lo2) noexcept nogil:
    cdef double s_lat = sin((la2 - la1) * 0.5)
    cdef double s_lon = sin((lo2 - lo1) * 0.5)
    cdef double h = s_lat * s_lat + cos(la1) * cos(la2) * (s_lon * s_lon)
    if h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_KM * asin(sqrt(h))


def haversine_matrix(lat_a, lon_a, lat_b, lon_b):
    cdef double[::1] la = np.ascontiguousarray(lat_a, dtype=np.float64) * DEG2RAD
    cdef double[::1] loa = np.ascontiguousarray(lon_a, dtype=np.float64) * DEG2RAD
    cdef double[::1] lb = np.ascontiguousarray(lat_b, dtype=np.float64) * DEG2RAD
    cdef double[::1] lob = np.ascontiguousarray(lon_b, dtype=np.float64) * DEG2RAD
    cdef Py_ssize_t na = la.shape[0], nb = lb.shape[0], i, j
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] d = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                d[i, j] = _hav(la[i], loa[i], lb[j], lob[j])
    return out


cdef inline double _hav_h(double la1, double cla1, double lo1, double la2, double cla2, double lo2) noexcept nogil:
    # same arithmetic as _hav up to the asin/sqrt, with cosines precomputed
    cdef double s_lat = sin((la2 - la1) * 0.5)
    cdef double s_lon = sin((lo2 - lo1) * 0.5)
    cdef double h = s_lat * s_lat + cla1 * cla2 * (s_lon * s_lon)
    if h > 1.0:
        h = 1.0
    return h


def nearest_within(lat_p, lon_p, lat_c, lon_c, double max_km, double tie_km):
    cdef double[::1] lp = np.ascontiguousarray(lat_p, dtype=np.float64) * DEG2RAD
    cdef double[::1] lop = np.ascontiguousarray(lon_p, dtype=np.float64) * DEG2RAD
    cdef double[::1] lc = np.ascontiguousarray(lat_c, dtype=np.float64) * DEG2RAD
    cdef double[::1] loc = np.ascontiguousarray(lon_c, dtype=np.float64) * DEG2RAD
    cdef double[::1] cp = np.cos(np.asarray(lp))
    cdef double[::1] cc = np.cos(np.asarray(lc))
    cdef Py_ssize_t n_p = lp.shape[0], n_c = lc.shape[0], i, j
    out = np.full(n_p, -1, dtype=np.int64)
    cdef long long[::1] res = out
    cdef double[::1] row
    cdef double hmin, dmin, hcut, half
    if n_p == 0 or n_c == 0:
        return out
    buf = np.empty(n_c, dtype=np.float64)
    row = buf
    with nogil:
        for i in range(n_p):
            hmin = 2.0
            for j in range(n_c):
                row[j] = _hav_h(lp[i], cp[i], lop[i], lc[j], cc[j], loc[j])
                if row[j] < hmin:
                    hmin = row[j]
            dmin = 2.0 * EARTH_RADIUS_KM * asin(sqrt(hmin))
            if dmin > max_km:
                continue
            # loose bound in h-space; the exact test below decides ties
            half = (dmin + tie_km) / (2.0 * EARTH_RADIUS_KM)
            hcut = 1.0 if half >= M_PI / 2 else sin(half) * sin(half) * (1.0 + 1e-9) + 1e-300
            for j in range(n_c):
                if row[j] <= hcut and 2.0 * EARTH_RADIUS_KM * asin(sqrt(row[j])) <= dmin + tie_km:
                    res[i] = j
                    break
    return out


def cd_solve(double[::1, :] X, double[::1] y, double l1, double l2, double tol,
             Py_ssize_t max_iter, double[::1] theta, double[::1] trace):
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j, sweeps = 0
    cdef double inv_n2 = 2.0 / n
    cdef double c, old, new, delta, max_delta, acc, rr, pen1, pen2
    cdef bint converged = False
    a_arr = np.zeros(p, dtype=np.float64)
    r_arr = np.array(y, dtype=np.float64, copy=True)
    cdef double[::1] a = a_arr
    cdef double[::1] r = r_arr
    with nogil:
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc = acc + X[i, j] * X[i, j]
            a[j] = inv_n2 * acc
            if a[j] <= 0.0:
                theta[j] = 0.0
            elif theta[j] != 0.0:
                for i in range(n):
                    r[i] = r[i] - X[i, j] * theta[j]
        while sweeps < max_iter:
            max_delta = 0.0
            for j in range(p):
                if a[j] <= 0.0:
                    continue
                old = theta[j]
                acc = 0.0
                for i in range(n):
                    acc = acc + X[i, j] * r[i]
                c = inv_n2 * acc + a[j] * old
                if c > l1:
                    new = (c - l1) / (a[j] + 2.0 * l2)
                elif c < -l1:
                    new = (c + l1) / (a[j] + 2.0 * l2)
                else:
                    new = 0.0
                delta = new - old
                if delta != 0.0:
                    for i in range(n):
                        r[i] = r[i] - delta * X[i, j]
                    theta[j] = new
                    if fabs(delta) > max_delta:
                        max_delta = fabs(delta)
            rr = 0.0
            for i in range(n):
                rr = rr + r[i] * r[i]
            pen1 = 0.0
            pen2 = 0.0
            for j in range(p):
                pen1 = pen1 + fabs(theta[j])
                pen2 = pen2 + theta[j] * theta[j]
            trace[sweeps] = rr / n + l1 * pen1 + l2 * pen2
            sweeps = sweeps + 1
            if max_delta < tol:
                converged = True
                break
    return sweeps, bool(converged)
