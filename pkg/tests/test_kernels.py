import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from neighbourtext import kernels

from conftest import oracle_haversine


def test_python_fallback_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


def test_env_var_forces_fallback():
    code = "from neighbourtext import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "NEIGHBOURTEXT_KERNELS": "python"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_haversine_matrix(backend):
    rng = np.random.default_rng(0)
    la, lo = rng.uniform(-80, 80, 30), rng.uniform(-180, 180, 30)
    lb, lob = rng.uniform(-80, 80, 20), rng.uniform(-180, 180, 20)
    D = backend.haversine_matrix(la, lo, lb, lob)
    assert D.shape == (30, 20)
    want = np.array([[oracle_haversine(a, b, c, d) for c, d in zip(lb, lob)] for a, b in zip(la, lo)])
    assert_allclose(D, want, rtol=0, atol=1e-9)


def test_nearest_within(backend):
    rng = np.random.default_rng(1)
    lat_c, lon_c = 51.5 + rng.uniform(-0.05, 0.05, 40), rng.uniform(-0.05, 0.05, 40)
    lat_p, lon_p = 51.5 + rng.uniform(-0.06, 0.06, 500), rng.uniform(-0.06, 0.06, 500)
    got = backend.nearest_within(lat_p, lon_p, lat_c, lon_c, 1.0, 1e-12)
    for i in range(500):
        d = [oracle_haversine(lat_p[i], lon_p[i], a, b) for a, b in zip(lat_c, lon_c)]
        j = int(np.argmin(d))
        assert got[i] == (j if d[j] <= 1.0 else -1)


def test_nearest_tie_takes_first_centre(backend):
    lat_c = np.array([51.5, 51.5])
    lon_c = np.array([-0.005, 0.005])
    got = backend.nearest_within(np.array([51.5]), np.array([0.0]), lat_c, lon_c, 1.0, 1e-12)
    assert got[0] == 0


def test_nearest_within_backends_agree():
    backs = kernels.available_backends()
    if len(backs) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(3)
    lat_c = 51.5 + rng.uniform(-0.02, 0.02, 60)
    lon_c = rng.uniform(-0.02, 0.02, 60)
    # duplicated centres force exact ties
    lat_c, lon_c = np.concatenate([lat_c, lat_c[::3]]), np.concatenate([lon_c, lon_c[::3]])
    lat_p = np.concatenate([51.5 + rng.uniform(-0.03, 0.03, 3000), lat_c])
    lon_p = np.concatenate([rng.uniform(-0.03, 0.03, 3000), lon_c])
    outs = [b.nearest_within(lat_p, lon_p, lat_c, lon_c, 1.0, 1e-12) for b in backs.values()]
    assert_array_equal(outs[0], outs[1])


def test_cd_solve_backends_agree():
    backs = kernels.available_backends()
    if len(backs) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(2)
    X = np.asfortranarray(rng.normal(size=(60, 8)))
    X -= X.mean(axis=0)
    y = rng.normal(size=60)
    y -= y.mean()
    results = {}
    for name, b in backs.items():
        theta = np.zeros(8)
        trace = np.empty(1000)
        sweeps, conv = b.cd_solve(X, y, 0.05, 0.02, 1e-10, 1000, theta, trace)
        results[name] = (theta, trace[:sweeps], conv)
    (t1, tr1, c1), (t2, tr2, c2) = results.values()
    assert c1 and c2 and len(tr1) == len(tr2)
    assert_allclose(t1, t2, rtol=0, atol=1e-12)
    assert_allclose(tr1, tr2, rtol=1e-12)


def test_cd_solve_zero_column(backend):
    X = np.asfortranarray(np.column_stack([np.linspace(-1, 1, 10), np.zeros(10)]))
    y = 3 * X[:, 0]
    theta = np.array([0.0, 5.0])
    trace = np.empty(100)
    sweeps, conv = backend.cd_solve(X, y, 0.0, 0.0, 1e-12, 100, theta, trace)
    assert conv and theta[1] == 0.0 and abs(theta[0] - 3) < 1e-12
    assert_array_equal(trace[:sweeps] >= 0, True)
