import math

import numpy as np
import pytest

import lorentz


def test_builtins_listed():
    assert set(lorentz.builtin_names()) >= {"minkowski", "schwarzschild", "desitter_slicing", "flat_spatial_torus"}


def test_minkowski_flat():
    spec = lorentz.builtin("minkowski")
    x = np.array([0.1, 0.2, -0.3, 0.4])
    assert np.allclose(spec.metric(x), np.diag([-1.0, 1.0, 1.0, 1.0]))
    assert spec.christoffel(x).shape == (4, 4, 4)
    assert np.abs(spec.riemann(x)).max() == 0.0


def test_desitter_sectional_curvature():
    spec = lorentz.builtin("desitter_slicing", {"K": 1.0})
    x = np.zeros(4)
    g = spec.metric(x)
    R = spec.riemann(x)
    assert R[1, 2, 1, 2] == pytest.approx(g[1, 1] * g[2, 2], rel=1e-10)


def test_exp_is_translation_in_flat_space():
    spec = lorentz.builtin("minkowski")
    y = np.array([0.3, 1.0, -0.5, 0.2])
    assert np.allclose(lorentz.exp_map(spec, np.zeros(4), y), y, atol=1e-10)


def test_geodesic_norm_conserved():
    spec = lorentz.builtin("schwarzschild")
    geo = lorentz.geodesic(spec, np.array([0.0, 8.0, 0.0, 0.0]), np.array([1.2, 0.0, 0.3, 0.0]), 1.0)
    assert geo["termination"] == "reached_smax"
    assert geo["x"].shape[1] == 4
    assert geo["norm_drift"] < 1e-8


def test_sphere_conjugate_radius():
    spec = lorentz.builtin("static_sphere", {"K": 1.0}, dim=3)
    s = lorentz.conjugate_radius(spec, np.array([0.0, 0.5, 0.3]), 4.0, n_dirs=16, spatial=True)
    assert s == pytest.approx(math.pi, abs=1e-3)


def test_torus_injectivity():
    spec = lorentz.builtin("flat_spatial_torus", {"L": 2.0}, dim=3)
    rep = lorentz.injectivity_radius(spec, np.zeros(3), 3.0, n_dirs=16)
    assert rep["shortest_loop"] == pytest.approx(2.0, rel=1e-6)
    assert rep["inj_estimate"] == pytest.approx(1.0, rel=1e-6)
    assert rep["bound_violations"] == 0


def test_flat_ratio_constant():
    spec = lorentz.builtin("minkowski")
    curve = lorentz.ratio_curve(spec, np.zeros(4), [0.5, 1.0, 1.5], K2=0.0)
    assert np.allclose(curve["ratio"], curve["ratio"][0], rtol=1e-6)


def test_parse_error_located():
    with pytest.raises(lorentz.ParseError, match=r"line \d+, column \d+"):
        lorentz.parse_spec("[model]\ndim = 4\n[lapse]\nlapse = \"1 +\"\n")


def test_scaled_spec():
    spec = lorentz.builtin("desitter_slicing").scaled(2.0)
    assert spec.metric(np.zeros(4))[0, 0] == pytest.approx(-4.0)
