import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manugrip import _kernels
from manugrip._kernels import _fallback
from oracles import point_triangle_distance

core = pytest.importorskip("manugrip._kernels._core")
seeds = st.integers(0, 2**32 - 1)


def _tris(rng, m, spread=1.0):
    c = rng.normal(scale=spread, size=(m, 1, 3))
    return c + rng.normal(scale=0.3, size=(m, 3, 3))


def test_backend_reported():
    assert _kernels.BACKEND in ("compiled", "python")


@settings(max_examples=30)
@given(seeds)
def test_closest_point_matches_voronoi_oracle(seed):
    rng = np.random.default_rng(seed)
    T = _tris(rng, 50)
    P = rng.normal(size=(50, 3))
    sq, bary = _fallback.closest_point_triangle(P, T[:, 0], T[:, 1], T[:, 2])
    ref = np.array([point_triangle_distance(p, *t) for p, t in zip(P, T)])
    assert np.allclose(np.sqrt(sq), ref, rtol=1e-9, atol=1e-12)
    assert np.allclose(bary.sum(axis=1), 1.0) and bary.min() >= -1e-12
    sq_c, bary_c = core.closest_point_triangle(P, T[:, 0], T[:, 1], T[:, 2])
    assert np.allclose(sq_c, sq, rtol=1e-12, atol=1e-15) and np.allclose(bary_c, bary, atol=1e-12)


@settings(max_examples=20)
@given(seeds)
def test_nearest_triangle_parity(seed):
    rng = np.random.default_rng(seed)
    T = _tris(rng, 40)
    P = rng.normal(size=(30, 3))
    a = _fallback.nearest_triangle(P, T)
    b = core.nearest_triangle(P, T)
    assert np.array_equal(a[1], b[1])
    assert np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[2], b[2], atol=1e-12)


@settings(max_examples=20)
@given(seeds)
def test_pairs_and_min_distance_parity(seed):
    rng = np.random.default_rng(seed)
    T = _tris(rng, 40)
    P = rng.normal(size=(60, 3))
    pg = rng.integers(-2, 3, size=60)
    tg = rng.integers(-2, 3, size=40)
    a = _fallback.pairs_within(P, pg, T, tg, 0.5)
    b = core.pairs_within(P, pg, T, tg, 0.5)
    key_a = sorted(zip(a[0].tolist(), a[1].tolist()))
    key_b = sorted(zip(b[0].tolist(), b[1].tolist()))
    assert key_a == key_b
    for (pi, ti) in key_a[:5]:
        assert ((pg[pi] != tg[ti]) and not (pg[pi] < 0 and tg[ti] < 0))
    assert _fallback.min_pair_sqdist(P, pg, T, tg) == pytest.approx(core.min_pair_sqdist(P, pg, T, tg), rel=1e-12)


@settings(max_examples=20)
@given(seeds)
def test_ray_crossing_parity(seed):
    rng = np.random.default_rng(seed)
    T = _tris(rng, 40)
    P = rng.normal(size=(30, 3))
    d = np.array([0.577, 0.566, 0.589])
    assert np.array_equal(_fallback.ray_crossings(P, d, T), core.ray_crossings(P, d, T))


@settings(max_examples=20)
@given(seeds, st.booleans())
def test_snh_parity(seed, hess):
    rng = np.random.default_rng(seed)
    F = np.eye(3) + rng.normal(scale=0.2, size=(25, 3, 3))
    a = _fallback.snh_batch(F, 1.0, 2.0, 1.3, hess)
    b = core.snh_batch(F, 1.0, 2.0, 1.3, hess)
    for x, y in zip(a, b):
        if x is None:
            assert y is None
        else:
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12)
