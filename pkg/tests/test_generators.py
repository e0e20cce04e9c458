import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternforge import (
    InfeasibleConfig,
    Pattern,
    RandomSource,
    SamplingConfig,
    derive_params,
    generate_angie,
    generate_ars,
    generate_js,
    validate_pattern,
)
from patternforge import kernels
from patternforge.generators import (
    angie_start,
    angie_trace,
    bag_from_rows,
    generate_bag,
    generate_rows,
    step_angie,
)
from patternforge.core import DerivedParams
from patternforge.units import parse_quantity as q

from conftest import FixedRNG, random_configs, us

BACKENDS = sorted(kernels.BACKENDS)


def cfg(tau, f, t_grid="1us", **kw):
    return SamplingConfig(q(tau), q(t_grid), q(f), **kw)


def uniform_oracle(d):
    return [k * d.n_avg for k in range(1, d.k_req + 1) if k * d.n_avg <= d.k_grid]


# -- hand-checked examples --------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_js_zero_variance_example(backend):
    d = derive_params(cfg("10us", "200kHz"))
    assert (d.k_grid, d.n_avg, d.k_req) == (10, 5, 2)
    assert generate_js(d, 0.0, FixedRNG(), backend).indices.tolist() == [5, 10]


@pytest.mark.parametrize("backend", BACKENDS)
def test_ars_zero_variance_example(backend):
    d = derive_params(cfg("10us", "300kHz"))
    assert (d.k_grid, d.n_avg, d.k_req) == (10, 3, 3)
    assert generate_ars(d, 0.0, FixedRNG(), backend).indices.tolist() == [3, 6, 9]


@pytest.mark.parametrize("backend", BACKENDS)
def test_angie_hand_trace(backend):
    d = derive_params(cfg("10us", "200kHz"))
    assert generate_angie(d, 0.0, FixedRNG(uniform=1.0), backend).indices.tolist() == [3, 7]
    p, states = angie_trace(d, 0.0, FixedRNG(uniform=1.0))
    assert p.indices.tolist() == [3, 7]
    assert (states[1].lim_lo, states[1].lim_hi) == (4, 10)


@pytest.mark.parametrize("backend", BACKENDS)
def test_js_drops_points_off_grid(backend):
    d = derive_params(cfg("100us", "100kHz"))
    assert (d.k_grid, d.n_avg, d.k_req) == (100, 10, 10)
    rng = FixedRNG(normals=[10.0, -10.0])
    p = generate_js(d, 1.0, rng, backend)
    assert len(p) == d.k_req - 2
    assert p.indices.tolist() == list(range(30, 101, 10))


@pytest.mark.parametrize("backend", BACKENDS)
def test_ars_holds_predecessor_on_rejection(backend):
    d = derive_params(cfg("100us", "100kHz"))
    # first draw lands at 110 and is rejected, the next starts again from 0
    p = generate_ars(d, 1.0, FixedRNG(normals=[10.0]), backend)
    assert p.indices.tolist() == list(range(10, 91, 10))


def test_js_merges_collisions():
    d = derive_params(cfg("100us", "100kHz"))
    # 10 + 0.5*10 -> 15 and 20 - 0.5*10 -> 15
    p = generate_js(d, 0.25, FixedRNG(normals=[1.0, -1.0]))
    assert p.indices.tolist()[:2] == [15, 30]
    assert len(p) == 9


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_variance_gives_uniform_pattern(backend):
    for c in random_configs(40, seed=11, strict=False):
        d = derive_params(c, strict=False)
        expect = uniform_oracle(d)
        assert generate_js(d, 0.0, RandomSource(1), backend).indices.tolist() == expect
        assert generate_ars(d, 0.0, RandomSource(1), backend).indices.tolist() == expect


def test_angie_rejects_infeasible():
    d = derive_params(cfg("100us", "101kHz", t_grid="3us", t_min=q("9.9us")), strict=False)
    with pytest.raises(InfeasibleConfig):
        generate_angie(d, 1.0, RandomSource(0))
    with pytest.raises(InfeasibleConfig):
        generate_rows("angie", d, 1.0, 4, seed=0)


# -- ANGIE invariants -------------------------------------------------------


def _angie_corpus(n_cfg, per_cfg, seed):
    out = []
    for i, c in enumerate(random_configs(n_cfg, seed=seed)):
        d = derive_params(c)
        for s2 in (0.0, 1e-3, 1.0, 1e4):
            for j in range(per_cfg):
                out.append((d, s2, i * 1000 + j))
    return out


def test_angie_limits_are_ordered_and_patterns_correct():
    for d, s2, stream in _angie_corpus(150, 3, seed=5):
        p, states = angie_trace(d, s2, RandomSource(17, stream))
        assert all(s.lim_lo <= s.lim_hi for s in states)
        v = validate_pattern(p, d)
        assert v.gamma == 0, (d, s2, p.indices)


@pytest.mark.parametrize("backend", BACKENDS)
def test_kernels_match_reference_stepper(backend):
    for d, s2, stream in _angie_corpus(60, 2, seed=6):
        ref, _ = angie_trace(d, s2, RandomSource(3, stream))
        got = generate_angie(d, s2, RandomSource(3, stream), backend)
        assert got == ref


def test_angie_huge_variance_stays_correct(exp1_params):
    d = exp1_params
    idx, lengths = generate_rows("angie", d, 1e12, 500, seed=2)
    bag = bag_from_rows("angie", d, 1e12, 2, idx, lengths)
    assert not bag.gamma.any()


@settings(max_examples=60, deadline=None)
@given(k_grid=st.integers(2, 400), k_req=st.integers(1, 60), k_min=st.integers(1, 12),
       extra=st.integers(0, 30), u=st.floats(0, 1), z=st.lists(st.floats(-50, 50), max_size=60),
       sigma=st.floats(0, 100))
def test_step_angie_property(k_grid, k_req, k_min, extra, u, z, sigma):
    k_req = min(k_req, k_grid)
    if k_min * (k_req - 1) + 1 > k_grid:
        return
    d = DerivedParams(k_grid, us(1), k_grid * us(1), k_req, 0, 0, max(1, k_grid // k_req), k_min, k_min + extra)
    s = angie_start(d)
    draws = [u] + list(z) + [0.0] * k_req
    pts = []
    for k in range(k_req):
        assert s.lim_lo <= s.lim_hi
        pts.append(step_angie(s, d, sigma, draws[k]))
    v = validate_pattern(Pattern(pts, k_grid), d)
    assert v.gamma == 0


# -- bags, backends, determinism -------------------------------------------


@pytest.mark.parametrize("kind", ["js", "ars", "angie"])
def test_backends_bit_identical(kind, exp1_params):
    if len(BACKENDS) < 2:
        pytest.skip("numba unavailable")
    for s2 in (1e-4, 1e-2, 1.0, 100.0):
        a = generate_rows(kind, exp1_params, s2, 500, seed=9, backend="numba")
        b = generate_rows(kind, exp1_params, s2, 500, seed=9, backend="numpy")
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("kind", ["js", "ars", "angie"])
def test_bag_rows_match_single_pattern_calls(kind, exp1_params):
    gen = {"js": generate_js, "ars": generate_ars, "angie": generate_angie}[kind]
    idx, lengths = generate_rows(kind, exp1_params, 0.3, 20, seed=4)
    for i in range(20):
        p = gen(exp1_params, 0.3, RandomSource(4, i))
        assert p.indices.tolist() == idx[i, : lengths[i]].tolist()


def test_generation_is_deterministic_and_chunk_independent(exp1, monkeypatch):
    import patternforge.generators as g

    a = generate_bag("angie", exp1.with_sigma2(0.5), 300, seed=21)
    monkeypatch.setattr(g, "_CHUNK_POINTS", 700)
    b = generate_bag("angie", exp1.with_sigma2(0.5), 300, seed=21, threads=4)
    assert np.array_equal(a.indices, b.indices)
    c = generate_bag("angie", exp1.with_sigma2(0.5), 300, seed=22)
    assert not np.array_equal(a.indices, c.indices)


def test_generate_rows_start_offset(exp1_params):
    full = generate_rows("ars", exp1_params, 1.0, 50, seed=3)[0]
    tail = generate_rows("ars", exp1_params, 1.0, 20, seed=3, start=30)[0]
    assert np.array_equal(full[30:], tail[:, : full.shape[1]])


@pytest.mark.parametrize("kind", ["js", "ars"])
def test_jittered_rows_sorted_unique_in_range(kind):
    for c in random_configs(30, seed=8, strict=False, max_grid=500):
        d = derive_params(c, strict=False)
        idx, lengths = generate_rows(kind, d, 4.0, 30, seed=1)
        for row, n in zip(idx, lengths):
            r = row[:n]
            assert np.all(np.diff(r) > 0)
            assert n == 0 or (r[0] >= 1 and r[-1] <= d.k_grid)
            assert n <= d.k_req


def test_experiment1_angie_always_correct(exp1):
    for s2 in (1e-4, 1e-2, 1.0, 100.0):
        bag = generate_bag("angie", exp1.with_sigma2(s2), 2000, seed=1)
        assert not bag.gamma.any()


def test_experiment1_js_incorrect_at_large_variance(exp1):
    bag = generate_bag("js", exp1.with_sigma2(10.0), 2000, seed=1)
    assert bag.gamma.mean() > 0.99


def test_bag_verdicts_match_validate(exp1_params):
    idx, lengths = generate_rows("js", exp1_params, 0.2, 200, seed=5)
    bag = bag_from_rows("js", exp1_params, 0.2, 5, idx, lengths)
    for i, p in enumerate(bag.patterns()):
        assert bag.verdict(i) == validate_pattern(p, exp1_params)


def test_unknown_generator(exp1_params):
    with pytest.raises(ValueError):
        generate_rows("lfsr", exp1_params, 1.0, 3, 0)


def test_random_source_streams_independent():
    a = RandomSource(5, 0).standard_normal(8)
    b = RandomSource(5, 1).standard_normal(8)
    assert not np.allclose(a, b)
    assert np.array_equal(a, RandomSource(5, 0).standard_normal(8))
    assert 0 <= RandomSource(5, 2).uniform() < 1
    assert math.isfinite(float(a.sum()))
