import math

import numpy as np
import pytest

from lamperti import kernels
from lamperti.correction import apply
from lamperti.kernels import loops, vectorized
from lamperti.models import ModelKind, build_model
from lamperti.solvers import (
    SchemeKind,
    SolverFailure,
    explicit_step,
    lbem_stable_step,
    lbem_step,
    positive_root,
    simulate_path,
    simulate_transformed,
)
from oracles import bisect_increasing, bisect_positive_root, flp_value

ALL_H = [2.0**-i for i in range(0, 10)]


def random_pairs(n, seed):
    rng = np.random.default_rng(seed)
    a = np.where(rng.random(n) < 0.5, -1.0, 1.0) * 10 ** rng.uniform(-8, 8, n)
    q = 10 ** rng.uniform(-12, 2, n)
    return a, q


# -- positive root -----------------------------------------------------------

@pytest.mark.parametrize("a,q,y", [(3.0, 4.0, 4.0), (-3.0, 4.0, 1.0), (0.0, 1.0, 1.0)])
def test_root_examples(a, q, y):
    assert positive_root(a, q) == pytest.approx(y, rel=1e-15)


def test_root_far_negative():
    y = positive_root(-1e8, 1e-4)
    assert y > 0
    assert y == pytest.approx(float(bisect_positive_root(-1e8, 1e-4)), rel=1e-12)
    assert y == pytest.approx(1e-12, rel=1e-12)


def test_root_rejects_nonpositive_q():
    for q in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            positive_root(1.0, q)


def test_root_matches_oracle():
    a, q = random_pairs(100_000, 1)
    y = np.array([positive_root(ai, qi) for ai, qi in zip(a, q)])
    ref = bisect_positive_root(a, q)
    assert np.all(y > 0)
    assert np.max(np.abs(y / ref - 1)) <= 1e-9
    assert np.all(np.abs(y - q / y - a) <= 1e-10 * np.maximum(1.0, np.abs(a)))


def test_root_monotone_in_a():
    rng = np.random.default_rng(2)
    a = np.sort(np.concatenate([rng.uniform(-1e3, 1e3, 5000), -(10 ** rng.uniform(-8, 8, 5000))]))
    y = np.array([positive_root(v, 0.37) for v in a])
    assert np.all(np.diff(y)[np.diff(a) > 0] > 0)


def test_vectorized_root_agrees():
    a, q = random_pairs(10_000, 3)
    scalar = np.array([positive_root(ai, qi) for ai, qi in zip(a, q)])
    np.testing.assert_allclose(vectorized.positive_root(a, q), scalar, rtol=1e-15)


def test_root_huge_arguments():
    assert positive_root(1e200, 1.0) == pytest.approx(1e200)
    assert positive_root(-1e200, 1.0) == pytest.approx(1e-200)
    # root q/|a| = 1e-310 is subnormal but representable
    assert positive_root(-1e300, 1e-10) > 0


# -- explicit step -----------------------------------------------------------

def test_explicit_step_cir_example(cir):
    y = explicit_step(cir, 0.25, 1.0, 0.0)
    A, q = 1 - 0.175 * 0.25, 0.065 * 0.25
    oracle = bisect_increasing(lambda t: t - q / t, A, 1e-6, 10.0)
    assert A == 0.95625 and q == pytest.approx(0.01625)
    assert y == pytest.approx(oracle, rel=1e-12)
    assert y == pytest.approx(0.97295175, abs=5e-9)


def test_explicit_step_positive_and_deterministic(preset_spec):
    for h in (1.0, 2.0**-5):
        assert explicit_step(preset_spec, h, 1.0, -1e6) > 0
        assert explicit_step(preset_spec, h, 1.0, 1e6) > 0
    assert explicit_step(preset_spec, 0.1, 0.7, 0.3) == explicit_step(preset_spec, 0.1, 0.7, 0.3)


def test_explicit_step_rejects_bad_input(cir):
    with pytest.raises(ValueError):
        explicit_step(cir, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        explicit_step(cir, 2.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        explicit_step(cir, 0.5, -1.0, 0.0)


def test_explicit_step_matches_oracle(preset_spec):
    spec = preset_spec
    rng = np.random.default_rng(4)
    hs = 2.0 ** -rng.integers(0, 10, 10_000)
    ys = 10 ** rng.uniform(-3, 3, 10_000)
    dws = rng.normal(size=10_000) * np.sqrt(hs)
    lo_hi = [spec.correction.bounds(h) for h in hs]
    z = np.array([min(max(y, lo), hi) for y, (lo, hi) in zip(ys, lo_hi)])
    A = np.array([zi + flp_value(spec.mu_hat.terms, zi) * h + spec.sigma * dw
                  for zi, h, dw in zip(z, hs, dws)])
    ref = bisect_positive_root(A, spec.c_minus_one * hs)
    got = np.array([explicit_step(spec, h, y, dw) for h, y, dw in zip(hs, ys, dws)])
    assert np.max(np.abs(got / ref - 1)) <= 1e-9


# -- LBEM --------------------------------------------------------------------

def test_lbem_cir_quadratic(cir):
    kappa, A = 0.35, 0.065
    rng = np.random.default_rng(5)
    for _ in range(2000):
        h = 2.0 ** -int(rng.integers(0, 13))
        y = 10 ** rng.uniform(-2, 1)
        dw = rng.normal() * math.sqrt(h)
        rhs = y + cir.sigma * dw
        a2 = 1 + kappa * h / 2
        oracle = (rhs + math.sqrt(rhs * rhs + 4 * a2 * A * h)) / (2 * a2)
        assert lbem_step(cir, h, y, dw) == pytest.approx(oracle, rel=1e-12)


def test_lbem_linear_drift():
    coefs, exps = np.array([-1.0]), np.array([1.0])
    for rhs in (1e-6, 0.3, 1.0, 42.0):
        for h in (1.0, 0.5, 2.0**-9):
            y, status = kernels.lbem_step(rhs, h, 0.0, coefs, exps, 1.0, 1e-8)
            assert status == 0
            assert y == pytest.approx(rhs / (1 + h), rel=1e-12)
    # no positive root exists for a negative right-hand side
    _, status = kernels.lbem_step(0.1, 0.5, -1.0, coefs, exps, 1.0, 1e-8)
    assert status != 0


def test_lbem_ait_residual(ait):
    h = 2.0**-9
    y_n = ait.transform.forward(0.5)
    y = lbem_step(ait, h, y_n, 0.0)
    assert y > 0
    assert abs(y - h * ait.mu(y) - y_n) <= 1e-12 * max(1.0, abs(y_n))


def test_lbem_residuals_all_models(preset_spec):
    rng = np.random.default_rng(6)
    for _ in range(500):
        h = 2.0 ** -int(rng.integers(0, 13))
        y_n = 10 ** rng.uniform(-2, 2)
        dw = rng.normal() * math.sqrt(h)
        y = lbem_step(preset_spec, h, y_n, dw)
        rhs = y_n + preset_spec.sigma * dw
        assert y > 0
        assert abs(y - h * preset_spec.mu(y) - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_lbem_failure_is_reported(cir, monkeypatch):
    def broken(y0, incs, *args):
        out = np.full((incs.shape[0], incs.shape[1] + 1), y0)
        failed = np.full(incs.shape[0], -1)
        failed[1] = 3
        return out, failed

    monkeypatch.setattr(kernels, "lbem_paths", broken)
    with pytest.raises(SolverFailure, match="path=1 step=3"):
        simulate_transformed(cir, "lbem", 0.1, np.zeros((2, 10)))


def test_stable_step(cir, ait):
    assert lbem_stable_step(cir) == math.inf
    assert lbem_stable_step(ait) > 0


@pytest.mark.parametrize("name", ["example-6.1", "example-6.2", "example-6.3", "example-6.4"])
def test_lbem_explicit_gap_is_second_order(presets, name):
    spec = presets[name]
    hs = np.array([2.0**-i for i in range(6, 11)])
    y = spec.y0
    for h in hs:
        lo, hi = spec.correction.bounds(h)
        assert lo < y < hi
    gap = np.array([abs(explicit_step(spec, h, y, 0.0) - lbem_step(spec, h, y, 0.0)) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(gap), 1)[0]
    assert abs(slope - 2) <= 0.3


# -- paths -------------------------------------------------------------------

def test_path_one_step_composition(preset_spec):
    h = 2.0**-5
    for scheme, step in (("proposed", explicit_step), ("lbem", lbem_step)):
        out = simulate_path(preset_spec, scheme, h, [0.0])
        assert out.y_transformed[1] == step(preset_spec, h, preset_spec.y0, 0.0)
        assert out.x_original[0] == pytest.approx(preset_spec.x0_original, rel=1e-14)


def test_path_shapes(cir):
    out = simulate_path(cir, SchemeKind.PROPOSED, 0.125, np.zeros(8))
    assert out.times.shape == out.y_transformed.shape == out.x_original.shape == (9,)
    np.testing.assert_array_equal(out.times, 0.125 * np.arange(9))
    with pytest.raises(ValueError):
        simulate_transformed(cir, "proposed", 0.1, np.zeros(3))
    with pytest.raises(ValueError):
        simulate_path(cir, "euler", 0.1, np.zeros(3))


@pytest.mark.parametrize("x0", [0.01, 0.5, 3.0])
@pytest.mark.parametrize("scheme", ["proposed", "lbem"])
def test_cir_noise_free_flow_reverts(x0, scheme):
    spec = build_model(ModelKind("cir", {"kappa": 0.35, "theta": 0.1, "sigma": 0.1}), x0)
    for h in (1.0, 0.25, 2.0**-6):
        n = int(round(20 / h))
        x = simulate_path(spec, scheme, h, np.zeros(n)).x_original
        step = np.diff(x) * np.sign(0.1 - x0)
        assert np.all(step >= -1e-15 * x[1:])
        assert abs(x[-1] - 0.1) < abs(x0 - 0.1)


@pytest.mark.parametrize("h", [2.0**-1, 2.0**-5, 2.0**-9])
@pytest.mark.parametrize("scheme", ["proposed", "lbem"])
def test_random_paths_positive(preset_spec, h, scheme):
    n = int(round(1 / h))
    incs = np.random.default_rng(8).normal(size=(1000, n)) * math.sqrt(h)
    y = simulate_transformed(preset_spec, scheme, h, incs)
    assert np.all(y > 0) and np.all(np.isfinite(y))
    assert np.all(preset_spec.transform.inverse(y) > 0)


# -- backend parity ----------------------------------------------------------

def _args(spec, h):
    lo, hi = spec.correction.bounds(h)
    return lo, hi, (lo if lo > 0 else 1e-8)


@pytest.mark.parametrize("h", [1.0, 2.0**-5])
def test_backends_agree(preset_spec, h):
    spec = preset_spec
    n = int(round(1 / h))
    incs = np.random.default_rng(9).normal(size=(64, n)) * math.sqrt(h)
    incs[::7, ::3] *= 1e4
    lo, hi, floor = _args(spec, h)
    hat = (spec.mu_hat.coefficients, spec.mu_hat.exponents)
    mu = (spec.mu.coefficients, spec.mu.exponents)
    ex_n = loops.explicit_paths(spec.y0, incs, h, *hat, spec.c_minus_one, spec.sigma, lo, hi)
    ex_v = vectorized.explicit_paths(spec.y0, incs, h, *hat, spec.c_minus_one, spec.sigma, lo, hi)
    np.testing.assert_allclose(ex_n, ex_v, rtol=1e-12)
    lb_n, f_n = loops.lbem_paths(spec.y0, incs, h, *mu, spec.sigma, floor)
    lb_v, f_v = vectorized.lbem_paths(spec.y0, incs, h, *mu, spec.sigma, floor)
    np.testing.assert_array_equal(f_n, f_v)
    np.testing.assert_allclose(lb_n, lb_v, rtol=1e-11)


def test_path_kernel_matches_scalar_steps(preset_spec):
    spec, h = preset_spec, 2.0**-4
    incs = np.random.default_rng(10).normal(size=(8, 16)) * 0.25
    paths = simulate_transformed(spec, "proposed", h, incs)
    for i in range(8):
        y = spec.y0
        for j in range(16):
            y = explicit_step(spec, h, y, incs[i, j])
            assert paths[i, j + 1] == pytest.approx(y, rel=1e-14)
