import math

import numpy as np
import pytest
from scipy.special import ndtr

from seqcv.errors import ArgumentDomainError, ConfigError, DegenerateNormalizationError
from seqcv.kernels import KERNEL_NAMES, get_kernel
from seqcv.limit import (
    LimitSpec,
    bias_integral,
    limit_argmin,
    limit_objective,
    limit_objective_with_error,
    limit_vs_montecarlo,
    mean_square,
    montecarlo_objective,
    norming,
)

linear = lambda u: 1.0 + u
sine = lambda u: 1.0 + 0.5 * np.sin(2 * math.pi * u)


def constant(mu):
    return lambda u: mu + 0.0 * np.asarray(u, dtype=float)


def test_one_signed_mean_required():
    with pytest.raises(ConfigError):
        LimitSpec(get_kernel("gaussian"), lambda u: u - 0.5)
    with pytest.raises(ConfigError):
        LimitSpec(get_kernel("gaussian"), linear, mode="other")
    LimitSpec(get_kernel("gaussian"), lambda u: -1.0 - u)


def test_norming_uniform():
    spec = LimitSpec(get_kernel("uniform"), linear)
    assert norming(spec, 4.0, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert norming(spec, 2.0, 0.25) == pytest.approx(0.5, abs=1e-12)


def test_norming_gaussian_riemann():
    xi, r = 5.0, 0.8
    n = 1_000_000
    u = (np.arange(n) + 0.5) / n * r
    riemann = xi * np.sum(np.exp(-0.5 * (xi * (r - u)) ** 2) / math.sqrt(2 * math.pi)) * (r / n)
    spec = LimitSpec(get_kernel("gaussian"), linear, tol=1e-11)
    got = norming(spec, xi, r)
    assert got == pytest.approx(riemann, abs=1e-8)
    assert got == pytest.approx(ndtr(4.0) - 0.5, abs=1e-10)


def test_norming_errors():
    spec = LimitSpec(get_kernel("gaussian"), linear)
    with pytest.raises(ArgumentDomainError):
        norming(spec, 2.0, 0.0)
    with pytest.raises(DegenerateNormalizationError):
        norming(spec, 1.0, 1e-10)


@pytest.mark.parametrize("name", KERNEL_NAMES)
@pytest.mark.parametrize("mu", [1.0, 200.0])
def test_constant_mean(name, mu):
    spec = LimitSpec(get_kernel(name), constant(mu))
    for xi in (1.0, 3.7, 20.0):
        assert limit_objective(spec, xi, 0.5) == pytest.approx(-0.5 * mu ** 2, abs=1e-6 * max(1, mu ** 2))
    _, rep = limit_argmin(spec, np.linspace(1, 20, 11), 0.5)
    assert not rep.well_separated


def nested_riemann_linear_uniform(xi, s, n):
    """Outer midpoint rule in r; the inner average is taken over the kernel window itself."""
    w = 1.0 / xi
    r = (np.arange(n) + 0.5) / n * s
    total = 0.0
    for chunk in np.array_split(r, 20):
        lo = np.maximum(0.0, chunk - w)
        t = (np.arange(n) + 0.5) / n
        u = lo[:, None] + t[None, :] * (chunk - lo)[:, None]
        mbar = np.mean(1.0 + u, axis=1)
        m = 1.0 + chunk
        total += np.sum(mbar ** 2 - 2 * m * mbar)
    return total * s / n


def test_linear_uniform_nested_riemann():
    spec = LimitSpec(get_kernel("uniform"), linear, tol=1e-10)
    ref = nested_riemann_linear_uniform(4.0, 1.0, 10_000)
    got = limit_objective(spec, 4.0, 1.0)
    assert got == pytest.approx(ref, abs=1e-6)
    # closed form for this case: 5/384 - 7/3
    assert got == pytest.approx(-891.0 / 384.0, abs=1e-8)


@pytest.mark.parametrize("name", KERNEL_NAMES)
@pytest.mark.parametrize("m", [linear, sine])
def test_decomposition_identity(name, m):
    spec = LimitSpec(get_kernel(name), m, tol=1e-9)
    for xi, s in [(2.0, 0.5), (7.0, 1.0)]:
        c = limit_objective(spec, xi, s)
        bias = bias_integral(spec, xi, s)
        assert bias >= 0
        assert c + mean_square(spec, s) == pytest.approx(bias, abs=1e-7)


def test_monotone_accumulation():
    spec = LimitSpec(get_kernel("gaussian"), sine)
    vals = [bias_integral(spec, 4.0, s) for s in np.linspace(0.1, 1.0, 10)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("mode", ["self_consistent", "as_printed"])
def test_kernel_scale_invariance(mode):
    spec = LimitSpec(get_kernel("epanechnikov"), linear, mode=mode)
    scaled = LimitSpec(get_kernel("epanechnikov").scaled(4.0), linear, mode=mode)
    a = limit_objective(spec, 3.0, 0.8)
    b = limit_objective(scaled, 3.0, 0.8)
    if mode == "self_consistent":
        assert a == pytest.approx(b, abs=1e-7)
    else:
        # the single normalization does not cancel the squared term
        assert a != pytest.approx(b, abs=1e-3)


def test_self_validation():
    spec = LimitSpec(get_kernel("gaussian"), sine, tol=1e-7)
    finer = LimitSpec(get_kernel("gaussian"), sine, tol=5e-8)
    for xi, s in [(3.0, 0.6), (12.0, 1.0)]:
        v1, e1 = limit_objective_with_error(spec, xi, s)
        v2, _ = limit_objective_with_error(finer, xi, s)
        assert abs(v1 - v2) <= e1


def test_argmin_sine_fine_grid():
    spec = LimitSpec(get_kernel("gaussian"), sine)
    grid = np.linspace(1, 20, 61)
    xs, rep = limit_argmin(spec, grid, 0.9)
    fine = np.linspace(1, 20, 601)
    vals = np.array([limit_objective(spec, x, 0.9) for x in fine])
    fine_star = fine[np.argmin(vals)]
    step = grid[1] - grid[0]
    assert abs(xs - fine_star) <= step / 2 + 1e-12
    # the coarse argmin is the grid point with the lowest fine-grid value
    on_grid = np.isin(np.round(fine, 9), np.round(grid, 9))
    assert xs == pytest.approx(fine[on_grid][np.argmin(vals[on_grid])])
    assert rep.value == pytest.approx(vals[on_grid].min(), abs=1e-9)


def test_injected_convex_well_separated():
    spec = LimitSpec(get_kernel("gaussian"), linear)
    grid = np.linspace(1, 9, 17)
    xs, rep = limit_argmin(spec, grid, 0.5, values=(grid - 5.0) ** 2)
    assert xs == 5.0 and rep.well_separated
    assert rep.margins[0.5] == pytest.approx(0.25)
    assert rep.margins[2.0] == pytest.approx(4.0)


def test_noiseless_constant_montecarlo():
    spec = LimitSpec(get_kernel("gaussian"), constant(1.0))
    for T in (100, 250):
        cmp = limit_vs_montecarlo(spec, 5.0, 0.75, T, 50, seed=0, sigma=0.0)
        assert cmp.mc_se == 0.0
        assert cmp.gap_self_consistent <= 2.0 / T


def test_montecarlo_preconditions():
    spec = LimitSpec(get_kernel("gaussian"), linear)
    with pytest.raises(ConfigError):
        limit_vs_montecarlo(spec, 5.0, 0.5, 50, 100, seed=0)
    with pytest.raises(ConfigError):
        limit_vs_montecarlo(spec, 5.0, 0.5, 200, 10, seed=0)


def test_montecarlo_deterministic():
    spec = LimitSpec(get_kernel("gaussian"), linear)
    a = montecarlo_objective(spec, [2.0, 5.0], [0.5, 1.0], 200, 20, seed=4, sigma=0.5)
    b = montecarlo_objective(spec, [2.0, 5.0], [0.5, 1.0], 200, 20, seed=4, sigma=0.5, chunk=7)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-9)


@pytest.mark.slow
def test_montecarlo_linear_mean():
    spec = LimitSpec(get_kernel("gaussian"), linear)
    big = limit_vs_montecarlo(spec, 5.0, 0.75, 4000, 200, seed=1, sigma=0.5)
    assert big.gap_self_consistent <= 3 * (big.mc_se + 5 / 4000)
    assert big.gap_as_printed > 10 * big.gap_self_consistent
    small = limit_vs_montecarlo(spec, 5.0, 0.75, 1000, 200, seed=1, sigma=0.5)
    assert big.gap_self_consistent < small.gap_self_consistent
