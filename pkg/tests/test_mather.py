import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog.cell import SolverConfig, effective_on_grid
from homog.errors import EmptyInput, InfeasibleWinding, MinimumOnBoundary, NonUniformGrid
from homog.hamiltonian import FiberOnly, Mechanical
from homog.mather import (
    AlphaFunction,
    aubry_beta_estimate,
    beta_from_alpha,
    beta_zero,
    biconjugate_check,
    conjugate_bruteforce,
    fenchel_transform,
    hull_slope_range,
    lower_hull,
)
from homog.torus import FourierPotential
from homog.validation import builtin_effective, builtin_spec


def hull_values_bruteforce(x, g):
    """Lower convex envelope at the nodes by checking every chord, O(N^3)."""
    env = g.copy()
    for i in range(len(x)):
        for j in range(i):
            for k in range(i + 1, len(x)):
                t = (x[i] - x[j]) / (x[k] - x[j])
                env[i] = min(env[i], (1 - t) * g[j] + t * g[k])
    return env


# transform


def test_quadratic_is_self_dual_on_nodes():
    x = np.linspace(-4, 4, 257)
    y, gs = fenchel_transform(x, 0.5 * x**2)
    inside = np.abs(y) <= 3
    assert np.max(np.abs(gs[inside] - 0.5 * y[inside] ** 2)) <= 1e-4
    assert np.max(np.abs(gs - 0.5 * y**2)) <= 1e-12


def test_quadratic_off_node_error_is_half_squared_distance():
    x = np.linspace(-4, 4, 257)
    v = np.linspace(-3, 3, 1001)
    _, gs = fenchel_transform(x, 0.5 * x**2, v)
    dist = np.min(np.abs(v[:, None] - x[None, :]), axis=1)
    assert np.allclose(gs, 0.5 * v**2 - 0.5 * dist**2, atol=1e-12)


def test_fast_matches_bruteforce_on_random_sets():
    rng = np.random.default_rng(42)
    for _ in range(50):
        m = int(rng.integers(5, 200))
        x = np.linspace(-rng.uniform(0.5, 5), rng.uniform(0.5, 5), m)
        g = np.cumsum(np.cumsum(rng.uniform(0, 1, m))) * (x[1] - x[0]) ** 2 + rng.normal() * x
        y = np.linspace(-10, 10, 301)
        assert np.max(np.abs(fenchel_transform(x, g, y)[1] - conjugate_bruteforce(x, g, y))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=40))
def test_fast_matches_bruteforce_on_arbitrary_values(vals):
    g = np.array(vals)
    x = np.linspace(-1, 1, len(g))
    y = np.linspace(-20, 20, 81)
    assert np.allclose(fenchel_transform(x, g, y)[1], conjugate_bruteforce(x, g, y), atol=1e-9)


def test_two_dimensional_transform_factorizes():
    a = np.linspace(-2, 2, 41)
    b = np.linspace(-1, 1, 21)
    g = 0.5 * a[:, None] ** 2 + b[None, :] ** 2
    (y0, y1), gs = fenchel_transform((a, b), g)
    brute = np.array(
        [[np.max(u * a[:, None] + v * b[None, :] - g) for v in y1] for u in y0]
    )
    assert np.allclose(gs, brute, atol=1e-12)


def test_transform_input_validation():
    with pytest.raises(EmptyInput):
        fenchel_transform(np.array([]), np.array([]))
    with pytest.raises(NonUniformGrid):
        fenchel_transform(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(NonUniformGrid):
        fenchel_transform(np.array([0.0, -1.0, -2.0]), np.zeros(3))


def test_lower_hull_and_slope_range():
    x = np.linspace(-1, 1, 5)
    g = np.array([1.0, 0.0, 0.5, 0.0, 1.0])
    assert lower_hull(x, g).tolist() == [0, 1, 3, 4]
    assert hull_slope_range(x, g) == (-2.0, 2.0)


# alpha, beta


def test_beta_zero_known_values():
    assert beta_zero(effective_on_grid(FiberOnly(), np.linspace(-2, 2, 65))).value == pytest.approx(0.0, abs=1e-12)
    assert beta_zero(builtin_effective("pendulum")).value == pytest.approx(-1.0, abs=1e-2)
    assert beta_zero(AlphaFunction(builtin_effective("bump"))).value == pytest.approx(0.05, abs=1e-3)


def test_beta_zero_boundary_minimum():
    eh = effective_on_grid(FiberOnly(), np.linspace(0.5, 2, 16))
    with pytest.raises(MinimumOnBoundary):
        beta_zero(eh)


def test_pendulum_beta_from_alpha():
    beta = beta_from_alpha(AlphaFunction(builtin_effective("pendulum")))
    assert float(beta(0.0)) == pytest.approx(-1.0, abs=1e-2)
    # subdifferential at h = 0 is the plateau [-4/pi, 4/pi], resolved to the
    # spacing of the alpha samples
    step = 6 / 128
    i = int(np.argmin(np.abs(beta.h)))
    assert beta.h[i] == pytest.approx(0.0, abs=1e-12)
    assert beta.sub_lo[i] == pytest.approx(-4 / np.pi, abs=2 * step)
    assert beta.sub_hi[i] == pytest.approx(4 / np.pi, abs=2 * step)


def test_alpha_superlinear_and_serialisation():
    alpha = AlphaFunction(builtin_effective("pendulum"))
    assert alpha.superlinear
    d = alpha.to_json()
    assert "c" in d and "p" not in d
    beta = beta_from_alpha(alpha)
    back = json.loads(beta.dumps())
    assert back["value"] == beta.values.tolist()
    assert beta.to_csv().splitlines()[0] == "h,value,lower,upper"


def test_two_dimensional_beta_zero():
    ax = np.linspace(-1, 1, 9)
    eh = effective_on_grid(FiberOnly(n=2, offset=-0.25), (ax, ax), config=SolverConfig(N=16))
    assert beta_zero(eh).value == pytest.approx(0.25, abs=1e-12)


# Aubry estimate


def test_aubry_free_particle():
    spec = Mechanical(FourierPotential.constant(0.0))
    assert aubry_beta_estimate(spec, 1.0) == pytest.approx(0.5, abs=1e-3)


def test_aubry_pendulum_rest():
    assert aubry_beta_estimate(builtin_spec("pendulum"), 0.0) == pytest.approx(-1.0, abs=1e-2)


def test_aubry_pendulum_rotation_matches_duality():
    beta = beta_from_alpha(AlphaFunction(builtin_effective("pendulum")))
    est = aubry_beta_estimate(builtin_spec("pendulum"), 2.0)
    assert est == pytest.approx(float(beta(2.0)), abs=2e-2)


def test_aubry_is_seed_deterministic():
    spec = builtin_spec("pendulum")
    assert aubry_beta_estimate(spec, 1.0, restarts=3, seed=7) == aubry_beta_estimate(spec, 1.0, restarts=3, seed=7)


def test_aubry_infeasible_winding():
    with pytest.raises(InfeasibleWinding):
        aubry_beta_estimate(builtin_spec("pendulum"), 0.01)


# biconjugate


def test_biconjugate_of_quadratic_is_exact():
    h = np.linspace(-2, 2, 81)
    assert biconjugate_check(0.5 * h**2, h).max_gap <= 1e-12


def test_biconjugate_of_pendulum_beta():
    rep = biconjugate_check(beta_from_alpha(AlphaFunction(builtin_effective("pendulum"))))
    assert rep.passed and rep.max_gap <= 1e-8


def test_biconjugate_gap_equals_hull_distance():
    h = np.linspace(-2, 2, 41)
    b = 0.5 * h**2
    b[15] += 0.1
    b[30] += 0.3
    rep = biconjugate_check(b, h)
    expected = float(np.max(b - hull_values_bruteforce(h, b)))
    assert rep.max_gap == pytest.approx(expected, abs=1e-12)
    assert rep.max_gap > 0 and not rep.passed
