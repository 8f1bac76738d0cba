import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog.errors import InvalidWidth, NotSuperlinear, OutOfFiberBox, SpecError, UnboundedRegion
from homog.hamiltonian import (
    Ball,
    Box,
    FiberOnly,
    Mechanical,
    ProductForm,
    Sheared,
    Tabulated,
    Truncated,
    apply_truncation,
    eval_h,
    grad_p,
    grad_q,
    legendre_lagrangian,
    load_spec,
    make_truncation,
    oscillation,
    spec_from_json,
    spec_to_json,
)
from homog.torus import FourierPotential, PlateauBump, TorusGrid
from homog.validation import builtin_spec, centered_difference

PEND = Mechanical(FourierPotential.cosine(1.0))
BUMP = ProductForm(PlateauBump(0.25, 10.0, 0.05))
UNIT = ProductForm(FourierPotential.constant(1.0))


def quadratic_table(N=16, M=81, P=4.0):
    grid = TorusGrid(1, N)
    p = np.linspace(-P, P, M)
    q = grid.axis
    vals = 0.5 * p[None, :] ** 2 + 0.2 * np.cos(2 * np.pi * q)[:, None]
    return Tabulated(grid, vals, P)


# evaluation


def test_eval_h_known_values():
    assert eval_h(FiberOnly(), 0.3, 0.0) == 0.0
    assert eval_h(UNIT, 0.5, 1.0) == pytest.approx(0.0)
    assert eval_h(PEND, 0.0, 1.0) == pytest.approx(1.5)


def test_eval_h_vectorised():
    q = np.linspace(0, 1, 5)[:, None]
    p = np.full((5, 1), 2.0)
    assert np.allclose(eval_h(PEND, q, p), 2 + np.cos(2 * np.pi * q[:, 0]))


def test_tabulated_out_of_box():
    tab = quadratic_table()
    with pytest.raises(OutOfFiberBox):
        eval_h(tab, 0.1, 4.5)


def test_tabulated_matches_analytic_inside_box():
    tab = quadratic_table(N=64, M=401)
    q = np.array([[0.0], [0.25], [0.5]])
    p = np.array([[0.0], [1.0], [-2.0]])
    exact = 0.5 * p[:, 0] ** 2 + 0.2 * np.cos(2 * np.pi * q[:, 0])
    assert np.allclose(tab.h(q, p), exact, atol=1e-3)
    assert tab.convex


def test_non_finite_fiber_rejected():
    with pytest.raises(ValueError):
        eval_h(PEND, 0.0, np.nan)


# gradients


def test_grad_p_known_values():
    assert np.squeeze(grad_p(FiberOnly(), 0.0, 2.0)) == pytest.approx(2.0)
    c = 0.7
    spec = ProductForm(FourierPotential.constant(c))
    assert np.squeeze(grad_p(spec, 0.3, 1.0)) == pytest.approx(2 * c)


def test_grad_q_pendulum_against_difference():
    exact = np.squeeze(grad_q(PEND, 0.25, 0.0))
    fd = centered_difference(lambda x: PEND.h(np.array([[x]]), np.array([[0.0]]))[0], 0.25)
    assert exact == pytest.approx(-2 * np.pi)
    assert exact == pytest.approx(fd, abs=1e-6)


def test_tabulated_gradients_against_difference():
    tab = quadratic_table(N=64, M=401)
    q = np.array([[0.1]])
    p = np.array([[0.51]])
    assert tab.grad_p(q, p)[0, 0] == pytest.approx(0.51, abs=2e-2)


# Lagrangian


def test_lagrangian_known_values():
    L, pstar = legendre_lagrangian(Mechanical(FourierPotential.constant(0.0)), 0.3, 1.0)
    assert L == pytest.approx(0.5) and pstar[0] == pytest.approx(1.0)
    assert legendre_lagrangian(PEND, 0.0, 0.0)[0] == pytest.approx(-1.0)
    L, pstar = legendre_lagrangian(UNIT, 0.4, 0.0)
    assert L == pytest.approx(1.0) and pstar[0] == pytest.approx(0.0)


def test_lagrangian_fenchel_young_equality():
    rng = np.random.default_rng(3)
    for spec in (PEND, BUMP, FiberOnly(form="power", k=3.0)):
        q = rng.uniform(size=(20, 1))
        v = rng.uniform(-2, 2, size=(20, 1))
        L, pstar = spec.lagrangian(q, v)
        assert np.allclose(L, pstar[:, 0] * v[:, 0] - spec.h(q, pstar), atol=1e-9)


def test_tabulated_lagrangian_not_superlinear_at_box_edge():
    tab = quadratic_table()
    with pytest.raises(NotSuperlinear):
        tab.lagrangian(np.array([[0.2]]), np.array([[10.0]]))


# truncation


def test_truncation_identity_and_plateau():
    f = make_truncation(1.0, 0.1)
    assert f(0.5) == 0.5
    assert f(2.0) == 1.0


def test_truncation_is_one_lipschitz_on_dense_sweep():
    for shape in ("quintic", "septic"):
        f = make_truncation(1.0, 0.1, shape)
        s = np.linspace(0.5, 1.5, 100_001)
        assert np.max(np.abs(f.d(s))) <= 1.0 + 1e-12
        assert np.max(np.abs(np.diff(f(s)) / np.diff(s))) <= 1.0 + 1e-9


@pytest.mark.parametrize("eps", [0.0, -0.1])
def test_truncation_rejects_width(eps):
    with pytest.raises(InvalidWidth):
        make_truncation(1.0, eps)


def test_truncated_spec_agrees_below_level():
    tr = apply_truncation(PEND, make_truncation(2.0, 0.1))
    assert isinstance(tr, Truncated)
    q = np.array([[0.5], [0.0]])
    p = np.array([[0.5], [3.0]])
    assert tr.h(q, p)[0] == pytest.approx(PEND.h(q, p)[0])
    assert tr.h(q, p)[1] == pytest.approx(2.0)


def test_truncated_tabulated_stays_tabulated():
    tab = quadratic_table()
    assert isinstance(apply_truncation(tab, make_truncation(1.0, 0.2)), Tabulated)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1.0), st.floats(-10, 10))
def test_truncation_bounds(r, eps, s):
    f = make_truncation(r, eps)
    v = float(f(s))
    assert v <= r + eps + 1e-12
    assert v <= s + 1e-12 or s > r
    if s <= r:
        assert v == s
    if s >= r + eps:
        assert v == r


# oscillation


def test_oscillation_constant_field_is_zero():
    assert oscillation(FourierPotential.constant(3.0)).value == 0.0


def test_oscillation_truncated_pendulum():
    res = oscillation(apply_truncation(PEND, make_truncation(2.0, 0.1)))
    assert 3.0 <= res.value <= 3.1
    assert res.vmin == pytest.approx(-1.0, abs=1e-9)
    assert res.vmax <= 2.1


def test_oscillation_bump_on_unit_ball():
    res = oscillation(BUMP, Ball(1.0))
    assert res.value == pytest.approx(10.0, abs=1e-8)


def test_oscillation_box_and_discrepancy():
    res = oscillation(PEND, Box(1.0))
    assert res.value == pytest.approx(2.5, abs=1e-8)
    assert res.discrepancy < 1e-2


def test_oscillation_unbounded():
    with pytest.raises(UnboundedRegion):
        oscillation(PEND)


# construction and JSON


def test_product_form_rejects_negative_gamma():
    with pytest.raises(SpecError):
        ProductForm(FourierPotential(1, (((0,), 0.1, 0.0), ((1,), 1.0, 0.0))))


def test_product_form_superlinear_flag():
    assert BUMP.superlinear
    assert not ProductForm(FourierPotential(1, (((0,), 1.0, 0.0), ((1,), 1.0, 0.0)))).superlinear


def test_fiber_only_rejects_bad_parameters():
    with pytest.raises(SpecError):
        FiberOnly(a=0.0)
    with pytest.raises(SpecError):
        FiberOnly(form="power", k=1.0)
    with pytest.raises(SpecError):
        FiberOnly(form="cubic")


def test_unknown_kind():
    with pytest.raises(SpecError):
        spec_from_json({"kind": "nope"})


@pytest.mark.parametrize(
    "spec",
    [
        PEND,
        BUMP,
        FiberOnly(a=2.0, center=[0.3], offset=-0.1),
        FiberOnly(form="power", k=4.0),
        apply_truncation(PEND, make_truncation(2.0, 0.1, "septic")),
        Sheared(PEND, FourierPotential(1, (((1,), 0.0, 0.1),))),
        quadratic_table(),
        Mechanical(FourierPotential(2, (((1, 0), 1.0, 0.0), ((0, 1), 0.5, 0.0)))),
    ],
    ids=lambda s: s.kind,
)
def test_json_roundtrip(spec, tmp_path):
    doc = spec_to_json(spec)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    back = load_spec(path)
    assert back.digest() == spec.digest()
    rng = np.random.default_rng(0)
    q = rng.uniform(size=(10, spec.n))
    p = rng.uniform(-1.5, 1.5, size=(10, spec.n))
    assert np.allclose(back.h(q, p), spec.h(q, p))


def test_digest_distinguishes_specs():
    assert PEND.digest() != BUMP.digest()
    assert PEND.digest() == builtin_spec("pendulum").digest()


def test_sheared_gradients_against_difference():
    spec = Sheared(PEND, FourierPotential(1, (((1,), 0.0, 0.1), ((2,), 0.05, 0.0))))
    q = np.array([[0.31]])
    p = np.array([[0.7]])
    fd_q = centered_difference(lambda x: spec.h(np.array([[x]]), p)[0], 0.31)
    fd_p = centered_difference(lambda x: spec.h(q, np.array([[x]]))[0], 0.7)
    assert spec.grad_q(q, p)[0, 0] == pytest.approx(fd_q, abs=1e-6)
    assert spec.grad_p(q, p)[0, 0] == pytest.approx(fd_p, abs=1e-6)
