import json

import numpy as np
import pytest

from homog.cell import EffectiveHamiltonian
from homog.errors import ExtensionNotVanishing, NotCompactlySupported, PlateauNotReached, SpecError
from homog.hamiltonian import FiberOnly, ProductForm, apply_truncation, make_truncation
from homog.metrics import (
    Sublevel,
    UnitBall,
    c_pm_asymptotic,
    calabi_extension_limit,
    calabi_invariant,
    gamma_asymptotic,
    hofer_length,
    hofer_length_limit,
    hofer_lower_bound_calabi,
    metrics_report,
    parse_region,
    richardson,
    siburg_extension,
)
from homog.torus import FourierPotential
from homog.validation import builtin_effective, builtin_spec

PEND = builtin_spec("pendulum")
BUMP = builtin_spec("bump")
UNIT = ProductForm(FourierPotential.constant(1.0))
ZERO = ProductForm(FourierPotential.constant(0.0))

# closed form of int gamma for the plateau bump: c + (C - c) * 3 delta / 2
BUMP_CALABI = -(4 / 3) * 3.78125


def synthetic(p, v):
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    return EffectiveHamiltonian(p, v, v, v, "synthetic")


# regions and helpers


def test_parse_region():
    assert parse_region("unit-ball") == UnitBall()
    assert parse_region("sublevel:2.5") == Sublevel(2.5)
    with pytest.raises(ValueError):
        parse_region("ball")


def test_richardson_removes_first_and_second_order_terms():
    eps = 0.1 * 2.0 ** -np.arange(5)
    assert richardson(3 + 2 * eps + 5 * eps**2) == pytest.approx(3.0, abs=1e-12)
    assert richardson([1.0, 2.0]) == 2.0


# Hofer length


def test_hofer_length_limits():
    integ, _ = hofer_length_limit(FiberOnly(), 1.0)
    assert integ == pytest.approx(1.0, abs=1e-6)
    pend, lengths = hofer_length_limit(PEND, 2.0)
    assert pend == pytest.approx(3.0, abs=1e-6)
    eps = 0.1 * 2.0 ** -np.arange(7)
    assert all(3.0 - 1e-9 <= L <= 3.0 + e for L, e in zip(lengths, eps))


def test_hofer_length_siburg_bump():
    for eps in (0.1, 0.025):
        L = hofer_length(siburg_extension(BUMP, eps))
        assert 10.0 - 1e-9 <= L <= 10.0 + eps


def test_hofer_length_needs_compact_support():
    with pytest.raises(NotCompactlySupported):
        hofer_length(PEND)


# Calabi


def test_calabi_zero():
    assert calabi_invariant(ZERO, UnitBall()) == 0.0


def test_calabi_unit_product_one_and_two_dimensions():
    assert calabi_invariant(UNIT, UnitBall()) == pytest.approx(-4 / 3, rel=1e-10)
    unit2 = ProductForm(FourierPotential.constant(1.0, n=2))
    assert calabi_invariant(unit2, UnitBall()) == pytest.approx(-np.pi / 2, rel=1e-8)


def test_calabi_bump_closed_form():
    cal = calabi_invariant(BUMP, UnitBall())
    assert cal == pytest.approx(BUMP_CALABI, rel=1e-9)
    assert (4 / 3) * 2.525 <= abs(cal) <= (4 / 3) * 5.05


def test_calabi_truncated_support_integral():
    # f_{1, eps}(p^2/2) - 1 vanishes outside the support and equals p^2/2 - 1
    # on |p| <= sqrt 2, where it integrates to -4 sqrt(2) / 3
    cal = calabi_invariant(apply_truncation(FiberOnly(), make_truncation(1.0, 1e-4)))
    exact = -4 * np.sqrt(2) / 3
    assert cal == pytest.approx(exact, abs=1e-4)


def test_hofer_lower_bound_from_calabi():
    assert hofer_lower_bound_calabi(0.0, 1) == 0.0
    assert hofer_lower_bound_calabi(-4 / 3, 1) == pytest.approx(2 / 3)
    assert hofer_lower_bound_calabi(BUMP_CALABI, 1) >= (2 / 3) * 2.525
    with pytest.raises(SpecError):
        hofer_lower_bound_calabi(1.0, 3)


# extension


def test_siburg_extension_requires_vanishing_on_sphere():
    with pytest.raises(ExtensionNotVanishing):
        siburg_extension(PEND, 0.1)


def test_siburg_extension_bounds():
    ext = siburg_extension(BUMP, 0.05)
    q = np.linspace(0, 1, 33)[:, None]
    inside = np.linspace(-1, 1, 21)[:, None]
    assert np.allclose(ext.h(q[:, None], inside[None]), BUMP.h(q[:, None], inside[None]))


def test_extension_limit_zero_and_bump():
    assert calabi_extension_limit(ZERO).differences == [0.0] * 7
    rep = calabi_extension_limit(BUMP)
    assert rep.monotone and rep.passed and rep.differences[-1] <= 1e-3
    json.dumps(rep.to_json())


def test_extension_limit_unit_product_strip_bound():
    eps = (0.1, 0.05, 0.025)
    rep = calabi_extension_limit(UNIT, eps)
    for e, d in zip(eps, rep.differences):
        # 0 <= H_eps <= eps on the strip 1 < |p| < sqrt(1 + eps)
        assert d <= e * 2 * (np.sqrt(1 + e) - 1) + 1e-9


# spectral invariants


def test_c_pm_known_values():
    assert tuple(c_pm_asymptotic(builtin_effective("pendulum"), Sublevel(2.0))) == pytest.approx((2.0, 1.0), abs=1e-2)
    assert tuple(c_pm_asymptotic(builtin_effective("integrable"), Sublevel(1.0))) == pytest.approx((1.0, 0.0), abs=1e-9)
    cp, cm = c_pm_asymptotic(builtin_effective("bump"), UnitBall())
    assert cp == 0.0 and cm == pytest.approx(-0.05, abs=1e-3)


def test_c_pm_plateau_not_reached():
    eh = synthetic(np.linspace(-1, 1, 9), 1 + 0.1 * np.linspace(-1, 1, 9) ** 2)
    with pytest.raises(PlateauNotReached):
        c_pm_asymptotic(eh, Sublevel(2.0))
    with pytest.raises(PlateauNotReached):
        c_pm_asymptotic(synthetic([-0.5, 0.0, 0.5], [-0.2, -0.3, -0.2]), UnitBall())
    with pytest.raises(SpecError):
        c_pm_asymptotic(eh, Sublevel(0.5))


def test_gamma_identity_values():
    pend = gamma_asymptotic(builtin_effective("pendulum"), Sublevel(2.0))
    assert pend.gamma == pytest.approx(1.0, abs=2e-2) and pend.residual <= 2e-2
    integ = gamma_asymptotic(builtin_effective("integrable"), Sublevel(1.0))
    assert integ.gamma == pytest.approx(1.0, abs=1e-9) and integ.beta0 == pytest.approx(0.0, abs=1e-12)
    bump = gamma_asymptotic(builtin_effective("bump"), UnitBall())
    assert bump.gamma == pytest.approx(0.05, abs=2e-3)
    assert bump.gamma == pytest.approx(bump.beta0, abs=2e-3)


# report


def test_metrics_report_pendulum():
    eh = builtin_effective("pendulum")
    rep = metrics_report(PEND, Sublevel(2.0), eh.p, eh=eh)
    assert rep.gamma_inf == pytest.approx(1.0, abs=2e-2)
    assert rep.beta0 == pytest.approx(-1.0, abs=1e-2)
    assert rep.hofer_upper == pytest.approx(3.0, abs=1e-6)
    assert rep.ordering_slack >= 0
    doc = json.loads(rep.dumps())
    assert list(doc) == sorted(doc)
    assert doc["region"] == {"kind": "sublevel", "r": 2.0}
    assert rep.to_csv().splitlines()[0] == "quantity,value,lower,upper"


def test_metrics_report_bump_uses_calabi_bound():
    eh = builtin_effective("bump")
    rep = metrics_report(BUMP, UnitBall(), eh.p, eh=eh)
    assert rep.hofer_lower_source == "calabi"
    assert rep.hofer_lower == pytest.approx(abs(BUMP_CALABI) / 2, rel=1e-9)
    assert rep.gamma_inf <= rep.hofer_lower <= rep.hofer_upper + 1e-9
