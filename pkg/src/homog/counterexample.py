"""Bump Hamiltonian whose asymptotic gamma-distance is strictly below its asymptotic Hofer distance.

``H(q, p) = gamma(q) (|p|^2 - 1)`` with ``gamma`` equal to ``C`` on a small
cube and to ``c`` away from it.  Homogenization sees only the floor ``c``,
while the Calabi invariant sees the plateau ``C``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .cell import CorrectorField, SolverConfig, effective_on_grid, homogenize_1d_quadrature, subsolution_certificate
from .errors import CutoffOverlap, DeltaTooLarge, SpecError, SufficiencyViolated
from .hamiltonian import HamiltonianSpec, ProductForm, apply_truncation, make_truncation
from .mather import beta_zero
from .metrics import BALL_VOLUME, UnitBall, calabi_invariant, gamma_asymptotic
from .torus import PeriodicField, PlateauBump, TorusGrid, smoothstep5


@dataclass(frozen=True)
class BumpProfile:
    delta: float = 0.25
    C: float = 10.0
    c: float = 0.05
    n: int = 1
    smoothing: str = "smoothstep5"

    def __post_init__(self):
        if not 0 < self.delta:
            raise SpecError(f"delta must be positive, got {self.delta}")
        if self.delta >= 1.0 / 3.0:
            raise DeltaTooLarge(f"delta must be below 1/3, got {self.delta}")
        if self.n not in (1, 2):
            raise SpecError(f"dimension must be 1 or 2, got {self.n}")
        if self.c < 0 or self.C < self.c:
            raise SpecError("need C >= c >= 0")

    def gamma(self) -> PlateauBump:
        if not self.C > self.c > 0:
            raise SpecError("the bump needs C > c > 0")
        return PlateauBump(self.delta, self.C, self.c, self.n)

    def spec(self) -> ProductForm:
        return ProductForm(self.gamma())

    def sufficient(self) -> bool:
        """``c < delta^n C k / V_n``: the Calabi bound then beats the floor."""
        return self.c < self.delta**self.n * self.C * unit_ball_moment(self.n, check=False) / BALL_VOLUME[self.n]


def make_gamma_bump(profile: BumpProfile, grid: TorusGrid) -> PeriodicField:
    """Nodal samples of the plateau bump, with its invariants verified on the grid."""
    if grid.n != profile.n:
        raise SpecError("grid and profile dimensions differ")
    g = profile.gamma()
    vals = g.on_grid(grid)
    q = grid.points()
    dist = np.max(np.abs(q - 0.5), axis=-1).reshape(grid.shape)
    tol = 1e-12 * profile.C
    inner = dist <= profile.delta / 2
    outer = dist >= profile.delta
    if np.any(np.abs(vals[inner] - profile.C) > tol) or np.any(np.abs(vals[outer] - profile.c) > tol):
        raise SpecError("bump misses its plateau or floor value on the grid")
    if vals.min() < profile.c - tol or vals.max() > profile.C + tol:
        raise SpecError("bump leaves [c, C] on the grid")
    return PeriodicField(grid, vals)


def unit_ball_moment(n: int, check: bool = True) -> float:
    """``k = int_{|p| <= 1} (1 - |p|^2) dp = 2 V_n / (n + 2)``."""
    if n not in BALL_VOLUME:
        raise SpecError(f"dimension must be 1 or 2, got {n}")
    k = 2.0 * BALL_VOLUME[n] / (n + 2)
    if check:
        if n == 1:
            num, _ = quad(lambda p: 1 - p * p, -1, 1, epsabs=1e-14)
        else:
            num, _ = quad(lambda r: 2 * np.pi * (1 - r * r) * r, 0, 1, epsabs=1e-14)
        if abs(num - k) > 1e-8:
            raise ArithmeticError(f"moment quadrature {num} disagrees with closed form {k}")
    return k


def calabi_lower_bound_counterexample(profile: BumpProfile, n: int | None = None) -> float:
    """``[delta^n C + c (1 - 2^n delta^n)] k``, valid since gamma dominates the step profile."""
    n = profile.n if n is None else n
    d = profile.delta**n
    return (d * profile.C + profile.c * (1 - 2**n * d)) * unit_ball_moment(n, check=False)


@dataclass
class TestLagrangianResult:
    __test__ = False  # not a pytest class despite the name

    bound: float
    corrector: CorrectorField
    direction: tuple


def _cutoff(profile, grid):
    """Smooth cutoff: 1 on the cube of side 2 delta, 0 beyond a collar of width w."""
    w = min(profile.delta / 2, (1 - 2 * profile.delta) / 4)
    if 2 * profile.delta + 2 * w >= 1:
        raise CutoffOverlap("cutoff support wraps around the torus")
    d = np.abs(grid.points() - 0.5)
    chi = np.prod(1 - smoothstep5((d - profile.delta) / w), axis=-1)
    return chi, w


def test_lagrangian_bound(profile: BumpProfile, p, N: int | None = None, u=None) -> TestLagrangianResult:
    """``sup_q -H(q, p + df)`` for ``f = <u - p, q - centre>`` cut off outside the bigger cube.

    On that cube ``|p + df| = |u| = 1`` so ``H = 0``; elsewhere ``gamma = c``
    and ``-H <= c``.  The value bounds ``-H_bar(p)`` from above.
    """
    n = profile.n
    p = np.asarray(p, dtype=float).reshape(n)
    if u is None:
        norm = np.linalg.norm(p)
        u = p / norm if norm > 0 else np.eye(n)[0]
    u = np.asarray(u, dtype=float).reshape(n)
    if abs(np.linalg.norm(u) - 1) > 1e-12:
        raise SpecError("test direction must be a unit vector")
    grid = TorusGrid(n, N or (1024 if n == 1 else 128))
    chi, _ = _cutoff(profile, grid)
    lin = (grid.points() - 0.5) @ (u - p)
    corr = CorrectorField.from_values(grid, chi * lin)
    spec = profile.spec()
    vals = spec.h(grid.points(), p + corr.du)
    return TestLagrangianResult(float(np.max(-vals)), corr, tuple(u.tolist()))


test_lagrangian_bound.__test__ = False


@dataclass
class CounterexampleCertificate:
    parameters: dict
    gamma_inf: float
    gamma_inf_upper: float
    gamma_gap: float
    test_lagrangian_bound: float
    test_lagrangian_certified: bool
    beta0: float
    beta0_gap: float
    calabi: float
    calabi_analytic: float
    calabi_quadrature_error: float
    hofer_lower: float
    hofer_lower_source: str
    sufficiency: bool
    margin: float
    verdict: bool
    exceeds_beta0: bool
    quadrature_agreement: float | None = None
    smoothing: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def summary(self) -> str:
        rows = [
            ("gamma_inf (upper)", self.gamma_inf_upper, self.provenance.get("gamma_inf", "")),
            ("test Lagrangian bound", self.test_lagrangian_bound, "analytic corrector"),
            ("beta(0)", self.beta0, self.provenance.get("beta0", "")),
            ("|Cal| quadrature", abs(self.calabi), "quadrature"),
            ("|Cal| analytic bound", self.calabi_analytic, "analytic"),
            ("Hofer lower bound", self.hofer_lower, self.hofer_lower_source),
            ("margin", self.margin, "hofer_lower - gamma_inf_upper"),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{name:<{width}}  {val:>12.6f}  {src}" for name, val, src in rows]
        lines.append(f"{'verdict':<{width}}  {str(self.verdict):>12}")
        lines.append(f"{'d_inf > beta(0)':<{width}}  {str(self.exceeds_beta0):>12}")
        return "\n".join(lines)


def verify_strict_inequality(
    profile: BumpProfile,
    p_grid=None,
    config: SolverConfig | None = None,
    truncated: bool = False,
    eps: float = 1e-3,
    quad_samples: int = 17,
) -> CounterexampleCertificate:
    """Assemble every side of ``gamma_inf < Hofer lower bound`` for the bump.

    ``truncated=True`` runs the same chain on ``f_{0,eps}(H)``, the variant
    supported in a neighbourhood of the unit co-ball bundle.
    """
    if not profile.sufficient():
        raise SufficiencyViolated(
            f"c={profile.c} is not below delta^n C k / V_n = "
            f"{profile.delta**profile.n * profile.C * unit_ball_moment(profile.n, False) / BALL_VOLUME[profile.n]:.6g}"
        )
    n = profile.n
    cfg = config or SolverConfig(N=64 if n == 1 else 16)
    base = profile.spec()
    make_gamma_bump(profile, TorusGrid(n, 256 if n == 1 else 64))
    spec: HamiltonianSpec = apply_truncation(base, make_truncation(0.0, eps)) if truncated else base

    if p_grid is None:
        p_grid = np.linspace(-1.5, 1.5, 129) if n == 1 else (np.linspace(-1.5, 1.5, 13),) * 2
    eh = effective_on_grid(spec, p_grid, "minimax", cfg)

    agreement = None
    if n == 1:
        P = np.asarray(eh.p)
        idx = np.unique(np.linspace(0, len(P) - 1, quad_samples).round().astype(int))
        agreement = float(max(abs(homogenize_1d_quadrature(spec, P[i]) - eh.value[i]) for i in idx))

    g = gamma_asymptotic(eh, UnitBall())
    gamma_upper = float(g.c_plus - np.min(eh.lower))
    b0 = beta_zero(eh)

    # sup over samples of the test-Lagrangian bound on -H_bar
    probes = [np.zeros(n)] + [np.eye(n)[0] * t for t in (0.5, 1.0)]
    tl = [test_lagrangian_bound(profile, pp) for pp in probes]
    tl_bound = max(t.bound for t in tl)
    tl_ok = all(
        subsolution_certificate(base, pp, t.corrector, -t.bound, direction="super") for pp, t in zip(probes, tl)
    )

    cal = calabi_invariant(spec) if truncated else calabi_invariant(spec, UnitBall())
    cal_err = 1e-8 * max(abs(cal), 1.0)
    analytic = calabi_lower_bound_counterexample(profile)
    vol = BALL_VOLUME[n]
    if abs(cal) - cal_err >= analytic:
        hofer_lower, source = (abs(cal) - cal_err) / vol, "calabi quadrature"
    else:
        hofer_lower, source = analytic / vol, "calabi analytic bound"

    gap_total = float(np.max(eh.gap))
    margin = hofer_lower - gamma_upper
    exceeds_beta0 = hofer_lower > b0.value + b0.gap
    verdict = bool(gamma_upper + gap_total < hofer_lower and exceeds_beta0)
    return CounterexampleCertificate(
        parameters={"n": n, "delta": profile.delta, "C": profile.C, "c": profile.c, "truncated": truncated},
        gamma_inf=g.gamma,
        gamma_inf_upper=gamma_upper,
        gamma_gap=gap_total,
        test_lagrangian_bound=tl_bound,
        test_lagrangian_certified=bool(tl_ok),
        beta0=b0.value,
        beta0_gap=b0.gap,
        calabi=cal,
        calabi_analytic=analytic,
        calabi_quadrature_error=cal_err,
        hofer_lower=hofer_lower,
        hofer_lower_source=source,
        sufficiency=True,
        margin=margin,
        verdict=verdict,
        exceeds_beta0=bool(exceeds_beta0),
        quadrature_agreement=agreement,
        smoothing={
            "gamma": f"product of 1 - {profile.smoothing} ramps over the collar between the two cubes",
            "cutoff": "smoothstep5 over a collar of width min(delta/2, (1-2 delta)/4)",
            "extension": f"quintic truncation at level 0, eps={eps}" if truncated else "none",
        },
        provenance={
            "gamma_inf": "minimax lower bounds, c_plus = 0 on the unit sphere",
            "beta0": "quadratic refinement of the sampled minimum",
            "quadrature_agreement": "1D fiber-root quadrature" if n == 1 else "n/a",
            "hofer_lower": source,
        },
    )
