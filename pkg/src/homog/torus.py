"""Grids on the flat torus and periodic scalar functions living on it.

Points on the torus are arrays whose trailing axis has length ``n`` (1 or 2).
Every periodic function here exposes the same small surface: ``__call__``,
``grad``, ``on_grid``, ``breakpoints`` and ``to_json``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SpecError


def as_points(x, n: int) -> np.ndarray:
    """Coerce ``x`` to a float array with trailing axis ``n``.

    For ``n == 1`` scalars and flat sequences are accepted and get a trailing
    axis appended.
    """
    a = np.asarray(x, dtype=float)
    if n == 1 and (a.ndim == 0 or a.shape[-1] != 1):
        return a[..., None]
    if a.shape[-1] != n:
        raise SpecError(f"expected trailing axis of length {n}, got shape {a.shape}")
    return a


def fold(q: np.ndarray) -> np.ndarray:
    return np.mod(q, 1.0)


@dataclass(frozen=True)
class TorusGrid:
    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise SpecError(f"torus dimension must be 1 or 2, got {self.n}")
        if self.N < 16 or self.N & (self.N - 1):
            raise SpecError(f"points per axis must be a power of two >= 16, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    def points(self) -> np.ndarray:
        """Nodes as a ``(N**n, n)`` array in row-major order."""
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def wavenumbers(self) -> list[np.ndarray]:
        """Integer wavenumbers per axis, broadcastable to ``shape``."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        out = []
        for a in range(self.n):
            sh = [1] * self.n
            sh[a] = self.N
            out.append(k.reshape(sh))
        return out

    def refine(self) -> "TorusGrid":
        return TorusGrid(self.n, 2 * self.N)

    def to_json(self) -> dict:
        return {"n": self.n, "N": self.N}

    @classmethod
    def from_json(cls, d) -> "TorusGrid":
        return cls(int(d["n"]), int(d["N"]))


def spectral_gradient(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Trigonometric derivative of nodal values; Nyquist modes are dropped.

    ``values`` has shape ``grid.shape``; result has shape ``grid.shape + (n,)``.
    """
    vhat = np.fft.fftn(values)
    out = []
    for a, k in enumerate(grid.wavenumbers()):
        kk = k.copy()
        kk[np.abs(kk) == grid.N // 2] = 0.0
        out.append(np.fft.ifftn(2j * np.pi * kk * vhat).real)
    return np.stack(out, axis=-1)


def centered_gradient(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    out = [
        (np.roll(values, -1, axis=a) - np.roll(values, 1, axis=a)) / (2 * grid.h)
        for a in range(grid.n)
    ]
    return np.stack(out, axis=-1)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Nodal samples of a periodic function; off-grid values by trigonometric interpolation."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise SpecError("periodic field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.grid.n

    @cached_property
    def _coeffs(self):
        # Nyquist coefficient is split symmetrically so the interpolant stays real.
        c = np.fft.fftn(self.values) / self.grid.size
        k = np.fft.fftfreq(self.grid.N, 1.0 / self.grid.N)
        idx = np.stack(np.meshgrid(*([k] * self.n), indexing="ij"), axis=-1).reshape(-1, self.n)
        c = c.ravel()
        for a in range(self.n):
            nyq = idx[:, a] == -self.grid.N // 2
            c = np.where(nyq, 0.5 * c, c)
            mirrored = idx[nyq].copy()
            mirrored[:, a] = self.grid.N // 2
            idx = np.concatenate([idx, mirrored])
            c = np.concatenate([c, c[nyq]])
        return idx, c

    def __call__(self, q) -> np.ndarray:
        q = as_points(q, self.n)
        k, c = self._coeffs
        phase = np.exp(2j * np.pi * (q.reshape(-1, self.n) @ k.T))
        return (phase @ c).real.reshape(q.shape[:-1])

    def grad(self, q) -> np.ndarray:
        q = as_points(q, self.n)
        k, c = self._coeffs
        phase = np.exp(2j * np.pi * (q.reshape(-1, self.n) @ k.T))
        g = np.stack([(phase @ (2j * np.pi * k[:, a] * c)).real for a in range(self.n)], axis=-1)
        return g.reshape(q.shape)

    def derivative(self, scheme: str = "spectral") -> np.ndarray:
        """Nodal gradient, shape ``grid.shape + (n,)``."""
        if scheme == "spectral":
            return spectral_gradient(self.grid, self.values)
        if scheme == "centered":
            return centered_gradient(self.grid, self.values)
        raise ValueError(f"unknown differentiation scheme {scheme!r}")

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        if grid == self.grid:
            return self.values.copy()
        return self(grid.points()).reshape(grid.shape)

    def mean(self) -> float:
        return float(self.values.mean())

    def breakpoints(self) -> list:
        return [[] for _ in range(self.n)]

    def to_json(self) -> dict:
        return {"kind": "field", "grid": self.grid.to_json(), "values": self.values.ravel().tolist()}


@dataclass(frozen=True)
class FourierPotential:
    """Finite trigonometric sum ``sum a cos(2 pi k.q) + b sin(2 pi k.q)``.

    ``modes`` is a tuple of ``(k, a, b)`` with ``k`` an integer tuple of length n.
    """

    n: int
    modes: tuple

    def __post_init__(self):
        modes = tuple((tuple(int(x) for x in k), float(a), float(b)) for k, a, b in self.modes)
        for k, _, _ in modes:
            if len(k) != self.n:
                raise SpecError(f"mode {k} does not match dimension {self.n}")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def cosine(cls, amplitude=1.0, n=1, k=None):
        k = k or (1,) + (0,) * (n - 1)
        return cls(n, ((k, amplitude, 0.0),))

    @classmethod
    def constant(cls, value, n=1):
        return cls(n, (((0,) * n, value, 0.0),))

    def _phases(self, q):
        q = as_points(q, self.n)
        K = np.array([m[0] for m in self.modes], dtype=float).reshape(-1, self.n)
        return q, K, 2 * np.pi * (q @ K.T)

    def __call__(self, q) -> np.ndarray:
        q, K, th = self._phases(q)
        a = np.array([m[1] for m in self.modes])
        b = np.array([m[2] for m in self.modes])
        return np.cos(th) @ a + np.sin(th) @ b

    def grad(self, q) -> np.ndarray:
        q, K, th = self._phases(q)
        a = np.array([m[1] for m in self.modes])
        b = np.array([m[2] for m in self.modes])
        s = -np.sin(th) * a + np.cos(th) * b
        return 2 * np.pi * (s @ K)

    def hessian(self, q) -> np.ndarray:
        q, K, th = self._phases(q)
        a = np.array([m[1] for m in self.modes])
        b = np.array([m[2] for m in self.modes])
        s = -(np.cos(th) * a + np.sin(th) * b) * (2 * np.pi) ** 2
        return np.einsum("...m,mi,mj->...ij", s, K, K)

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        return self(grid.points()).reshape(grid.shape)

    def breakpoints(self) -> list:
        return [[] for _ in range(self.n)]

    def to_json(self) -> dict:
        return {
            "kind": "fourier",
            "n": self.n,
            "modes": [{"k": list(k), "cos": a, "sin": b} for k, a, b in self.modes],
        }


def smoothstep5(t):
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]; C^2."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6 * t - 15) + 10)


def _smoothstep5_d(t):
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30 * t * t * (t - 1) ** 2, 0.0)


@dataclass(frozen=True)
class PlateauBump:
    """Smooth plateau: ``C`` on the centred cube of side ``delta``, ``c`` off the cube of side ``2 delta``.

    The profile is a product over axes of ``1 - smoothstep5`` in the distance to
    the inner interval, so it is C^2 and monotone along every ray from the centre.
    """

    delta: float
    C: float
    c: float
    n: int = 1

    def _axis_profile(self, q):
        d = np.abs(fold(q) - 0.5)
        half = self.delta / 2
        t = (d - half) / half
        return 1.0 - smoothstep5(t), -_smoothstep5_d(t) / half * np.sign(fold(q) - 0.5)

    def __call__(self, q) -> np.ndarray:
        q = as_points(q, self.n)
        phi, _ = self._axis_profile(q)
        return self.c + (self.C - self.c) * np.prod(phi, axis=-1)

    def grad(self, q) -> np.ndarray:
        q = as_points(q, self.n)
        phi, dphi = self._axis_profile(q)
        out = np.empty(q.shape)
        for a in range(self.n):
            others = np.prod(np.delete(phi, a, axis=-1), axis=-1) if self.n > 1 else 1.0
            out[..., a] = (self.C - self.c) * dphi[..., a] * others
        return out

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        return self(grid.points()).reshape(grid.shape)

    def breakpoints(self) -> list:
        d = self.delta
        pts = [0.5 - d, 0.5 - d / 2, 0.5 + d / 2, 0.5 + d]
        return [pts for _ in range(self.n)]

    def to_json(self) -> dict:
        return {"kind": "plateau", "n": self.n, "delta": self.delta, "C": self.C, "c": self.c}


def periodic_from_json(d):
    if isinstance(d, (int, float)):
        return FourierPotential.constant(float(d))
    kind = d.get("kind")
    if kind == "fourier":
        modes = tuple((tuple(m["k"]), m.get("cos", 0.0), m.get("sin", 0.0)) for m in d["modes"])
        return FourierPotential(int(d["n"]), modes)
    if kind == "field":
        grid = TorusGrid.from_json(d["grid"])
        return PeriodicField(grid, np.asarray(d["values"], dtype=float))
    if kind == "plateau":
        return PlateauBump(float(d["delta"]), float(d["C"]), float(d["c"]), int(d.get("n", 1)))
    raise SpecError(f"unknown periodic function kind {kind!r}")
