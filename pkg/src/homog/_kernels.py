"""Compiled Hamilton-Jacobi marching kernels for nodal quadratic Hamiltonians.

At node i the Hamiltonian is ``a[i]/2 |P - c[i]|^2 + b[i]``.  Both kernels
march ``u_t + H(q, p + Du) = 0`` from ``u = 0`` and return
``(u(T), u(T/2), steps)``; ``steps = -1`` signals blow-up.

The step is ``cfl * h / max(alpha, alpha_floor)`` where ``alpha`` is the
current dissipation coefficient.  The floor keeps the first steps, taken
while the gradient is still zero, from overshooting.
"""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _godunov_1d(a, c, b, Pm, Pp):
    # exact Godunov flux for a convex quadratic with minimum at c
    xm = Pm - c
    xp = Pp - c
    if xm <= xp:
        if xm <= 0.0 <= xp:
            z = 0.0
        elif xm > 0.0:
            z = xm
        else:
            z = xp
        return 0.5 * a * z * z + b
    return 0.5 * a * max(xm * xm, xp * xp) + b


@numba.njit(cache=True, nogil=True)
def _clip_step(t, dt, T, half_done):
    if not half_done and t + dt >= 0.5 * T:
        return 0.5 * T - t
    if t + dt > T:
        return T - t
    return dt


@numba.njit(cache=True, nogil=True)
def march_1d(a, c, b, p, h, T, cfl, alpha_floor, godunov, blowup):
    N = a.shape[0]
    u = np.zeros(N)
    un = np.empty(N)
    uhalf = np.zeros(N)
    t = 0.0
    half_done = False
    steps = 0
    while t < T:
        amax = alpha_floor
        for i in range(N):
            dm = (u[i] - u[i - 1]) / h
            dp = (u[(i + 1) % N] - u[i]) / h
            al = a[i] * max(abs(p + dm - c[i]), abs(p + dp - c[i]))
            if al > amax:
                amax = al
        dt = _clip_step(t, cfl * h / amax, T, half_done)
        for i in range(N):
            dm = (u[i] - u[i - 1]) / h
            dp = (u[(i + 1) % N] - u[i]) / h
            Pm = p + dm
            Pp = p + dp
            if godunov:
                Hn = _godunov_1d(a[i], c[i], b[i], Pm, Pp)
            else:
                al = a[i] * max(abs(Pm - c[i]), abs(Pp - c[i]))
                x = 0.5 * (Pm + Pp) - c[i]
                Hn = 0.5 * a[i] * x * x + b[i] - 0.5 * al * (dp - dm)
            un[i] = u[i] - dt * Hn
        for i in range(N):
            u[i] = un[i]
            if abs(u[i]) > blowup:
                return u, uhalf, -1
        t += dt
        steps += 1
        if not half_done and t >= 0.5 * T:
            uhalf[:] = u
            half_done = True
    return u, uhalf, steps


@numba.njit(cache=True, nogil=True)
def march_2d(a, c, b, p, h, T, cfl, alpha_floor, blowup):
    # a, b: (N, N); c: (N, N, 2); local Lax-Friedrichs with per-axis dissipation
    N = a.shape[0]
    u = np.zeros((N, N))
    un = np.empty((N, N))
    uhalf = np.zeros((N, N))
    t = 0.0
    half_done = False
    steps = 0
    while t < T:
        amax = alpha_floor
        for i in range(N):
            ip = (i + 1) % N
            for j in range(N):
                jp = (j + 1) % N
                dxm = (u[i, j] - u[i - 1, j]) / h
                dxp = (u[ip, j] - u[i, j]) / h
                dym = (u[i, j] - u[i, j - 1]) / h
                dyp = (u[i, jp] - u[i, j]) / h
                ax = a[i, j] * max(abs(p[0] + dxm - c[i, j, 0]), abs(p[0] + dxp - c[i, j, 0]))
                ay = a[i, j] * max(abs(p[1] + dym - c[i, j, 1]), abs(p[1] + dyp - c[i, j, 1]))
                if ax + ay > amax:
                    amax = ax + ay
        dt = _clip_step(t, cfl * h / amax, T, half_done)
        for i in range(N):
            ip = (i + 1) % N
            for j in range(N):
                jp = (j + 1) % N
                dxm = (u[i, j] - u[i - 1, j]) / h
                dxp = (u[ip, j] - u[i, j]) / h
                dym = (u[i, j] - u[i, j - 1]) / h
                dyp = (u[i, jp] - u[i, j]) / h
                cx = c[i, j, 0]
                cy = c[i, j, 1]
                ax = a[i, j] * max(abs(p[0] + dxm - cx), abs(p[0] + dxp - cx))
                ay = a[i, j] * max(abs(p[1] + dym - cy), abs(p[1] + dyp - cy))
                x = p[0] + 0.5 * (dxm + dxp) - cx
                y = p[1] + 0.5 * (dym + dyp) - cy
                Hn = 0.5 * a[i, j] * (x * x + y * y) + b[i, j]
                Hn -= 0.5 * ax * (dxp - dxm) + 0.5 * ay * (dyp - dym)
                un[i, j] = u[i, j] - dt * Hn
        for i in range(N):
            for j in range(N):
                u[i, j] = un[i, j]
                if abs(u[i, j]) > blowup:
                    return u, uhalf, -1
        t += dt
        steps += 1
        if not half_done and t >= 0.5 * T:
            uhalf[:, :] = u
            half_done = True
    return u, uhalf, steps
