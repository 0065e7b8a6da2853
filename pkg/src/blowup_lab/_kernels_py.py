"""Pure-numpy leapfrog kernel; same contract as the compiled ``_kernels``."""
from __future__ import annotations

import numpy as np


def advance(um, u, cL, cC, cR, inv_plus, minus, dt, p, nonlinear, nsteps, threshold,
            t0, R, dr, pad):
    """Advance ``(um, u)`` in place by up to ``nsteps`` leapfrog steps.

    ``u_new = inv_plus * (2 u - minus * um + dt**2 (cL u[j-1] + cC u + cR u[j+1] + |u|**p))``
    on nodes ``j <= (t + R)/dr + pad``; the last node is held at zero.

    Returns ``(done, status, max_prev, max_now)`` where status is 0 (all
    steps taken), 1 (``max|u| >= threshold``) or 2 (non-finite values).
    """
    N = u.shape[0] - 1
    dt2 = dt * dt
    max_now = float(np.max(np.abs(u)))
    max_prev = max_now
    for k in range(nsteps):
        t = t0 + k * dt
        J = min(N - 1, int((t + R) / dr) + pad)
        s = slice(0, J + 1)
        uc = u[s]
        acc = cC[s] * uc
        acc[1:] += cL[1:J + 1] * u[:J]
        acc += cR[s] * u[1:J + 2]
        if nonlinear:
            acc += np.abs(uc) ** p
        new = inv_plus[s] * (2.0 * uc - minus[s] * um[s] + dt2 * acc)
        um[s] = uc
        u[s] = new
        max_prev = max_now
        max_now = float(np.max(np.abs(new)))
        if not np.isfinite(max_now):
            return k + 1, 2, max_prev, max_now
        if max_now >= threshold:
            return k + 1, 1, max_prev, max_now
    return nsteps, 0, max_prev, max_now
