"""Radial damping/potential profiles and the built-in catalog.

A profile bundles vectorized evaluators ``D(r)`` and ``V(r)`` with the local
and asymptotic indices that the exponent calculus consumes.  The indices are
*declared*; :meth:`CoefficientProfile.check` probes the evaluators to confirm
they are consistent with the declaration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

RadialFn = Callable[[np.ndarray], np.ndarray]

_FAR_PROBES = (1e2, 1e3, 1e4)
_NEAR_PROBES = (1e-2, 1e-3, 1e-4)


class ProfileError(ValueError):
    """A profile violates one of its declared invariants."""


def _zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class CoefficientProfile:
    """Damping ``D`` and potential ``V`` of a radial problem in dimension ``n``.

    ``d0, v0`` are the limits of ``r**2 D`` and ``r**2 V`` at the origin,
    ``d_inf, v_inf`` the limits of ``r D`` and ``r**2 V`` at infinity, and
    ``theta`` the local order of the damping, ``D = O(r**(theta - 2))``.
    ``beta, mu`` record a scattering bound ``D <= mu (1 + r)**-beta`` when
    one holds.  ``v_series``/``d_series`` optionally declare analytic local
    expansions ``r**2 V = v0 + sum_j v_series[j-1] r**j`` (same for D).
    """

    n: int
    D: RadialFn
    V: RadialFn
    d0: float = 0.0
    v0: float = 0.0
    d_inf: float = 0.0
    v_inf: float = 0.0
    theta: float = 2.0
    beta: float | None = None
    mu: float | None = None
    R: float = 1.0
    v_series: tuple[float, ...] | None = None
    d_series: tuple[float, ...] | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    asym_tol: float = 0.05

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ProfileError(f"dimension must be an integer >= 2, got {self.n}")
        if not 0.0 <= self.theta <= 2.0:
            raise ProfileError(f"theta must lie in [0, 2], got {self.theta}")
        if self.R <= 0:
            raise ProfileError("R must be positive")

    def damping(self, r) -> np.ndarray:
        return np.asarray(self.D(np.asarray(r, dtype=float)), dtype=float)

    def potential(self, r) -> np.ndarray:
        return np.asarray(self.V(np.asarray(r, dtype=float)), dtype=float)

    def check(self, r_grid=None) -> list[str]:
        """Return a list of invariant violations (empty when consistent)."""
        problems = []
        if r_grid is None:
            r_grid = np.geomspace(1e-4, 1e4, 801)
        D = self.damping(r_grid)
        V = self.potential(r_grid)
        if not (np.all(np.isfinite(D)) and np.all(np.isfinite(V))):
            problems.append("non-finite coefficient values on probe grid")
            return problems
        if np.any(V < -1e-12):
            problems.append(f"V negative on grid (min {V.min():.3g})")
        if np.any(D + V < -1 - 1e-12):
            problems.append(f"D + V < -1 on grid (min {(D + V).min():.3g})")
        r_far = np.array(_FAR_PROBES)
        rD = r_far * self.damping(r_far)
        r2V = r_far**2 * self.potential(r_far)
        if abs(rD[-1] - self.d_inf) > self.asym_tol:
            problems.append(f"r D(r) -> {rD[-1]:.4g}, declared d_inf={self.d_inf}")
        if abs(r2V[-1] - self.v_inf) > self.asym_tol:
            problems.append(f"r^2 V(r) -> {r2V[-1]:.4g}, declared v_inf={self.v_inf}")
        r_near = np.array(_NEAR_PROBES)
        r2V0 = r_near**2 * self.potential(r_near)
        if abs(r2V0[-1] - self.v0) > self.asym_tol:
            problems.append(f"r^2 V(r) -> {r2V0[-1]:.4g} at 0, declared v0={self.v0}")
        if self.theta < 2:
            r2D0 = r_near**2 * self.damping(r_near)
            if abs(r2D0[-1] - self.d0) > self.asym_tol:
                problems.append(f"r^2 D(r) -> {r2D0[-1]:.4g} at 0, declared d0={self.d0}")
        elif self.d0 != 0:
            problems.append("theta = 2 (bounded damping) requires d0 = 0")
        return problems

    def validate(self) -> "CoefficientProfile":
        problems = self.check()
        if problems:
            raise ProfileError(f"profile {self.name!r}: " + "; ".join(problems))
        return self

    def rescaled(self, lam0: float) -> "CoefficientProfile":
        """Profile after ``x -> lam0 x``: ``D/lam0``, ``V/lam0**2`` at ``r/lam0``.

        Turns ``lam0**2 + lam0 D + V >= 0`` into ``1 + D + V >= 0``.  The
        indices ``v0, d_inf, v_inf, theta`` are unchanged; ``d0`` scales by
        ``lam0``.
        """
        if lam0 <= 0:
            raise ValueError("lam0 must be positive")
        D, V = self.D, self.V

        def D_s(r):
            return D(np.asarray(r, dtype=float) / lam0) / lam0

        def V_s(r):
            return V(np.asarray(r, dtype=float) / lam0) / lam0**2

        mu = None
        if self.mu is not None and self.beta is not None:
            mu = self.mu / lam0 * max(1.0, lam0**self.beta)
        return replace(
            self,
            D=D_s,
            V=V_s,
            d0=self.d0 * lam0,
            R=self.R * lam0,
            mu=mu,
            v_series=_rescale_series(self.v_series, lam0),
            d_series=_rescale_series(self.d_series, lam0, factor=lam0),
            name=f"{self.name}@x{lam0:g}",
        )

    def local_coefficients(self, lam: float, order: int = 8) -> np.ndarray:
        """Taylor coefficients of ``r**2 (lam**2 + lam D + V)`` at the origin.

        Entry ``j`` multiplies ``r**j``.  Undeclared series contribute only
        their leading indices, which is exact for pure Euler profiles.
        """
        c = np.zeros(order + 1)
        c[0] = self.v0 + lam * self.d0
        if order >= 2:
            c[2] += lam**2
        for series, scale in ((self.v_series, 1.0), (self.d_series, lam)):
            if series:
                for j, b in enumerate(series[:order], start=1):
                    c[j] += scale * b
        return c

    def to_spec(self) -> dict:
        return {"family": self.name, "n": self.n, "params": dict(self.params)}


def _rescale_series(series, lam0, factor=1.0):
    if not series:
        return series
    # r^2 V(r/lam0)/lam0^2 = sum b_j (r/lam0)^j ; r^2 D(r/lam0)/lam0 = lam0 sum d_j (r/lam0)^j
    return tuple(factor * b * lam0 ** (-j) for j, b in enumerate(series, start=1))


# ---------------------------------------------------------------------------
# Built-in families

def free(n: int = 3, R: float = 1.0) -> CoefficientProfile:
    # D = 0 satisfies every damping bound, in particular 0 <= D <= 0 * (1+r)**-2
    return CoefficientProfile(n=n, D=_zero, V=_zero, beta=2.0, mu=0.0, R=R, name="free", params={})


def scattering(mu: float = 1.0, beta: float = 2.0, n: int = 3, R: float = 1.0) -> CoefficientProfile:
    if beta <= 1:
        raise ProfileError("scattering damping requires beta > 1")

    def D(r):
        return mu * (1.0 + np.asarray(r, dtype=float)) ** (-beta)

    series = tuple(mu * _binom(-beta, j - 2) for j in range(2, 12))
    return CoefficientProfile(
        n=n, D=D, V=_zero, beta=beta, mu=mu, R=R, name="scattering",
        params={"mu": mu, "beta": beta},
        d_series=(0.0,) + series,
    )


def gkw(r0: float = 1.0, n: int = 3, R: float = 1.0) -> CoefficientProfile:
    """``D = 2/r`` for ``r >= r0``, a decreasing quadratic cap inside,
    ``V = -D'/2 + D**2/4``."""

    def D(r):
        r = np.asarray(r, dtype=float)
        inner = 3.0 / r0 - r**2 / r0**3
        with np.errstate(divide="ignore"):
            outer = 2.0 / np.where(r > 0, r, 1.0)
        return np.where(r >= r0, outer, inner)

    def dD(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            outer = -2.0 / np.where(r > 0, r, 1.0) ** 2
        return np.where(r >= r0, outer, -2.0 * r / r0**3)

    def V(r):
        return -0.5 * dD(r) + 0.25 * D(r) ** 2

    # r^2 V = (9/(4 r0^2)) r^2 + (1/r0^3) r^3 - (3/(2 r0^4)) r^4 + r^6/(4 r0^6)
    v_series = (0.0, 9.0 / (4 * r0**2), 1.0 / r0**3, -1.5 / r0**4, 0.0, 0.25 / r0**6)
    d_series = (0.0, 3.0 / r0, 0.0, -1.0 / r0**3)
    return CoefficientProfile(
        n=n, D=D, V=V, d_inf=2.0, v_inf=2.0, R=R, name="gkw", params={"r0": r0},
        v_series=v_series, d_series=d_series,
    )


def scale_invariant(d: float = 2.0, v: float = 0.0, n: int = 3, R: float = 1.0) -> CoefficientProfile:
    """``D = d/r`` and ``V = v/r**2`` on all of ``r > 0``."""

    def D(r):
        r = np.asarray(r, dtype=float)
        return d / r

    def V(r):
        r = np.asarray(r, dtype=float)
        return v / r**2

    return CoefficientProfile(
        n=n, D=D, V=V, d0=0.0, v0=v, d_inf=d, v_inf=v, theta=1.0 if d != 0 else 2.0,
        R=R, name="scale_invariant", params={"d": d, "v": v},
    )


def singular_demo(d0: float = 0.5, v0: float = 0.5, d_inf: float = 1.0, v_inf: float = 1.0,
                  n: int = 3, R: float = 1.0) -> CoefficientProfile:
    """``D = d0/r**2 + d_inf/r``, ``V = v0/r**2 + 2 (v_inf - v0) arctan(r) / (pi r**2)``."""

    def D(r):
        r = np.asarray(r, dtype=float)
        return d0 / r**2 + d_inf / r

    def V(r):
        r = np.asarray(r, dtype=float)
        return v0 / r**2 + 2.0 * (v_inf - v0) * np.arctan(r) / (np.pi * r**2)

    # arctan r = r - r^3/3 + r^5/5 - ...
    k = 2.0 * (v_inf - v0) / np.pi
    v_series = tuple(k * (-1) ** ((j - 1) // 2) / j if j % 2 else 0.0 for j in range(1, 10))
    return CoefficientProfile(
        n=n, D=D, V=V, d0=d0, v0=v0, d_inf=d_inf, v_inf=v_inf, theta=0.0 if d0 != 0 else 1.0,
        R=R, name="singular_demo",
        params={"d0": d0, "v0": v0, "d_inf": d_inf, "v_inf": v_inf},
        v_series=v_series, d_series=(d_inf,),
    )


def compact_damping(mu: float = 1.0, rd: float = 2.0, n: int = 3, R: float = 1.0) -> CoefficientProfile:
    """``D = mu (1 - (r/rd)**2)**2`` inside ``rd``, zero outside; ``V = 0``."""

    def D(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < rd, mu * (1.0 - (r / rd) ** 2) ** 2, 0.0)

    return CoefficientProfile(
        n=n, D=D, V=_zero, beta=3.0, mu=mu * (1 + rd) ** 3, R=R, name="compact_damping",
        params={"mu": mu, "rd": rd},
        d_series=(0.0, mu, 0.0, -2 * mu / rd**2, 0.0, mu / rd**4),
    )


def inverse_square_tail(v: float = 2.0, n: int = 3, R: float = 1.0) -> CoefficientProfile:
    """``V = v / max(r, 1)**2``, ``D = 0``: Euler tail outside the unit ball."""

    def V(r):
        r = np.asarray(r, dtype=float)
        return v / np.maximum(r, 1.0) ** 2

    return CoefficientProfile(
        n=n, D=_zero, V=V, v_inf=v, R=R, name="inverse_square_tail", params={"v": v},
        v_series=(0.0, v),
    )


def critical_damping(d: float = 1.0, c: float = 1.0, beta_v: float = 4.0,
                     n: int = 2, R: float = 1.0) -> CoefficientProfile:
    """``D = d/(1+r)`` with short-range ``V = c (1+r)**-beta_v``."""

    def D(r):
        return d / (1.0 + np.asarray(r, dtype=float))

    def V(r):
        return c * (1.0 + np.asarray(r, dtype=float)) ** (-beta_v)

    v_series = (0.0,) + tuple(c * _binom(-beta_v, j - 2) for j in range(2, 12))
    d_series = (0.0,) + tuple(d * (-1) ** (j - 2) for j in range(2, 12))
    return CoefficientProfile(
        n=n, D=D, V=V, d_inf=d, R=R, name="critical_damping",
        params={"d": d, "c": c, "beta_v": beta_v},
        v_series=v_series, d_series=d_series,
    )


def table(r, D, V, n: int = 3, d0: float = 0.0, v0: float = 0.0, d_inf: float = 0.0,
          v_inf: float = 0.0, theta: float = 2.0, R: float = 1.0) -> CoefficientProfile:
    """Piecewise-linear profile from sampled values, with declared indices.

    Beyond the last sample the coefficients continue as ``D ~ 1/r`` and
    ``V ~ 1/r**2`` from their last values.
    """
    r_tab = np.asarray(r, dtype=float)
    D_tab = np.asarray(D, dtype=float)
    V_tab = np.asarray(V, dtype=float)
    if r_tab.ndim != 1 or r_tab.size < 2 or np.any(np.diff(r_tab) <= 0):
        raise ProfileError("table radii must be a strictly increasing 1-d list")
    if D_tab.shape != r_tab.shape or V_tab.shape != r_tab.shape:
        raise ProfileError("table D and V must match the radii")
    r_last = r_tab[-1]

    def Df(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r_last, np.interp(x, r_tab, D_tab), D_tab[-1] * r_last / np.maximum(x, r_last))

    def Vf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r_last, np.interp(x, r_tab, V_tab),
                        V_tab[-1] * (r_last / np.maximum(x, r_last)) ** 2)

    return CoefficientProfile(
        n=n, D=Df, V=Vf, d0=d0, v0=v0, d_inf=d_inf, v_inf=v_inf, theta=theta, R=R,
        name="table",
        params={"r": r_tab.tolist(), "D": D_tab.tolist(), "V": V_tab.tolist(), "d0": d0,
                "v0": v0, "d_inf": d_inf, "v_inf": v_inf, "theta": theta},
    )


def _binom(a: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


_CATALOG = {
    "free": free,
    "scattering": scattering,
    "gkw": gkw,
    "scale_invariant": scale_invariant,
    "singular_demo": singular_demo,
    "compact_damping": compact_damping,
    "inverse_square_tail": inverse_square_tail,
    "critical_damping": critical_damping,
    "table": table,
}


def builtin_profiles() -> dict[str, Callable[..., CoefficientProfile]]:
    """Name -> factory for every built-in family."""
    return dict(_CATALOG)


def make_profile(family: str, n: int = 3, R: float = 1.0, **params) -> CoefficientProfile:
    try:
        factory = _CATALOG[family]
    except KeyError:
        raise ProfileError(f"unknown profile family {family!r}") from None
    return factory(n=n, R=R, **params)
