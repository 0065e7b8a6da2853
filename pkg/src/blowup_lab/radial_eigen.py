"""Positive radial solutions of ``Delta phi = (lam**2 + lam D + V) phi``.

The ODE is integrated for ``W = r phi'/phi`` and ``L = log phi`` in the
variable ``s = log r``::

    dL/ds = W,    dW/ds = -W**2 - (n - 2) W + r**2 (lam**2 + lam D + V)

which stays bounded at an Euler-type origin and never overflows while
``phi`` grows like ``exp(lam r)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .exponent_calculus import DomainError, rho
from .profiles import CoefficientProfile, ProfileError

_LN10 = math.log(10.0)
# lam = 0 needs r_max >= 1e4 so the power tail and log-growth checks are reachable
LAMBDA_FLOOR = 1e-3


class ConstructionError(RuntimeError):
    """Integration failed or produced a non-positive / decreasing solution."""


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Log-sampled positive radial function on a geometric grid."""

    grid: np.ndarray
    logvals: np.ndarray
    dlogvals: np.ndarray
    lam: float
    n: int
    rho0: float | None = None

    def __post_init__(self):
        for arr in (self.grid, self.logvals, self.dlogvals):
            arr.setflags(write=False)

    @property
    def r_min(self) -> float:
        return float(self.grid[0])

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        s = np.log(self.grid)
        return CubicHermiteSpline(s, self.logvals, self.grid * self.dlogvals)

    def _origin_slope(self) -> float:
        return self.rho0 if self.rho0 is not None else float(self.grid[0] * self.dlogvals[0])

    def log_phi(self, r) -> np.ndarray:
        """``log phi(r)``; below the grid the Euler tail ``rho0 log r`` is used."""
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"r={r.max():g} beyond the solved range {self.r_max:g}")
        s = np.log(np.maximum(r, self.r_min))
        out = self._spline(s)
        below = r < self.r_min
        if np.any(below):
            k = self._origin_slope()
            with np.errstate(divide="ignore", invalid="ignore"):
                tail = self.logvals[0] + k * np.log(r / self.r_min)
            if k == 0:
                tail = np.full_like(r, self.logvals[0])
            out = np.where(below, tail, out)
        return out

    def dlog_phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.log(np.maximum(r, self.r_min))
        W = self._spline(s, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r < self.r_min, self._origin_slope(), W) / r

    def phi(self, r) -> np.ndarray:
        return np.exp(self.log_phi(r))

    def log_y(self, r=None) -> np.ndarray:
        """``log`` of ``y = r**((n-1)/2) phi``."""
        r = self.grid if r is None else np.asarray(r, dtype=float)
        return 0.5 * (self.n - 1) * np.log(r) + self.log_phi(r)

    def dy_over_y(self, r=None) -> np.ndarray:
        r = self.grid if r is None else np.asarray(r, dtype=float)
        w = self.dlogvals if r is self.grid else self.dlog_phi(r)
        return 0.5 * (self.n - 1) / r + w

    def is_monotone(self, tol: float = 1e-8) -> bool:
        return bool(np.all(self.grid * self.dlogvals >= -tol))

    def to_csv(self, path=None) -> str:
        """Columns ``r, phi, dphi_over_phi`` with 17 significant digits.

        ``phi`` is written from its logarithm so values beyond the double
        range stay exact decimals.
        """
        buf = io.StringIO()
        buf.write("r,phi,dphi_over_phi\n")
        for r, L, w in zip(self.grid, self.logvals, self.dlogvals):
            buf.write(f"{r:.17g},{_exp_decimal(L)},{w:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, lam: float, n: int, rho0: float | None = None) -> "RadialFunction":
        if hasattr(source, "read"):
            text = source.read()
        elif "\n" in str(source):
            text = str(source)
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        r = np.array([float(row["r"]) for row in rows])
        L = np.array([_log_decimal(row["phi"]) for row in rows])
        w = np.array([float(row["dphi_over_phi"]) for row in rows])
        return cls(grid=r, logvals=L, dlogvals=w, lam=lam, n=n, rho0=rho0)


def _exp_decimal(L: float) -> str:
    if L > -700 and L < 700:
        return f"{math.exp(L):.17g}"
    e10 = L / _LN10
    k = math.floor(e10)
    mant = 10.0 ** (e10 - k)
    if mant >= 10.0:
        mant /= 10.0
        k += 1
    return f"{mant:.16f}e{k:+d}"


def _log_decimal(text: str) -> float:
    text = text.strip().lower()
    if "e" in text:
        mant, exp = text.split("e")
        return math.log(float(mant)) + int(exp) * _LN10
    return math.log(float(text))


@dataclass(frozen=True)
class AsymptoticFit:
    exponent_estimate: float
    exp_rate_estimate: float
    residual: float
    fit_window: tuple[float, float]


# ---------------------------------------------------------------------------

def frobenius_seed(profile: CoefficientProfile, lam: float, delta: float,
                   order: int = 8) -> tuple[float, float]:
    """Value and slope at ``delta`` of the regular local solution.

    The indicial root is ``rho(v0 + lam d0)``; higher coefficients follow
    from the declared local series of ``r**2 V`` and ``r**2 D`` plus the
    exact ``lam**2 r**2`` term.  Normalized so the leading term is
    ``delta**rho``.
    """
    if lam < 0 or delta <= 0:
        raise ValueError("need lam >= 0 and delta > 0")
    n = profile.n
    c = profile.local_coefficients(lam, order)
    r0 = rho(c[0], n)

    def indicial(s):
        return s * (s + n - 2) - c[0]

    a = np.zeros(order + 1)
    a[0] = 1.0
    for j in range(1, order + 1):
        a[j] = np.dot(c[1:j + 1], a[j - 1::-1][:j]) / indicial(r0 + j)
    powers = delta ** np.arange(order + 1)
    terms = a * powers
    total = terms.sum()
    if abs(terms[-1]) + abs(terms[-2]) > 1e-10 * abs(total):
        raise ValueError(f"delta={delta:g} too large for an order-{order} local series")
    phi = delta**r0 * total
    dphi = delta ** (r0 - 1) * np.dot((r0 + np.arange(order + 1)), terms)
    return float(phi), float(dphi)


def default_delta(lam: float) -> float:
    return 1e-4 * min(1.0, 1.0 / lam) if lam > 0 else 1e-4


def _check_origin(profile: CoefficientProfile, lam: float, delta: float) -> None:
    def r2q(r):
        r = np.asarray([r])
        return float(r[0] ** 2 * (lam**2 + lam * profile.damping(r)[0] + profile.potential(r)[0]))

    near, far = r2q(delta * 1e-2), r2q(delta)
    if not math.isfinite(near) or abs(near) > 10 * abs(far) + 1.0:
        raise ProfileError("coefficients are more singular than r**-2 at the origin")


def solve_phi(profile: CoefficientProfile, lam: float, r_max: float, *,
              delta: float | None = None, rtol: float = 1e-10, atol: float = 1e-12,
              points_per_decade: int = 400, normalize: bool = True,
              enforce_range: bool = True, max_step: float = 0.05) -> RadialFunction:
    """Integrate the radial eigenfunction outward from the Frobenius seed.

    ``phi_0`` keeps the seed normalization; for ``lam > 0`` the result is
    rescaled to ``phi(1/lam) = 1`` when ``normalize`` is set.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if enforce_range and r_max < 10 * max(1.0, 1.0 / max(lam, LAMBDA_FLOOR)) * (1 - 1e-12):
        raise ValueError(f"r_max={r_max:g} too small for lam={lam:g}")
    n = profile.n
    delta = default_delta(lam) if delta is None else delta
    if r_max <= delta:
        raise ValueError("r_max must exceed the seed radius")
    _check_origin(profile, lam, delta)
    try:
        phi_d, dphi_d = frobenius_seed(profile, lam, delta)
    except DomainError as exc:
        raise ProfileError(str(exc)) from exc
    rho0 = rho(profile.v0 + lam * profile.d0, n)
    L0 = math.log(phi_d)
    W0 = delta * dphi_d / phi_d

    D, V = profile.D, profile.V
    lam2 = lam * lam

    def rhs(s, y):
        r = math.exp(s)
        ra = np.array([r])
        q = lam2 + lam * float(D(ra)[0]) + float(V(ra)[0])
        W = y[1]
        return (W, -W * W - (n - 2) * W + r * r * q)

    def blowdown(s, y):
        return y[1] + 1e3

    blowdown.terminal = True

    s0, s1 = math.log(delta), math.log(r_max)
    npts = max(int(points_per_decade * (s1 - s0) / _LN10) + 1, 50)
    s_eval = np.linspace(s0, s1, npts)
    sol = integrate.solve_ivp(
        rhs, (s0, s1), (L0, W0), method="DOP853", t_eval=s_eval, rtol=rtol, atol=atol,
        events=blowdown, dense_output=normalize and lam > 0, max_step=max_step,
    )
    if sol.status != 0:
        raise ConstructionError(f"integration failed for lam={lam}: {sol.message}")
    L, W = sol.y
    r = np.exp(s_eval)
    r[0], r[-1] = delta, r_max
    if normalize and lam > 0:
        L = L - sol.sol(math.log(1.0 / lam))[0]
    f = RadialFunction(grid=r, logvals=np.array(L), dlogvals=W / r, lam=lam, n=n, rho0=rho0)
    if not np.all(np.isfinite(f.logvals)):
        raise ConstructionError("non-finite log phi")
    return f


def check_invariants(f: RadialFunction, profile: CoefficientProfile, *, tol: float = 1e-8,
                     tol_res: float = 1e-2) -> dict:
    """Positivity, monotonicity and finite-difference ODE residual."""
    res = ode_residual(f, profile)
    return {
        "positive": bool(np.all(np.isfinite(f.logvals))),
        "monotone": f.is_monotone(tol),
        "ode_residual": res,
        "ok": bool(np.all(np.isfinite(f.logvals)) and f.is_monotone(tol) and res <= tol_res),
    }


def ode_residual(f: RadialFunction, profile: CoefficientProfile) -> float:
    """Max relative residual of ``w' + w**2 + (n-1) w / r = q`` by finite differences."""
    r, w = f.grid, f.dlogvals
    lam = f.lam
    q = lam**2 + lam * profile.damping(r) + profile.potential(r)
    dw = np.gradient(w, r)
    terms = np.abs(np.vstack([dw, w * w, (f.n - 1) * w / r, q]))
    resid = np.abs(dw + w * w + (f.n - 1) * w / r - q)
    scale = terms.max(axis=0)
    interior = slice(2, -2)
    ok = scale[interior] > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(resid[interior][ok] / scale[interior][ok]))


def integral_identity_residual(f: RadialFunction, profile: CoefficientProfile, r: float) -> float:
    """Relative mismatch in ``r^(n-1) phi'(r) - d^(n-1) phi'(d) = int_d^r t^(n-1) V phi``."""
    n, d = f.n, f.r_min
    if f.lam != 0:
        raise ValueError("identity holds for the lam = 0 eigenfunction")

    def integrand(s):
        t = math.exp(s)
        return t**n * float(profile.potential(np.array([t]))[0]) * float(f.phi(t))

    rhs, _ = integrate.quad(integrand, math.log(d), math.log(r), epsabs=0, epsrel=1e-11, limit=400)
    lhs = r ** (n - 1) * float(f.phi(r) * f.dlog_phi(r)) - d ** (n - 1) * float(
        f.phi(d) * f.dlog_phi(d))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def fit_asymptotics(f: RadialFunction, model: str) -> AsymptoticFit:
    """Least squares of ``log phi`` over the outer half ``[r_max/2, r_max]``.

    ``power``: ``log phi ~ c + a log r``.  ``exp_power``: ``log phi ~ lam r + c
    log r + const`` with the rate pinned to ``lam``.
    """
    if model == "power":
        need = 100.0
    elif model == "exp_power":
        need = 50.0 / max(f.lam, 1.0)
    else:
        raise ValueError(f"unknown model {model!r}")
    if f.r_max < need * (1 - 1e-12):
        raise ValueError(f"window too short: r_max={f.r_max:g} < {need:g}")
    lo = 0.5 * f.r_max
    mask = f.grid >= lo
    if mask.sum() < 5:
        raise ValueError("window too short: fewer than 5 grid points")
    r = f.grid[mask]
    target = f.logvals[mask].copy()
    rate = 0.0
    if model == "exp_power":
        rate = f.lam
        target -= rate * r
    A = np.column_stack([np.log(r), np.ones_like(r)])
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    resid = float(np.max(np.abs(A @ coef - target)))
    return AsymptoticFit(float(coef[0]), rate, resid, (float(r[0]), float(r[-1])))


def log_growth_ratio(f: RadialFunction, r_lo: float = 10.0, r_hi: float = 1e4) -> float:
    """Spread ``max/min`` of ``phi / ln(2 + r)`` on ``[r_lo, r_hi]``."""
    mask = (f.grid >= r_lo) & (f.grid <= r_hi)
    ratio = f.logvals[mask] - np.log(np.log(2.0 + f.grid[mask]))
    return float(np.exp(ratio.max() - ratio.min()))


@dataclass(frozen=True)
class UniformBoundReport:
    c1_lower: float
    c1_upper: float
    spread: float
    bound: float
    passed: bool
    per_lambda: dict


def envelope_log(n: int, x) -> np.ndarray:
    """``log(<x>**(-(n-1)/2) e**x)`` with ``<x> = sqrt(1 + x**2)``."""
    x = np.asarray(x, dtype=float)
    return x - 0.25 * (n - 1) * np.log1p(x * x)


def uniform_bound_check(profile: CoefficientProfile, lambdas, *, x_max: float = 20.0,
                        bound: float = 10.0, **solve_kw) -> UniformBoundReport:
    """Empirical constants of ``phi_lam ~ <lam r>**(-(n-1)/2) e**(lam r)``."""
    lo, hi = math.inf, -math.inf
    per = {}
    for lam in lambdas:
        if not 0 < lam <= 1:
            raise ValueError("lambdas must lie in (0, 1]")
        r_max = max(x_max, 10.0) / lam * 1.01
        f = solve_phi(profile, lam, r_max, **solve_kw)
        x = lam * f.grid
        mask = x <= x_max
        ratio = f.logvals[mask] - envelope_log(profile.n, x[mask])
        per[float(lam)] = (float(np.exp(ratio.min())), float(np.exp(ratio.max())))
        lo = min(lo, per[float(lam)][0])
        hi = max(hi, per[float(lam)][1])
    spread = hi / lo
    return UniformBoundReport(lo, hi, spread, bound, bool(spread <= bound), per)
