"""Radial semilinear damped wave equation: leapfrog solver, lifespan
measurement and epsilon sweeps.

Solves ``u_tt - Delta u + D u_t + V u = |u|**p`` with data
``(eps f, eps g)`` on a uniform grid ``r_j = j dr``.  The spatial operator is
the conservative finite-volume form with weights ``w_j = r_j**(n-1) dr``
(``w_0 = (dr/2)**n / n``) so that ``-L + V`` is symmetric in the weighted
inner product and the leapfrog energy is exactly nonincreasing for
``D, V >= 0`` in the linear regime.
"""
from __future__ import annotations

import csv
import io
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import kernels
from .exponent_calculus import LifespanBound
from .profiles import CoefficientProfile


class NumericalInstability(RuntimeError):
    """Non-finite values appeared before the blow-up threshold."""


class SweepError(ValueError):
    pass


def default_g(R: float) -> Callable:
    def g(r):
        x = np.asarray(r, dtype=float) / R
        return np.where(x < 1.0, (1.0 - x * x) ** 4, 0.0)

    return g


def zero_data(r):
    return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class CauchyProblem:
    """Radial Cauchy data ``u(0) = eps f``, ``u_t(0) = eps g`` supported in ``[0, R]``."""

    profile: CoefficientProfile
    p: float
    epsilon: float
    f: Callable = zero_data
    g: Callable | None = None
    R: float | None = None
    nonlinear: bool = True

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.R is None:
            object.__setattr__(self, "R", self.profile.R)
        if self.g is None:
            object.__setattr__(self, "g", default_g(self.R))

    @property
    def n(self) -> int:
        return self.profile.n

    def data_amplitude(self) -> float:
        r = np.linspace(0.0, self.R, 2001)
        return self.epsilon * max(np.max(np.abs(self.f(r))), np.max(np.abs(self.g(r))))

    def check_data(self, dr: float) -> None:
        r = np.linspace(0.0, self.R + 5 * dr, 4001)
        fv, gv = np.asarray(self.f(r)), np.asarray(self.g(r))
        if np.any(fv < 0) or np.any(gv < 0):
            raise ValueError("data must be nonnegative")
        if not (np.any(fv > 0) or np.any(gv > 0)):
            raise ValueError("data must be nontrivial")
        out = r > self.R * (1 + 1e-12)
        if np.any(fv[out] != 0) or np.any(gv[out] != 0):
            raise ValueError("data must be supported in [0, R]")

    def with_epsilon(self, eps: float) -> "CauchyProblem":
        return replace(self, epsilon=eps)


@dataclass(frozen=True)
class Grid:
    dr: float = 0.05
    cfl: float = 0.5
    margin: float = 2.0
    pad: int = 2

    def __post_init__(self):
        if self.dr <= 0:
            raise ValueError("dr must be positive")
        if not 0 < self.cfl <= 0.9:
            raise ValueError("CFL factor must lie in (0, 0.9]")

    def refined(self) -> "Grid":
        return replace(self, dr=self.dr / 2)


@dataclass
class Discretization:
    r: np.ndarray
    weights: np.ndarray
    D: np.ndarray
    V: np.ndarray
    cL: np.ndarray
    cC: np.ndarray
    cR: np.ndarray
    dt: float
    capped: bool

    def apply_A(self, u: np.ndarray) -> np.ndarray:
        """``(-L + V) u`` on all nodes (last node treated as zero boundary)."""
        out = -(self.cC * u)
        out[1:] -= self.cL[1:] * u[:-1]
        out[:-1] -= self.cR[:-1] * u[1:]
        out[-1] = 0.0
        return out


def _coefficients(profile: CoefficientProfile, r: np.ndarray, dr: float):
    """D and V on the grid, capped at their value at ``dr/2``."""
    half = np.array([0.5 * dr])
    D_cap, V_cap = float(profile.damping(half)[0]), float(profile.potential(half)[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.asarray(profile.damping(r), dtype=float).copy()
        V = np.asarray(profile.potential(r), dtype=float).copy()
    capped = False
    for arr, cap in ((D, D_cap), (V, V_cap)):
        bad = ~np.isfinite(arr) | (np.abs(arr) > abs(cap))
        bad &= r <= dr  # only the origin cell can see the singular part
        if np.any(bad):
            capped = capped or bool(np.any(~np.isfinite(arr[bad])) or
                                    np.any(np.abs(arr[bad]) > abs(cap) * (1 + 1e-9)))
            arr[bad] = cap
    return D, V, capped


def discretize(problem: CauchyProblem, grid: Grid, r_max: float) -> Discretization:
    dr, n = grid.dr, problem.n
    N = int(math.ceil(r_max / dr))
    r = dr * np.arange(N + 1)
    w = r ** (n - 1) * dr
    w[0] = (0.5 * dr) ** n / n
    a = (r[:-1] + 0.5 * dr) ** (n - 1)  # a_{j+1/2}
    D, V, capped = _coefficients(problem.profile, r, dr)
    cL = np.zeros(N + 1)
    cR = np.zeros(N + 1)
    cC = np.zeros(N + 1)
    cR[:-1] = a / (dr * w[:-1])
    cL[1:] = a / (dr * w[1:])
    cC[:-1] = -cR[:-1]
    cC[1:] -= cL[1:]
    cC -= V
    # symmetric form of -L + V in the weighted inner product, Dirichlet at r_N
    diag = -cC[:-1]
    off = -cR[:-2] * np.sqrt(w[:-2] / w[1:-1])
    lam_max = float(eigvalsh_tridiagonal(diag, off, select="i",
                                         select_range=(N - 1, N - 1))[0])
    dt0 = grid.cfl * min(dr, 2.0 / math.sqrt(max(lam_max, 1e-300)))
    dmax = float(np.max(np.abs(D)))
    dt = dt0 / (1.0 + dmax * dt0)
    return Discretization(r, w, D, V, cL, cC, cR, dt, capped)


@dataclass
class Trajectory:
    """Recorded run: snapshots ``u[k]`` at times ``t[k]``."""

    r: np.ndarray
    weights: np.ndarray
    t: np.ndarray
    u: np.ndarray
    energy: np.ndarray
    support: np.ndarray
    profile: CoefficientProfile
    p: float
    eps: float
    f: np.ndarray
    g: np.ndarray
    R: float
    dt: float
    nonlinear: bool
    blowup_time: float | None = None
    crossings: dict = field(default_factory=dict)
    capped: bool = False

    def to_csv(self, stride: int = 1) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "r", "u"])
        for k in range(0, len(self.t), stride):
            for rj, uj in zip(self.r, self.u[k]):
                wr.writerow([f"{self.t[k]:.17g}", f"{rj:.17g}", f"{uj:.17g}"])
        return buf.getvalue()


@dataclass(frozen=True)
class BlowupEvent:
    time: float
    crossings: dict
    steps: int
    dt: float
    dr: float
    capped: bool
    trajectory: Trajectory | None = None


@dataclass(frozen=True)
class Censored:
    T_max: float
    max_abs: float
    dt: float
    dr: float
    capped: bool
    trajectory: Trajectory | None = None


def support_radius(r: np.ndarray, u: np.ndarray, rel: float = 1e-12) -> float:
    m = np.max(np.abs(u))
    if m == 0:
        return 0.0
    idx = np.nonzero(np.abs(u) > rel * m)[0]
    return float(r[idx[-1]])


def discrete_energy(disc: Discretization, u_new: np.ndarray, u_old: np.ndarray) -> float:
    """``E^{k+1/2} = |(u^{k+1}-u^k)/dt|_w**2 / 2 + <A u^{k+1}, u^k>_w / 2``."""
    w = disc.weights
    v = (u_new - u_old) / disc.dt
    return float(0.5 * np.sum(w * v * v) + 0.5 * np.sum(w * disc.apply_A(u_new) * u_old))


def evolve(problem: CauchyProblem, grid: Grid, T_max: float, *, M: float = 1e6,
           extra_thresholds=(), record: bool = False, record_every: int = 1,
           check_support: bool = False, advance=None):
    """Run the leapfrog scheme until ``max|u| >= M * A0`` or ``t = T_max``.

    ``A0 = eps * max(|f|, |g|)``.  Returns a ``BlowupEvent`` or ``Censored``;
    with ``record`` the full trajectory (and discrete energy) is attached.
    """
    problem.check_data(grid.dr)
    advance = advance or kernels.advance
    disc = discretize(problem, grid, T_max + problem.R + grid.margin + (grid.pad + 2) * grid.dr)
    r, dt, dr = disc.r, disc.dt, grid.dr
    eps, p = problem.epsilon, problem.p
    f0 = eps * np.asarray(problem.f(r), dtype=float)
    g0 = eps * np.asarray(problem.g(r), dtype=float)
    f0[-1] = g0[-1] = 0.0
    A0 = problem.data_amplitude()
    levels = sorted({float(M), *map(float, extra_thresholds)})
    targets = [lv * A0 for lv in levels]
    top = targets[-1]

    inv_plus = 1.0 / (1.0 + 0.5 * dt * disc.D)
    minus = 1.0 - 0.5 * dt * disc.D
    # Taylor start: u^1 = u^0 + dt g + dt^2/2 (L u^0 - V u^0 - D g + |u^0|^p)
    um = f0.copy()
    acc = -disc.apply_A(f0) - disc.D * g0
    if problem.nonlinear:
        acc += np.abs(f0) ** p
    u = f0 + dt * g0 + 0.5 * dt * dt * acc
    u[-1] = 0.0
    um = np.ascontiguousarray(um)
    u = np.ascontiguousarray(u)
    t = dt
    step = 1
    n_total = int(math.ceil(T_max / dt))

    times, snaps, energy, support = [], [], [], []

    def snapshot():
        times.append(t)
        snaps.append(u.copy())
        energy.append(discrete_energy(disc, u, um))
        support.append(support_radius(r, u))

    if record:
        times.append(0.0)
        snaps.append(um.copy())
        energy.append(np.nan)
        support.append(support_radius(r, um))
        snapshot()

    support_violation = None
    crossings: dict = {}
    max_prev = float(np.max(np.abs(u)))
    block = record_every if record or check_support else 256
    while step < n_total:
        todo = min(block, n_total - step)
        level_idx = len(crossings)
        done, status, m_prev, m_now = advance(
            um, u, disc.cL, disc.cC, disc.cR, inv_plus, minus, dt, p, bool(problem.nonlinear),
            todo, targets[level_idx], t, problem.R, dr, grid.pad)
        t_prev = t + (done - 1) * dt
        t = t + done * dt
        step += done
        if status == 2:
            raise NumericalInstability(f"non-finite solution at t={t:g} (dt={dt:g})")
        if status == 1:
            # log-linear interpolation of the crossing inside the last step
            for lv, target in zip(levels[level_idx:], targets[level_idx:]):
                if m_now >= target:
                    crossings[lv] = _cross_time(t_prev, t, m_prev, m_now, target)
            if m_now >= top:
                if record:
                    snapshot()
                break
        if record and (step - 1) % record_every == 0:
            snapshot()
        if check_support and status != 1:
            rad = support_radius(r, u)
            if rad > t + problem.R + 3 * dr + 1e-12 and support_violation is None:
                support_violation = (t, rad)
        max_prev = m_now

    traj = None
    if record:
        traj = Trajectory(r=r, weights=disc.weights, t=np.array(times), u=np.array(snaps),
                          energy=np.array(energy), support=np.array(support),
                          profile=problem.profile, p=p, eps=eps, f=f0 / eps, g=g0 / eps,
                          R=problem.R, dt=dt, nonlinear=problem.nonlinear,
                          blowup_time=crossings.get(float(M)), crossings=dict(crossings),
                          capped=disc.capped)
    if support_violation is not None:
        raise NumericalInstability(
            f"support {support_violation[1]:g} escaped the light cone at t={support_violation[0]:g}")
    if float(M) in crossings:
        return BlowupEvent(crossings[float(M)], crossings, step, dt, dr, disc.capped, traj)
    return Censored(T_max, float(np.max(np.abs(u))), dt, dr, disc.capped, traj)


def _cross_time(t0: float, t1: float, m0: float, m1: float, target: float) -> float:
    if m0 <= 0 or m1 <= m0:
        return t1
    s = (math.log(target) - math.log(m0)) / (math.log(m1) - math.log(m0))
    return t0 + min(max(s, 0.0), 1.0) * (t1 - t0)


# ---------------------------------------------------------------------------
# lifespan measurement

@dataclass(frozen=True)
class LifespanMeasurement:
    epsilon: float
    T_est: float
    T_lower: float
    T_upper: float
    converged: bool
    censored: bool
    blowup_norm: str
    dr: float
    dt: float
    threshold_spread: float = float("nan")
    capped: bool = False

    def row(self) -> dict:
        return {"epsilon": self.epsilon, "T_est": self.T_est, "T_lower": self.T_lower,
                "T_upper": self.T_upper, "converged": self.converged, "censored": self.censored,
                "dr": self.dr, "dt": self.dt}


SWEEP_COLUMNS = ("epsilon", "T_est", "T_lower", "T_upper", "converged", "censored", "dr", "dt")


def measure_lifespan(problem: CauchyProblem, grid: Grid = Grid(), T_max: float = 200.0, *,
                     M: float = 1e6, tol: float = 0.05,
                     threshold_multipliers=(1e4, 1e8), advance=None) -> LifespanMeasurement:
    """Lifespan from two resolutions ``dr`` and ``dr/2``; the finer run gives ``T_est``.

    Crossing times for the extra threshold multipliers are recorded on the
    fine run; their relative spread is reported as ``threshold_spread``.
    """
    runs = [evolve(problem, g, T_max, M=M, extra_thresholds=threshold_multipliers,
                   advance=advance) for g in (grid, grid.refined())]
    coarse, fine = runs
    nan = float("nan")
    if any(isinstance(x, Censored) for x in runs):
        return LifespanMeasurement(problem.epsilon, nan, nan, nan, False, True, "sup", fine.dr,
                                   fine.dt, nan, fine.capped)
    Ts = [coarse.time, fine.time]
    T_est = fine.time
    lo, hi = min(Ts), max(Ts)
    times = [fine.crossings[k] for k in sorted(fine.crossings)]
    spread = (max(times) - min(times)) / T_est
    conv = (hi - lo) / T_est <= tol
    return LifespanMeasurement(problem.epsilon, T_est, lo, hi, bool(conv), False, "sup",
                               fine.dr, fine.dt, float(spread), fine.capped)


def _measure_job(args):
    problem, grid, T_max, kw = args
    return measure_lifespan(problem, grid, T_max, **kw)


_POOL_TASKS: list = []


def _measure_index(i: int):
    return _measure_job(_POOL_TASKS[i])


def _fork_context():
    try:
        return multiprocessing.get_context("fork")
    except ValueError:  # pragma: no cover - platforms without fork run serially
        return None


@dataclass
class SweepTable:
    rows: list[LifespanMeasurement]

    @property
    def usable(self) -> list[LifespanMeasurement]:
        return [m for m in self.rows if not m.censored and m.converged]

    @property
    def censored(self) -> list[LifespanMeasurement]:
        return [m for m in self.rows if m.censored]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for m in self.rows:
            row = m.row()
            wr.writerow({k: (f"{v:.17g}" if isinstance(v, float) else
                             str(v).lower() if isinstance(v, bool) else v)
                         for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def epsilon_sweep(template: CauchyProblem, epsilons, grid: Grid = Grid(), *,
                  T_max: float | Callable[[float], float] = 200.0, jobs: int = 1,
                  strict: bool = False, **kw) -> SweepTable:
    """Lifespan for each ``eps``; rows sorted by ``eps``.

    ``T_max`` may be a function of ``eps``.  With ``strict`` the
    preconditions (>= 5 values over >= 1 decade) are enforced.
    """
    eps = sorted(float(e) for e in epsilons)
    if strict and (len(eps) < 5 or eps[-1] / eps[0] < 10.0 * (1 - 1e-12)):
        raise SweepError("need >= 5 epsilon values spanning >= 1 decade")
    cap = T_max if callable(T_max) else (lambda e: T_max)
    tasks = [(template.with_epsilon(e), grid, float(cap(e)), kw) for e in eps]
    ctx = _fork_context() if jobs > 1 else None
    if ctx is not None:
        # profiles hold closures, so tasks reach the workers through fork
        _POOL_TASKS[:] = tasks
        try:
            with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
                rows = list(ex.map(_measure_index, range(len(tasks))))
        finally:
            _POOL_TASKS.clear()
    else:
        rows = [_measure_job(t) for t in tasks]
    return SweepTable(rows)


@dataclass(frozen=True)
class SweepFit:
    a_hat: float
    intercept: float
    r2: float
    with_log_correction: bool
    b_hat: float = 0.0
    n_rows: int = 0


@dataclass(frozen=True)
class CompareReport:
    fit: SweepFit
    a_theory: float
    deviation: float
    C_fit: float
    upper_bound_ok: bool
    censored: int
    rows: list

    def row(self) -> dict:
        return {"a_hat": self.fit.a_hat, "a_theory": self.a_theory, "deviation": self.deviation,
                "r2": self.fit.r2, "C_fit": self.C_fit, "upper_bound_ok": self.upper_bound_ok,
                "n_rows": self.fit.n_rows, "censored": self.censored}


def fit_sweep(eps, T, with_log: bool = False) -> SweepFit:
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.log(np.asarray(T, dtype=float))
    cols = [x, np.ones_like(x)]
    if with_log:
        cols.insert(1, np.log(np.maximum(x, 1e-300)))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    b = float(coef[1]) if with_log else 0.0
    return SweepFit(float(coef[0]), float(coef[-1]), r2, with_log, b, len(x))


def fit_and_compare(table: SweepTable, bound: LifespanBound, *,
                    slope_tol: float = 0.15) -> CompareReport:
    """Regress ``log T`` on ``log(1/eps)`` and test ``T <= C eps**(-a)`` row-wise.

    ``C`` is the least-squares constant of the theory curve with the slope
    pinned to ``a``.  A row passes if it exceeds that curve by no more than
    a line of slope ``a (1 + slope_tol)`` through the sweep midpoint would,
    i.e. ``log T - log(C eps**-a) <= slope_tol * a * span / 2`` with ``span``
    the width of the sweep in ``log(1/eps)``.
    """
    rows = table.usable
    if len(rows) < 4:
        raise SweepError(f"only {len(rows)} usable rows; need at least 4")
    eps = np.array([m.epsilon for m in rows])
    T = np.array([m.T_est for m in rows])
    with_log = bound.form == "power_log"
    fit = fit_sweep(eps, T, with_log)
    if bound.form in ("power", "power_log"):
        a = bound.a
        x = np.log(1.0 / eps)
        logC = np.log(T) - a * x
        if with_log:
            logC -= bound.b * np.log(x.clip(min=1e-300))
        C = float(np.exp(np.mean(logC)))
        allowance = slope_tol * a * 0.5 * float(x.max() - x.min())
        ok = bool(np.all(logC - math.log(C) <= allowance + 1e-12))
        dev = abs(fit.a_hat - a) / abs(a)
    else:
        a, C, ok, dev = float("nan"), float("nan"), True, float("nan")
    return CompareReport(fit, a, dev, C, ok, len(table.censored), [m.row() for m in rows])
