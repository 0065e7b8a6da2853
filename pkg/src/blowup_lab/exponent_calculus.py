"""Critical exponents, thresholds and lifespan-regime classification.

Everything here is closed-form double-precision arithmetic.  Thresholds whose
denominators are non-positive are reported as ``math.inf``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .profiles import CoefficientProfile

INF = math.inf
_EQ_RTOL = 1e-12


class DomainError(ValueError):
    """An index lies below the Euler threshold ``-((n-2)/2)**2``."""


def _same(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= _EQ_RTOL * max(1.0, abs(a), abs(b))


def rho(v: float, n: int) -> float:
    """Positive Euler index ``sqrt(((n-2)/2)**2 + v) - (n-2)/2``."""
    if n < 2:
        raise DomainError(f"dimension must be >= 2, got {n}")
    h = 0.5 * (n - 2)
    disc = h * h + v
    if disc < 0:
        if disc > -1e-14:
            disc = 0.0
        else:
            raise DomainError(f"v={v} is below the Euler threshold {-h * h} for n={n}")
    return math.sqrt(disc) - h


def glassey(m: float) -> float:
    """``1 + 2/(m-1)`` for ``m > 1``, else ``inf``."""
    if m <= 1:
        return INF
    return 1.0 + 2.0 / (m - 1.0)


def strauss(m: float) -> float:
    """Positive root of ``2 + (m+1)p - (m-1)p**2``; ``inf`` for ``m <= 1``."""
    if m <= 1:
        return INF
    return (m + 1.0 + math.sqrt(m * m + 10.0 * m - 7.0)) / (2.0 * (m - 1.0))


def gamma_plain(p: float, m: float) -> float:
    return 2.0 + (m + 1.0) * p - (m - 1.0) * p * p


def gamma_quad(kind: str, p: float, n: int, d_inf: float = 0.0, v_inf: float = 0.0) -> float:
    """Evaluate one of the lifespan quadratics.

    ``kind`` is ``"plain"`` (uses ``m = n``), ``"g0"``, ``"g1"`` or ``"g2"``.
    """
    if kind == "plain":
        return gamma_plain(p, n)
    if kind == "g0":
        return -(n - 1.0) * p * (p - 1.0) + 2.0 * n * (p - 1.0) + 2.0
    if kind == "g1":
        return -(n + d_inf - 1.0) * p * (p - 1.0) + 2.0 * n * (p - 1.0) + 2.0
    if kind == "g2":
        r = rho(v_inf, n)
        p3 = (n + r) / (n + r - 1.0)
        return 2.0 * (n + r - 1.0) * (p - p3) + gamma_plain(p, n + d_inf)
    raise ValueError(f"unknown quadratic {kind!r}")


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else INF


@dataclass(frozen=True)
class ExponentSet:
    rho_v0: float
    rho_vinf: float
    rho_v0_d0: float
    pS_shift: float
    pG_shift: float
    p0: float
    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p_c: float

    def as_dict(self) -> dict:
        return asdict(self)


def p5_closed_form(n: int, d_inf: float, rho_vinf: float) -> float:
    m = n + d_inf
    if m <= 1:
        return INF
    b = 3.0 * n + d_inf + 2.0 * rho_vinf - 1.0
    disc = b * b - 8.0 * (m - 1.0) * (n + rho_vinf - 1.0)
    return (b + math.sqrt(disc)) / (2.0 * (m - 1.0))


def thresholds(profile: CoefficientProfile) -> ExponentSet:
    n, th = profile.n, profile.theta
    r0 = rho(profile.v0, n)
    rinf = rho(profile.v_inf, n)
    r0d = rho(profile.v0 + profile.d0, n)
    p1 = _ratio(n + r0, n + r0d + th - 2.0)
    p2 = _ratio(n + r0, n + r0 + th - 2.0)
    p3 = _ratio(n + rinf, n + rinf - 1.0)
    p4 = _ratio(n + r0d, n + r0d + th - 2.0)
    p5 = p5_closed_form(n, profile.d_inf, rinf)
    if math.isfinite(p5):
        g2 = gamma_quad("g2", p5, n, profile.d_inf, profile.v_inf)
        if abs(g2) > 1e-10 * max(1.0, p5 * p5 * abs(n + profile.d_inf - 1.0)):
            raise ArithmeticError(f"p5={p5} is not a root of gamma_2 (residual {g2})")
    pS = strauss(n + profile.d_inf)
    pG = glassey(n + rinf)
    return ExponentSet(
        rho_v0=r0, rho_vinf=rinf, rho_v0_d0=r0d, pS_shift=pS, pG_shift=pG,
        p0=max(p1, p2), p1=p1, p2=p2, p3=p3, p4=p4, p5=p5, p_c=max(pS, pG),
    )


# ---------------------------------------------------------------------------
# Lifespan classification

FORMS = ("power", "power_log", "exponential", "none")


@dataclass(frozen=True)
class LifespanBound:
    """``T_eps <~ eps**-a (ln 1/eps)**b``, or ``exp(C eps**-a)`` for the
    exponential form."""

    form: str
    a: float = 0.0
    b: float = 0.0
    case_id: str = "no-blow-up-claimed"

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        if self.form in ("power", "power_log") and not self.a > 0:
            raise ValueError(f"power-type bound needs a > 0, got {self.a}")

    def log_bound(self, eps: float) -> float:
        """``ln`` of the bound with unit constant, for comparing rows."""
        L = math.log(1.0 / eps)
        if self.form == "exponential":
            return eps ** (-self.a)
        if self.form == "none":
            return INF
        return self.a * L + self.b * math.log(L)

    def as_dict(self) -> dict:
        return asdict(self)


NONE = LifespanBound("none")
THEOREMS = ("scattering", "short_range", "general", "vanishing_damping")


class ClassificationError(ValueError):
    """The profile does not satisfy the named theorem's hypotheses."""


def _bound(case_id: str, a: float, b: float = 0.0) -> LifespanBound:
    return LifespanBound("power_log" if b != 0 else "power", a, b, case_id)


def _pick(candidates: list[LifespanBound]) -> LifespanBound:
    """Asymptotically smallest bound; ties go to the earliest row."""
    if not candidates:
        return NONE
    rank = {"power": 0, "power_log": 0, "exponential": 1}
    return min(
        enumerate(candidates),
        key=lambda ic: (rank[ic[1].form], ic[1].a, ic[1].b, ic[0]),
    )[1]


def _lt(a: float, b: float) -> bool:
    return a < b and not _same(a, b)


def _le(a: float, b: float) -> bool:
    return a < b or _same(a, b)


def _in_open(p: float, lo: float, hi: float) -> bool:
    return _lt(lo, p) and _lt(p, hi)


def _classify_scattering(profile: CoefficientProfile, p: float) -> LifespanBound:
    n = profile.n
    if profile.beta is None or profile.beta <= 1:
        raise ClassificationError("scattering theorem requires a damping bound with beta > 1")
    if profile.v0 != 0 or profile.v_inf != 0 or profile.d_inf != 0:
        raise ClassificationError("scattering theorem requires V = 0 and d_inf = 0")
    pS = strauss(n)
    ncrit = n / (n - 1.0)
    rows = []
    if _lt(1.0, p) and _le(p, ncrit):
        rows.append(_bound("scattering:1", 2 * p * (p - 1) / gamma_quad("g0", p, n)))
    if _le(ncrit, p) and _lt(p, pS):
        rows.append(_bound("scattering:2", 2 * p * (p - 1) / gamma_plain(p, n)))
    if _same(p, pS):
        rows.append(LifespanBound("exponential", p * (p - 1), 0.0, "scattering:3"))
    return _pick(rows)


def _classify_short_range(profile: CoefficientProfile, p: float) -> LifespanBound:
    n, d = profile.n, profile.d_inf
    if profile.v_inf != 0 or profile.v0 != 0:
        raise ClassificationError("short-range theorem requires v0 = v_inf = 0")
    if profile.theta != 2:
        raise ClassificationError("short-range theorem requires bounded damping (theta = 2)")
    p_c = max(glassey(n), strauss(n + d))
    if not _in_open(p, 1.0, p_c):
        return NONE
    ncrit = n / (n - 1.0)
    m = n + d
    big_d_1 = d > (n - 1) * (2.0 / p - 1.0)
    big_d_2 = d > n - 1 - 2.0 / p
    rows = []
    if _lt(p, ncrit) and big_d_1:
        rows.append(_bound("short_range:1", p - 1))
    if _same(p, ncrit) and big_d_1:
        rows.append(_bound("short_range:2", p - 1, (p - 1) * max(4 - n, 1)))
    if _in_open(p, ncrit, glassey(n)) and big_d_2:
        a = (p - 1) / ((n + 1) - (n - 1) * p)
        rows.append(_bound("short_range:3", a, a * max(3 - n, 0)))
    if _lt(p, ncrit) and not big_d_1:
        g1 = gamma_quad("g1", p, n, d)
        rows.append(_bound("short_range:4", 2 * p * (p - 1) / g1, -2 * (p - 1) / g1 * max(3 - n, 0)))
    if _same(p, ncrit) and not big_d_1:
        g = gamma_plain(p, m)
        rows.append(_bound("short_range:5", 2 * p * (p - 1) / g, 2 * (p - 1) / g))
    if _in_open(p, ncrit, strauss(m)) and not big_d_2:
        rows.append(_bound("short_range:6", 2 * p * (p - 1) / gamma_plain(p, m)))
    return _pick(rows)


def _classify_general(profile: CoefficientProfile, p: float) -> LifespanBound:
    n, d = profile.n, profile.d_inf
    if profile.v_inf < 0:
        raise ClassificationError("general theorem requires v_inf >= 0")
    ex = thresholds(profile)
    m = n + d
    rv = ex.rho_vinf
    rows = []
    if _in_open(p, ex.p0, ex.p_c):
        if _in_open(p, ex.p2, ex.p3):
            rows.append(_bound("general:1", p - 1))
        if _same(p, ex.p3) and _lt(ex.p2, ex.p3):
            rows.append(_bound("general:2", p - 1, p - 1))
        if _in_open(p, max(ex.p2, ex.p3), ex.pG_shift):
            rows.append(_bound("general:3", (p - 1) / (n + rv + 1 - (n + rv - 1) * p)))
        if _in_open(p, ex.p0, min(ex.p3, ex.p5)):
            g2 = gamma_quad("g2", p, n, d, profile.v_inf)
            rows.append(_bound("general:4", 2 * p * (p - 1) / g2))
        if _same(p, ex.p3) and _in_open(p, ex.p0, ex.pS_shift):
            g = gamma_plain(p, m)
            rows.append(_bound("general:5", 2 * p * (p - 1) / g, 2 * (p - 1) / g))
        if _in_open(p, max(ex.p0, ex.p3), ex.pS_shift):
            rows.append(_bound("general:6", 2 * p * (p - 1) / gamma_plain(p, m)))
    if _lt(ex.p4, p) and _le(p, ex.p0) and _lt(p, glassey(m)):
        rows.append(_bound("general:7", 2 * (p - 1) / ((m + 1) - (m - 1) * p)))
    return _pick(rows)


def _classify_vanishing(profile: CoefficientProfile, p: float) -> LifespanBound:
    n = profile.n
    if profile.d_inf != 0 or profile.d0 != 0 or profile.theta != 2:
        raise ClassificationError("vanishing-damping corollary needs compactly supported damping")
    rv = rho(profile.v_inf, n)
    rows = []
    if _in_open(p, 1.0, strauss(n)):
        rows.append(_bound("vanishing_damping:S", 2 * p * (p - 1) / gamma_plain(p, n)))
    if _in_open(p, 1.0, glassey(n + rv)):
        rows.append(_bound("vanishing_damping:G", (p - 1) / (n + rv + 1 - (n + rv - 1) * p)))
    return _pick(rows)


_CLASSIFIERS = {
    "scattering": _classify_scattering,
    "short_range": _classify_short_range,
    "general": _classify_general,
    "vanishing_damping": _classify_vanishing,
}


def classify(theorem: str, profile: CoefficientProfile, p: float) -> LifespanBound:
    """Select the lifespan row of ``theorem`` that applies at power ``p``.

    When several rows apply the asymptotically smallest upper bound wins.
    Returns the ``none`` bound when no blow-up is claimed at this ``p``.
    """
    try:
        fn = _CLASSIFIERS[theorem]
    except KeyError:
        raise ClassificationError(f"unknown theorem {theorem!r}") from None
    if not p > 1:
        raise ValueError("p must exceed 1")
    return fn(profile, p)
