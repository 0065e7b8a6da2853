"""Experiment configuration, orchestration and artifact emission.

A config is strict JSON with one flat section per module::

    {"kind": "sweep",
     "profile": {"family": "scattering", "n": 3, "R": 1.0, "params": {"mu": 2.0}},
     "sweep": {"p": 2.0, "epsilons": [40, 20, 10, 5, 4], "dr": 0.0125}}

Unknown keys anywhere are rejected.  ``run`` writes CSV artifacts and a
``summary.json`` holding every verdict and measured quantity into
``<out>/<kind>/``.  No randomness and no timestamps enter the artifacts, so
reruns of one config are byte-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import inspect
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exponent_calculus as ex
from . import radial_eigen as re_
from . import test_functions as tf
from . import wave_sim as ws
from .profiles import CoefficientProfile, ProfileError, builtin_profiles

KINDS = ("exponents", "eigen", "testfn", "sweep", "duality")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3


class ConfigError(ValueError):
    """The configuration is malformed or names an invalid profile."""


# ---------------------------------------------------------------------------
# config sections

@dataclass
class ProfileSpec:
    family: str = "free"
    n: int = 3
    R: float = 1.0
    params: dict = field(default_factory=dict)

    def build(self) -> CoefficientProfile:
        catalog = builtin_profiles()
        if self.family not in catalog:
            raise ConfigError(f"unknown profile family {self.family!r}")
        factory = catalog[self.family]
        allowed = set(inspect.signature(factory).parameters) - {"n", "R"}
        extra = set(self.params) - allowed
        if extra:
            raise ConfigError(f"unknown parameters for {self.family!r}: {sorted(extra)}")
        try:
            return factory(n=self.n, R=self.R, **self.params)
        except (ProfileError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid profile: {exc}") from None


@dataclass
class ExponentsSection:
    theorems: list = field(default_factory=lambda: list(ex.THEOREMS))
    p: list = field(default_factory=lambda: [2.0])
    # optional expected values of ExponentSet fields, checked to expect_tol
    expect: dict = field(default_factory=dict)
    expect_tol: float = 1e-12


@dataclass
class EigenSection:
    lambdas: list = field(default_factory=lambda: [0.0, 1.0])
    r_max: float = 200.0
    fit: bool = True
    power_tol: float = 0.02
    exp_tol: float = 0.05
    uniform_lambdas: list = field(default_factory=list)
    x_max: float = 20.0
    bound: float = 10.0


@dataclass
class TestfnSection:
    q: float = 1.0
    bq_t: list = field(default_factory=lambda: [10.0, 100.0, 1000.0])
    bq_r: list = field(default_factory=lambda: [0.0])
    identity_tol: float = 1e-4
    scaling_tol: float = 0.02
    # q values for the b_q upper-bound check; (n-1)/2 is excluded
    upper_q: list = field(default_factory=list)
    F0_p: list = field(default_factory=list)
    F1_p: list = field(default_factory=list)
    F0_T: list = field(default_factory=lambda: np.geomspace(1e4, 1e5, 7).tolist())
    F1_T: list = field(default_factory=lambda: np.geomspace(1e2, 1e3, 7).tolist())
    slope_tol: float = 0.05
    r_need: float = 1e3
    n_nodes: int = 64
    lam_min: float = 1e-4


@dataclass
class SweepSection:
    p: float = 2.0
    theorem: str = "scattering"
    epsilons: list = field(default_factory=lambda: np.geomspace(25.0, 2.5, 7).tolist())
    dr: float = 0.0125
    cfl: float = 0.5
    pad: int = 2
    margin: float = 2.0
    T_max: float = 3000.0
    M: float = 1e6
    tol: float = 0.05
    slope_tol: float = 0.15
    # optional accepted interval for a_hat; empty means "a_theory +- 15%"
    a_range: list = field(default_factory=list)


@dataclass
class DualitySection:
    lam: float = 1.0
    T: float = 4.0
    p: float = 2.0
    epsilon: float = 1.0
    dr: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    cfl: float = 0.5
    order: float = 2.0
    order_slack: float = 0.5
    factor: float = 10.0


@dataclass
class OutputSection:
    svg: bool = False


_SECTIONS = {
    "profile": ProfileSpec,
    "exponents": ExponentsSection,
    "eigen": EigenSection,
    "testfn": TestfnSection,
    "sweep": SweepSection,
    "duality": DualitySection,
    "output": OutputSection,
}


@dataclass
class ExperimentConfig:
    kind: str = "exponents"
    out: str | None = None
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    exponents: ExponentsSection | None = None
    eigen: EigenSection | None = None
    testfn: TestfnSection | None = None
    sweep: SweepSection | None = None
    duality: DualitySection | None = None
    output: OutputSection = field(default_factory=OutputSection)

    def section(self, kind: str):
        sec = getattr(self, kind)
        return sec if sec is not None else _SECTIONS[kind]()

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.out is not None:
            out["out"] = self.out
        for name in _SECTIONS:
            sec = getattr(self, name)
            if sec is not None:
                out[name] = dataclasses.asdict(sec)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _reject_constant(name):
    raise ConfigError(f"non-finite constant {name} is not valid JSON")


def _no_duplicates(pairs):
    keys = [k for k, _ in pairs]
    if len(keys) != len(set(keys)):
        raise ConfigError("duplicate key in config")
    return dict(pairs)


def _coerce(value, default, where: str):
    """Type-check ``value`` against the type of the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{where} must be an object")
        return value
    return value


def _number_list(values, where: str, *, positive: bool = False, allow_zero: bool = True) -> list:
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where} must contain finite numbers")
        if positive and (v < 0 or (v == 0 and not allow_zero)):
            raise ConfigError(f"{where} must contain positive numbers")
        out.append(float(v))
    return out


def _section(cls, data, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    inst = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    for key, value in data.items():
        setattr(inst, key, _coerce(value, getattr(inst, key), f"{name}.{key}"))
    return inst


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in KINDS + ("all",):
        raise ConfigError(f"unknown kind {cfg.kind!r}")
    prof = cfg.profile
    if prof.n < 2:
        raise ConfigError("profile.n must be >= 2")
    if prof.R <= 0:
        raise ConfigError("profile.R must be positive")
    cfg.profile.params = {k: (_number_list(v, f"profile.params.{k}") if isinstance(v, list)
                              else _coerce(v, 0.0, f"profile.params.{k}"))
                          for k, v in prof.params.items()}
    if cfg.exponents is not None:
        s = cfg.exponents
        bad = [t for t in s.theorems if t not in ex.THEOREMS]
        if bad:
            raise ConfigError(f"unknown theorems {bad}")
        s.p = _number_list(s.p, "exponents.p")
        if any(v <= 1 for v in s.p):
            raise ConfigError("exponents.p must exceed 1")
        names = {f.name for f in dataclasses.fields(ex.ExponentSet)}
        if set(s.expect) - names:
            raise ConfigError(f"unknown exponent names {sorted(set(s.expect) - names)}")
        s.expect = {k: _coerce(v, 0.0, f"exponents.expect.{k}") for k, v in s.expect.items()}
    if cfg.eigen is not None:
        s = cfg.eigen
        s.lambdas = _number_list(s.lambdas, "eigen.lambdas", positive=True)
        s.uniform_lambdas = _number_list(s.uniform_lambdas, "eigen.uniform_lambdas",
                                         positive=True, allow_zero=False)
        if any(v > 1 for v in s.uniform_lambdas):
            raise ConfigError("eigen.uniform_lambdas must lie in (0, 1]")
        if s.r_max <= 0:
            raise ConfigError("eigen.r_max must be positive")
    if cfg.testfn is not None:
        s = cfg.testfn
        if s.q <= 0:
            raise ConfigError("testfn.q must be positive")
        for key in ("bq_t", "bq_r", "F0_p", "F1_p", "F0_T", "F1_T", "upper_q"):
            setattr(s, key, _number_list(getattr(s, key), f"testfn.{key}", positive=True))
        if any(v <= 0 for v in s.bq_t + s.F0_T + s.F1_T):
            raise ConfigError("testfn times must be positive")
        if any(v <= 1 for v in s.F0_p + s.F1_p):
            raise ConfigError("testfn powers must exceed 1")
        half = 0.5 * (prof.n - 1)
        if any(v <= 0 or abs(v - half) < 1e-12 for v in s.upper_q):
            raise ConfigError(f"testfn.upper_q must be positive and differ from {half:g}")
    if cfg.sweep is not None:
        s = cfg.sweep
        if s.theorem not in ex.THEOREMS:
            raise ConfigError(f"unknown theorem {s.theorem!r}")
        s.epsilons = _number_list(s.epsilons, "sweep.epsilons", positive=True, allow_zero=False)
        s.a_range = _number_list(s.a_range, "sweep.a_range")
        if s.a_range and (len(s.a_range) != 2 or s.a_range[0] > s.a_range[1]):
            raise ConfigError("sweep.a_range must be [lo, hi]")
        if s.p <= 1 or s.dr <= 0 or not 0 < s.cfl <= 0.9 or s.T_max <= 0 or s.M <= 1:
            raise ConfigError("sweep needs p > 1, dr > 0, 0 < cfl <= 0.9, T_max > 0, M > 1")
        if s.pad < 0:
            raise ConfigError("sweep.pad must be >= 0")
    if cfg.duality is not None:
        s = cfg.duality
        s.dr = _number_list(s.dr, "duality.dr", positive=True, allow_zero=False)
        if len(s.dr) < 2:
            raise ConfigError("duality.dr needs at least two grid sizes")
        if s.lam < 0 or s.T <= 0 or s.p <= 1 or s.epsilon <= 0:
            raise ConfigError("duality needs lam >= 0, T > 0, p > 1, epsilon > 0")
    # the profile must build and satisfy its declared invariants
    problems = cfg.profile.build().check()
    if problems:
        raise ConfigError("profile invariants violated: " + "; ".join(problems))


def parse_config(text: str) -> ExperimentConfig:
    """Parse strict JSON text into a validated ``ExperimentConfig``."""
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates,
                          parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"kind", "out"} - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = ExperimentConfig()
    if "kind" in data:
        cfg.kind = _coerce(data["kind"], "", "kind")
    if "out" in data:
        if data["out"] is not None and not isinstance(data["out"], str):
            raise ConfigError("out must be a string")
        cfg.out = data["out"]
    for name, cls in _SECTIONS.items():
        if name in data:
            setattr(cfg, name, _section(cls, data[name], name))
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# artifacts

def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def csv_text(rows: list[dict], columns=None) -> str:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        wr.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def svg_line_chart(series: dict, *, title: str = "", xlabel: str = "", ylabel: str = "",
                   width: int = 480, height: int = 320) -> str:
    """Minimal static SVG line chart; ``series`` maps label -> (x, y)."""
    pad = 48
    pts = [(np.asarray(x, float), np.asarray(y, float)) for x, y in series.values()]
    finite = [(x[np.isfinite(x) & np.isfinite(y)], y[np.isfinite(x) & np.isfinite(y)])
              for x, y in pts]
    xs = np.concatenate([x for x, _ in finite] or [np.zeros(1)])
    ys = np.concatenate([y for _, y in finite] or [np.zeros(1)])
    if xs.size == 0:
        xs = ys = np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{title}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{height / 2:.1f}" transform="rotate(-90 14 {height / 2:.1f})" '
           f'text-anchor="middle">{ylabel}</text>',
           f'<text x="{pad}" y="{height - pad + 14}" font-size="10">{x0:.4g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" '
           f'text-anchor="end">{x1:.4g}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.4g}</text>',
           f'<text x="{pad - 4}" y="{pad + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for k, (label, (x, y)) in enumerate(zip(series, finite)):
        c = colors[k % len(colors)]
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" points="{path}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 14 * (k + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RunResult:
    kind: str
    status: int
    verdicts: dict
    measured: dict
    artifacts: dict
    error: str | None = None

    def summary(self, cfg: ExperimentConfig) -> dict:
        return _jsonable({"kind": self.kind, "status": self.status, "passed": self.status == 0,
                          "verdicts": self.verdicts, "measured": self.measured,
                          "artifacts": sorted(self.artifacts), "error": self.error,
                          "config": cfg.to_dict()})


class _Check(Exception):
    pass


# ---------------------------------------------------------------------------
# experiments

def _run_exponents(cfg: ExperimentConfig, jobs: int, res: RunResult) -> None:
    s = cfg.section("exponents")
    prof = cfg.profile.build()
    es = ex.thresholds(prof)
    d = es.as_dict()
    res.artifacts["exponents.csv"] = csv_text([{"name": k, "value": v} for k, v in d.items()],
                                              ["name", "value"])
    res.measured["exponents"] = d
    res.verdicts["p0_is_max"] = es.p0 == max(es.p1, es.p2)
    res.verdicts["p_c_is_max"] = es.p_c == max(es.pS_shift, es.pG_shift)
    for name, want in sorted(s.expect.items()):
        got = d[name]
        ok = got == want or abs(got - want) <= s.expect_tol * max(1.0, abs(want))
        res.verdicts[f"expect_{name}"] = bool(ok)
    rows = []
    for theorem in s.theorems:
        for p in s.p:
            try:
                b = ex.classify(theorem, prof, p)
                rows.append({"theorem": theorem, "p": p, "form": b.form, "a": b.a, "b": b.b,
                             "case_id": b.case_id})
            except ex.ClassificationError as exc:
                rows.append({"theorem": theorem, "p": p, "form": "not_applicable", "a": None,
                             "b": None, "case_id": str(exc)})
    res.artifacts["lifespan.csv"] = csv_text(rows, ["theorem", "p", "form", "a", "b", "case_id"])
    res.measured["lifespan"] = rows


def _target_exp(prof: CoefficientProfile) -> float:
    return 0.0 - (prof.n - 1 - prof.d_inf) / 2.0


def _run_eigen(cfg: ExperimentConfig, jobs: int, res: RunResult) -> None:
    s = cfg.section("eigen")
    prof = cfg.profile.build()
    fits, series = [], {}
    for k, lam in enumerate(s.lambdas):
        need = 10.0 * max(1.0, 1.0 / max(lam, re_.LAMBDA_FLOOR)) * 1.001
        f = re_.solve_phi(prof, lam, max(s.r_max, need))
        inv = re_.check_invariants(f, prof)
        res.artifacts[f"phi_{k}.csv"] = f.to_csv()
        res.verdicts[f"invariants_lam{k}"] = inv["ok"]
        res.measured[f"ode_residual_lam{k}"] = inv["ode_residual"]
        series[f"lam={lam:g}"] = (np.log10(f.grid), f.logvals / math.log(10))
        if not s.fit:
            continue
        model = "power" if lam == 0 else "exp_power"
        try:
            fit = re_.fit_asymptotics(f, model)
        except ValueError as exc:
            fits.append({"lam": lam, "model": model, "estimate": None, "target": None,
                         "passed": None, "note": str(exc)})
            continue
        if lam == 0:
            target, tol = ex.rho(prof.v_inf, prof.n), s.power_tol
        else:
            target, tol = _target_exp(prof), s.exp_tol
        # relative tolerance, read as absolute when the target is zero
        ok = abs(fit.exponent_estimate - target) <= tol * max(abs(target), 1.0)
        fits.append({"lam": lam, "model": model, "estimate": fit.exponent_estimate,
                     "target": target, "passed": bool(ok), "note": ""})
        res.verdicts[f"asymptotics_lam{k}"] = bool(ok)
    if fits:
        res.artifacts["asymptotics.csv"] = csv_text(
            fits, ["lam", "model", "estimate", "target", "passed", "note"])
        res.measured["asymptotics"] = fits
    if s.uniform_lambdas:
        rep = re_.uniform_bound_check(prof, s.uniform_lambdas, x_max=s.x_max, bound=s.bound)
        rows = [{"lam": lam, "c_lower": lo, "c_upper": hi}
                for lam, (lo, hi) in sorted(rep.per_lambda.items())]
        res.artifacts["uniform_bound.csv"] = csv_text(rows, ["lam", "c_lower", "c_upper"])
        res.measured["uniform_spread"] = rep.spread
        res.verdicts["uniform_bound"] = rep.passed
    if cfg.output.svg:
        res.artifacts["phi.svg"] = svg_line_chart(series, title=f"phi_lam ({prof.name})",
                                                  xlabel="log10 r", ylabel="log10 phi")


def _run_testfn(cfg: ExperimentConfig, jobs: int, res: RunResult) -> None:
    s = cfg.section("testfn")
    prof = cfg.profile.build()
    fld = tf.TestFunctionField(prof, q=s.q, r_need=max(s.r_need, max(s.bq_t + [0.0]) + prof.R
                                                       + max(s.bq_r + [0.0])),
                               n_nodes=s.n_nodes, lam_min=s.lam_min)
    rows = []
    for t in s.bq_t:
        for r in s.bq_r:
            b = tf.bq(t, r, fld)
            ident = tf.bq_time_identity(t, r, fld)
            rows.append({"t": t, "r": r, "bq": b, "scaled": (t + prof.R) ** s.q * b,
                         "identity_residual": ident})
    if rows:
        res.artifacts["bq.csv"] = csv_text(rows)
        worst = max(row["identity_residual"] for row in rows)
        res.measured["bq_identity_max"] = worst
        res.verdicts["bq_identity"] = bool(worst <= s.identity_tol)
        at0 = [row for row in rows if row["r"] == 0.0]
        if len(at0) >= 2:
            a, b = at0[-2]["scaled"], at0[-1]["scaled"]
            drift = abs(b - a) / abs(b)
            res.measured["bq_scaling_drift"] = drift
            res.verdicts["bq_scaling"] = bool(drift <= s.scaling_tol)
    for q in s.upper_q:
        rep = tf.bq_upper_check(fld, q)
        res.artifacts[f"bq_upper_q{q:g}.csv"] = csv_text(rep.rows, ["t", "r", "bq", "ratio"])
        res.measured[f"bq_upper_q{q:g}"] = rep.row()
        res.verdicts[f"bq_upper_q{q:g}"] = rep.passed
    slopes, series = [], {}
    phi0 = None
    for which, ps, T_grid in (("F0", s.F0_p, s.F0_T), ("F1", s.F1_p, s.F1_T)):
        for p in ps:
            if phi0 is None:
                phi0 = re_.solve_phi(prof, 0.0, max(1e4, max(s.F0_T + s.F1_T) + prof.R))
            est = tf.F0_estimate if which == "F0" else tf.F1_estimate
            try:
                fit = est(prof, p, T_grid, phi0=phi0)
            except tf.IntegralDivergence as exc:
                slopes.append({"integral": which, "p": p, "slope": None, "expected_slope": None,
                               "log_power": None, "expected_log_power": None, "log_flag": None,
                               "passed": None, "note": str(exc)})
                continue
            want = fit.expected_slope
            ok = abs(fit.slope - want) <= s.slope_tol * max(abs(want), 1.0)
            if fit.expected_log_power:
                ok = ok and fit.log_flag
            slopes.append({"integral": which, "p": p, "slope": fit.slope, "expected_slope": want,
                           "log_power": fit.log_power,
                           "expected_log_power": fit.expected_log_power,
                           "log_flag": fit.log_flag, "passed": bool(ok), "note": ""})
            res.verdicts[f"{which}_slope_p{p:g}"] = bool(ok)
            series[f"{which} p={p:g}"] = (np.log10(fit.T), np.log10(fit.values))
    if slopes:
        res.artifacts["slopes.csv"] = csv_text(
            slopes, ["integral", "p", "slope", "expected_slope", "log_power",
                     "expected_log_power", "log_flag", "passed", "note"])
        res.measured["slopes"] = slopes
    if cfg.output.svg and series:
        res.artifacts["slopes.svg"] = svg_line_chart(series, title="integral estimates",
                                                     xlabel="log10 T", ylabel="log10 F")


def _run_sweep(cfg: ExperimentConfig, jobs: int, res: RunResult) -> None:
    s = cfg.section("sweep")
    prof = cfg.profile.build()
    bound = ex.classify(s.theorem, prof, s.p)
    res.measured["bound"] = bound.as_dict()
    template = ws.CauchyProblem(prof, s.p, 1.0)
    grid = ws.Grid(dr=s.dr, cfl=s.cfl, margin=s.margin, pad=s.pad)
    table = ws.epsilon_sweep(template, s.epsilons, grid, T_max=s.T_max, jobs=jobs,
                             strict=True, M=s.M, tol=s.tol)
    res.artifacts["sweep.csv"] = table.to_csv()
    res.measured["usable_rows"] = len(table.usable)
    res.measured["censored_rows"] = len(table.censored)
    rep = ws.fit_and_compare(table, bound, slope_tol=s.slope_tol)
    res.measured["fit"] = rep.row()
    res.artifacts["fit.csv"] = csv_text([rep.row()])
    res.verdicts["upper_bound_consistent"] = rep.upper_bound_ok
    if bound.form in ("power", "power_log"):
        lo, hi = s.a_range or (0.85 * bound.a, 1.15 * bound.a)
        res.verdicts["a_hat_in_range"] = bool(lo <= rep.fit.a_hat <= hi)
        res.measured["a_range"] = [lo, hi]
    if cfg.output.svg:
        rows = table.usable
        x = [math.log10(1.0 / m.epsilon) for m in rows]
        y = [math.log10(m.T_est) for m in rows]
        ser = {"measured": (x, y)}
        if math.isfinite(rep.C_fit):
            ser["C eps^-a"] = (x, [math.log10(rep.C_fit) + rep.a_theory * v for v in x])
        res.artifacts["sweep.svg"] = svg_line_chart(ser, title="lifespan sweep",
                                                    xlabel="log10 1/eps", ylabel="log10 T")


def duality_study(profile: CoefficientProfile, s: DualitySection) -> list[dict]:
    """Linear runs on each grid: residual, right-hand side, energy and cone checks."""
    fld = tf.TestFunctionField(profile, T=s.T, p=s.p)
    problem = ws.CauchyProblem(profile, s.p, s.epsilon, nonlinear=False)
    rows = []
    for dr in s.dr:
        out = ws.evolve(problem, ws.Grid(dr=dr, cfl=s.cfl), s.T, record=True)
        traj = out.trajectory
        rep = tf.duality_terms(traj, fld, s.lam)
        e = traj.energy[1:]
        e_ok = bool(np.all(np.diff(e) <= 1e-12 * np.max(np.abs(e))))
        cone = traj.t + problem.R + (ws.Grid().pad + 1) * dr
        s_ok = bool(np.all(traj.support <= cone + 1e-12))
        rows.append({"dr": dr, "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
                     "energy_nonincreasing": e_ok, "contained": s_ok})
    for k, row in enumerate(rows):
        if k + 1 < len(rows):
            nxt = rows[k + 1]
            row["truncation"] = abs(row["rhs"] - nxt["rhs"]) / abs(nxt["rhs"])
            row["order"] = math.log(row["residual"] / nxt["residual"]) / math.log(
                row["dr"] / nxt["dr"])
        else:
            row["truncation"] = None
            row["order"] = None
    return rows


def _run_duality(cfg: ExperimentConfig, jobs: int, res: RunResult) -> None:
    s = cfg.section("duality")
    prof = cfg.profile.build()
    rows = duality_study(prof, s)
    res.artifacts["duality.csv"] = csv_text(
        rows, ["dr", "lhs", "rhs", "residual", "truncation", "order", "energy_nonincreasing",
               "contained"])
    res.measured["duality"] = rows
    res.verdicts["residual_within_truncation"] = all(
        r["residual"] <= s.factor * r["truncation"] for r in rows if r["truncation"] is not None)
    res.verdicts["order"] = all(r["order"] >= s.order - s.order_slack
                                for r in rows if r["order"] is not None)
    res.verdicts["energy_nonincreasing"] = all(r["energy_nonincreasing"] for r in rows)
    res.verdicts["contained"] = all(r["contained"] for r in rows)
    if cfg.output.svg:
        res.artifacts["duality.svg"] = svg_line_chart(
            {"residual": ([math.log10(r["dr"]) for r in rows],
                          [math.log10(r["residual"]) for r in rows])},
            title="duality residual", xlabel="log10 dr", ylabel="log10 residual")


_RUNNERS = {
    "exponents": _run_exponents,
    "eigen": _run_eigen,
    "testfn": _run_testfn,
    "sweep": _run_sweep,
    "duality": _run_duality,
}

NUMERICAL_ERRORS = (re_.ConstructionError, tf.QuadratureError, ws.NumericalInstability,
                    ws.SweepError, ArithmeticError, FloatingPointError)


def run_kind(cfg: ExperimentConfig, kind: str, jobs: int = 1) -> RunResult:
    res = RunResult(kind, EXIT_OK, {}, {}, {})
    try:
        _RUNNERS[kind](cfg, jobs, res)
    except NUMERICAL_ERRORS as exc:
        res.status, res.error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
        return res
    except ValueError as exc:
        # a precondition the config validation could not see
        res.status, res.error = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
        return res
    if not all(bool(v) for v in res.verdicts.values()):
        res.status = EXIT_CHECK
    return res


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def resolve_out(cfg: ExperimentConfig, out: str | None = None) -> Path:
    """``BLOWUP_LAB_OUT`` beats ``out`` beats the config's ``out`` beats ``./blowup_lab_out``."""
    return Path(os.environ.get("BLOWUP_LAB_OUT") or out or cfg.out or "blowup_lab_out")


def run(cfg: ExperimentConfig, out: str | None = None, jobs: int = 1) -> int:
    """Run the configured experiment(s); returns the exit status.

    ``kind = "all"`` runs every kind whose section is present (always
    ``exponents``).  Artifacts for each kind go to ``<out>/<kind>/``.
    """
    root = resolve_out(cfg, out)
    if cfg.kind == "all":
        kinds = [k for k in KINDS if k == "exponents" or getattr(cfg, k) is not None]
    else:
        kinds = [cfg.kind]
    statuses = []
    overview = {}
    for kind in kinds:
        res = run_kind(cfg, kind, jobs)
        statuses.append(res.status)
        overview[kind] = {"status": res.status, "verdicts": res.verdicts, "error": res.error}
        if res.status == EXIT_CONFIG:
            continue
        base = root / kind
        for name, text in sorted(res.artifacts.items()):
            _write(base / name, text)
        _write(base / "summary.json",
               json.dumps(res.summary(cfg), indent=2, sort_keys=True, allow_nan=False) + "\n")
    if cfg.kind == "all":
        _write(root / "summary.json",
               json.dumps(_jsonable(overview), indent=2, sort_keys=True) + "\n")
    if EXIT_CONFIG in statuses:
        return EXIT_CONFIG
    if EXIT_NUMERICAL in statuses:
        return EXIT_NUMERICAL
    if EXIT_CHECK in statuses:
        return EXIT_CHECK
    return EXIT_OK


__all__ = [
    "KINDS", "ConfigError", "ProfileSpec", "ExponentsSection", "EigenSection", "TestfnSection",
    "SweepSection", "DualitySection", "OutputSection", "ExperimentConfig", "parse_config",
    "load_config", "csv_text", "svg_line_chart", "RunResult", "run_kind", "run", "resolve_out",
    "duality_study", "builtin_profiles", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_CHECK",
]
