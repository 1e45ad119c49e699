"""Command-line front end: ``stefan-lab {solve-exact,solve-bvp,verify,symmetry,surfaces}``.

Every subcommand reads one JSON config (unknown keys are rejected), writes its
CSV tables and a ``report.json`` atomically into ``--out`` and exits with

    0  success
    2  numerical failure (non-convergence or a failed check)
    3  validation failure (bad config or invalid-regime parameters)
    4  I/O failure
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exact_stefan as ex
from . import reconstruction as rc
from . import reduced_bvp as rb
from . import symmetry as sy
from .model import Diffusivity, Flux, InvalidParameters, PhysicalParameters, StefanProblem
from .special_functions import ConvergenceError, DomainError

log = logging.getLogger("stefan_lab")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NUMERIC, EXIT_VALIDATION, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "STEFAN_LAB_THREADS"

DEFAULT_CONFIG: dict = {
    "parameters": PhysicalParameters(1.0, 2.0, 1.0, 0.2, 1.0, 0.5, -1.0, 1.0).as_dict(),
    "d1": {"kind": "power", "c": 1.0, "n": -1.0},
    "d2": {"kind": "constant", "c": 1.0},
    "flux_kind": "constant",
    "solid_flux_sign": -1,
    "guess": None,
    "tol": 1e-12,
    "seed": 0,
    "profile": {"n_liquid": 101, "n_solid": 101},
    "verify": {
        "n_interior": 50,
        "n_surface": 20,
        "h_pde": [0.1, 0.05, 0.025],
        "h_surface": [1e-2, 5e-3, 2.5e-3, 1.25e-3],
        "margin": 0.3,
        "far_field_level": 40.0,
    },
    "surfaces": {"times": [0.0, 1.0, 2.0], "n_r": 41, "r_max": None},
    "symmetry": {"n_draws": 20, "epsilon": 0.7, "n_equivalence": 5, "n_invariance_points": 10},
}

# acceptance thresholds carried into every report entry
TOL_TRANSCENDENTAL = 1e-10
TOL_ODE_U = 1e-6
TOL_ODE_V = 1e-8
TOL_CROSS_PARAMS = 1e-6
TOL_CROSS_PROFILE = 1e-4
TOL_STEFAN = 1e-5
TOL_DIRICHLET = 1e-8
TOL_FAR_FIELD_REL = 1e-12
MIN_ORDER = 1.95
CONTROL_FACTOR = 10.0
TOL_SURFACE = 1e-12
TOL_FLOW = 1e-13
TOL_ROUND_TRIP = 1e-14
TOL_COVARIANCE = 1e-8


class ConfigError(Exception):
    """Malformed or inconsistent configuration (exit 3)."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _merge(defaults: dict, given: dict, path: str = "") -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys at {path or 'top level'}: {unknown}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        # diffusivity specs are replaced whole; their keys are checked by Diffusivity.from_dict
        if isinstance(defaults[k], dict) and k not in ("d1", "d2", "parameters"):
            out[k] = _merge(defaults[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    """Resolved configuration: defaults, then the file, then command-line flags."""

    raw: dict
    problem: StefanProblem = field(repr=False)

    @classmethod
    def load(cls, path: str | None, tol: float | None = None, seed: int | None = None) -> RunConfig:
        given: dict = {}
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise OSError(f"cannot read config {path}: {exc}") from exc
            try:
                given = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        raw = _merge(DEFAULT_CONFIG, given)
        if tol is not None:
            raw["tol"] = tol
        if seed is not None:
            raw["seed"] = seed
        return cls(raw, cls._build_problem(raw))

    @staticmethod
    def _build_problem(raw: dict) -> StefanProblem:
        par = raw["parameters"]
        if not isinstance(par, dict):
            raise ConfigError("parameters must be a JSON object")
        names = set(DEFAULT_CONFIG["parameters"])
        if set(par) != names:
            extra, missing = sorted(set(par) - names), sorted(names - set(par))
            raise ConfigError(f"parameters: unknown keys {extra}, missing keys {missing}")
        if not (isinstance(raw["tol"], (int, float)) and raw["tol"] > 0):
            raise ConfigError("tol must be positive")
        if not isinstance(raw["seed"], int):
            raise ConfigError("seed must be an integer")
        g = raw["guess"]
        if g is not None and not (isinstance(g, list) and len(g) == 2):
            raise ConfigError("guess must be null or [omega2, mu]")
        if raw["flux_kind"] not in ("constant", "inverse_sqrt"):
            raise ConfigError("flux_kind must be 'constant' or 'inverse_sqrt'")
        params = PhysicalParameters(**{k: par[k] for k in sorted(names)})
        flux = Flux(raw["flux_kind"], params.q)
        try:
            d1 = Diffusivity.from_dict(raw["d1"])
            d2 = Diffusivity.from_dict(raw["d2"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"incomplete diffusivity spec: {exc}") from exc
        return StefanProblem(params, d1, d2, flux, solid_flux_sign=raw["solid_flux_sign"])

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _threads() -> int:
    val = os.environ.get(THREADS_ENV)
    if val is None or val == "":
        return 1
    try:
        n = int(val)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {val!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {val!r}")
    return n


# ---------------------------------------------------------------------------
# Reports and files
# ---------------------------------------------------------------------------

class Report:
    """JSON run report; each check records the value, its tolerance and the verdict."""

    def __init__(self, command: str, cfg: RunConfig) -> None:
        self.data: dict = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config_hash": cfg.config_hash,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "solution": {},
            "checks": [],
            "info": {},
        }

    def check(self, name: str, value: float, tolerance: float, mode: str = "max") -> bool:
        """Record ``value <= tolerance`` (mode ``max``) or ``value >= tolerance`` (mode ``min``)."""
        value = float(value)
        ok = value <= tolerance if mode == "max" else value >= tolerance
        ok = bool(ok and math.isfinite(value))
        self.data["checks"].append(
            {"name": name, "value": value, "tolerance": float(tolerance), "mode": mode, "passed": ok}
        )
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.data["checks"])

    def to_json(self) -> str:
        self.data["passed"] = self.passed
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Solvers shared by several commands
# ---------------------------------------------------------------------------

def _solve_exact(cfg: RunConfig) -> ex.SimilaritySolution:
    if cfg.problem.flux.kind != "constant":
        raise InvalidParameters("the exact solution needs a constant flux")
    g = cfg.raw["guess"]
    return ex.solve_parameters(cfg.problem, tuple(g) if g else None, tol=cfg.raw["tol"])


def _solve_bvp(cfg: RunConfig) -> rb.ReducedProfiles:
    if cfg.problem.flux.kind != "constant":
        raise InvalidParameters("the reduced problem needs a constant flux")
    g = cfg.raw["guess"]
    seeds = [tuple(g)] if g else rb.scan_shooting(cfg.problem).seeds()
    if not seeds:
        raise ConvergenceError("shooting sign scan found no bracketing cell for (omega2, mu)")
    last: Exception | None = None
    for seed in seeds:
        try:
            return rb.solve_reduced_bvp(cfg.problem, seed, tol=min(1e-10, 100 * cfg.raw["tol"]))
        except (ConvergenceError, DomainError) as exc:
            last = exc
    raise ConvergenceError(f"shooting failed from every seed: {last}")


def _is_exact_family(problem: StefanProblem) -> bool:
    try:
        ex.exact_case(problem)
    except InvalidParameters:
        return False
    return True


def _solution_block(omega1, omega2, mu) -> dict:
    return {"omega1": float(omega1), "omega2": float(omega2), "mu": float(mu)}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_solve_exact(cfg: RunConfig, out: Path) -> Report:
    rep = Report("solve-exact", cfg)
    sol = _solve_exact(cfg)
    rep.data["solution"] = _solution_block(sol.omega1, sol.omega2, sol.mu) | {"phi_omega2": sol.phi_omega2}
    f1, f2 = sol.residuals()
    rep.check("transcendental_residual_1", abs(f1), TOL_TRANSCENDENTAL)
    rep.check("transcendental_residual_2", abs(f2), TOL_TRANSCENDENTAL)
    rep.check("omega2_minus_R", sol.omega2 - sol.omega1, 0.0, mode="min")
    ode = ex.verify_ode_residual(sol)
    rep.check("ode_residual_liquid", ode.u_residual, TOL_ODE_U)
    rep.check("ode_residual_solid", ode.v_residual, TOL_ODE_V)
    rep.data["info"]["front_residuals"] = {"evaporation": ode.evaporation_bc, "melting": ode.melting_bc}
    pr = cfg.raw["profile"]
    liquid, solid = ex.profile_table(sol, pr["n_liquid"], pr["n_solid"])
    rows = [("liquid", w, u) for w, u in liquid] + [("solid", w, v) for w, v in solid]
    _atomic_write(out / "profile.csv", _csv_text(["phase", "omega", "temperature"], rows))
    return rep


def cmd_solve_bvp(cfg: RunConfig, out: Path) -> Report:
    rep = Report("solve-bvp", cfg)
    prof = _solve_bvp(cfg)
    rep.data["solution"] = _solution_block(prof.omega1, prof.omega2, prof.mu) | {"omega_max": prof.omega_max}
    rep.check("mismatch_liquid", abs(prof.mismatch[0]), 1e-9)
    rep.check("mismatch_solid", abs(prof.mismatch[1]), 1e-9)
    rep.data["info"]["tail_bound"] = prof.tail_bound
    if _is_exact_family(cfg.problem):
        sol = ex.solve_parameters(cfg.problem, (prof.omega2, prof.mu), tol=cfg.raw["tol"])
        rep.check("cross_omega2_rel", abs(prof.omega2 / sol.omega2 - 1), TOL_CROSS_PARAMS)
        rep.check("cross_mu_rel", abs(prof.mu / sol.mu - 1), TOL_CROSS_PARAMS)
        rep.check("cross_profile_max", rb.compare_with_exact(prof, sol).worst, TOL_CROSS_PROFILE)
    rows = [("liquid", w, u) for w, u in prof.liquid] + [("solid", w, v) for w, v in prof.solid]
    _atomic_write(out / "profile.csv", _csv_text(["phase", "omega", "temperature"], rows))
    return rep


def _observed_order(errors: list[float], hs: list[float]) -> float:
    """Order from the two finest levels."""
    return math.log(errors[-2] / errors[-1]) / math.log(hs[-2] / hs[-1])


def cmd_verify(cfg: RunConfig, out: Path, solution_report: str | None = None) -> Report:
    rep = Report("verify", cfg)
    if solution_report is not None:
        try:
            prior = json.loads(Path(solution_report).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"solution report {solution_report} is not valid JSON") from exc
        if prior.get("config_hash") != cfg.config_hash:
            raise ConfigError("solution report was produced from a different config (hash mismatch)")
        rep.data["info"]["solution_report"] = str(solution_report)
    vc = cfg.raw["verify"]
    if _is_exact_family(cfg.problem):
        sol = _solve_exact(cfg)
        rep.data["info"]["backend"] = "exact"
    else:
        sol = _solve_bvp(cfg)
        rep.data["info"]["backend"] = "shooting"
    field_ = rc.FieldEvaluator(sol)
    rep.data["solution"] = _solution_block(field_.omega1, field_.omega2, field_.mu)
    rng = np.random.default_rng(cfg.raw["seed"])
    hs = [float(h) for h in vc["h_pde"]]
    margin = max(vc["margin"], 3.5 * hs[0])
    rows: list[tuple] = []
    pool = ThreadPoolExecutor(max_workers=_threads())
    try:
        for phase in ("liquid", "solid"):
            pts = rc.interior_samples(field_, phase, vc["n_interior"], rng, margin)
            res = np.array(list(pool.map(lambda p: [rc.pde_residual(field_, p, h=h) for h in hs], pts)))
            worst = res.max(axis=0)
            for i, r in enumerate(res):
                rows += [("pde", phase, i, h, v) for h, v in zip(hs, r)]
            rep.check(f"pde_order_{phase}", _observed_order(list(worst), hs), MIN_ORDER, mode="min")
            rep.data["info"][f"pde_max_{phase}"] = [float(v) for v in worst]
            if phase == "liquid":
                bad = rc.PerturbedField(field_, lambda p: 0.01 * p[1] ** 2)
                ctrl = max(pool.map(lambda p: rc.pde_residual(bad, p, h=hs[-1]), pts))
                rep.check("control_corrupted_pde", ctrl, CONTROL_FACTOR * worst[-1], mode="min")
    finally:
        pool.shutdown()

    s1 = rc.surface_samples(field_, 1, vc["n_surface"], rng)
    s2 = rc.surface_samples(field_, 2, vc["n_surface"], rng)
    last = None
    for h in vc["h_surface"]:
        last = rc.stefan_residuals(field_, s1, s2, h=h)
        rows.append(("stefan_evaporation", "interface", 0, h, last.evaporation_flux))
        rows.append(("stefan_melting", "interface", 0, h, last.melting_flux))
    rep.check("stefan_evaporation", last.evaporation_flux, TOL_STEFAN)
    rep.check("stefan_melting", last.melting_flux, TOL_STEFAN)
    rep.check("dirichlet", last.dirichlet_worst, TOL_DIRICHLET)
    wrong = rc.FieldEvaluator(sol, frame_speed=1.1 * field_.mu)
    ws1 = [rc.surface_point(wrong.surfaces[0], p.t, math.hypot(p.x1, p.x2)) for p in s1]
    ws2 = [rc.surface_point(wrong.surfaces[1], p.t, math.hypot(p.x1, p.x2)) for p in s2]
    ctrl = rc.stefan_residuals(wrong, ws1, ws2, h=vc["h_surface"][-1])
    rep.check("control_wrong_speed_stefan", ctrl.evaporation_flux, CONTROL_FACTOR * TOL_STEFAN, mode="min")

    par = cfg.problem.params
    radius = 2.0 * vc["far_field_level"] / field_.mu
    ff = rc.far_field_check(field_, radius, 1.0)
    bound = TOL_FAR_FIELD_REL * abs(par.v_m - par.v_inf)
    rep.check("far_field", ff, bound)
    bad_v = _CorruptedSolid(field_)
    rep.check("control_corrupted_far_field", rc.far_field_check(bad_v, radius, 1.0), CONTROL_FACTOR * bound,
              mode="min")
    rows.append(("far_field", "solid", 0, radius, ff))
    outside = sum(field_.half_space_flag(p) for p in s1 + s2)
    rep.data["info"]["surface_samples_outside_half_space"] = int(outside)
    _atomic_write(out / "residuals.csv", _csv_text(["check", "phase", "index", "h", "residual"], rows))
    return rep


class _CorruptedSolid:
    """Solid temperature offset by a smooth bump (far-field negative control)."""

    def __init__(self, base) -> None:
        self.base = base
        self.problem = base.problem
        self.mu = base.mu

    def phase(self, p):
        return self.base.phase(p)

    def v(self, p):
        return self.base.v(p) + 1e-3 * abs(self.base.problem.params.v_m - self.base.problem.params.v_inf)


def cmd_surfaces(cfg: RunConfig, out: Path) -> Report:
    rep = Report("surfaces", cfg)
    sol = _solve_exact(cfg) if _is_exact_family(cfg.problem) else _solve_bvp(cfg)
    sc = cfg.raw["surfaces"]
    r_max = sc["r_max"] if sc["r_max"] is not None else 2.0 * sol.omega2
    rs = np.linspace(0.0, float(r_max), int(sc["n_r"]))
    rows = []
    worst = 0.0
    for k, w in ((1, sol.omega1), (2, sol.omega2)):
        s = rc.FreeSurface(k, w, sol.mu)
        for t in sc["times"]:
            for r in rs:
                p = rc.surface_point(s, float(t), float(r))
                val = s.value(p)
                worst = max(worst, abs(val))
                rows.append((k, p.t, r, p.x1, p.x2, p.x3, val))
    rep.data["solution"] = _solution_block(sol.omega1, sol.omega2, sol.mu)
    rep.check("surface_level_set", worst, TOL_SURFACE)
    _atomic_write(out / "surfaces.csv", _csv_text(["k", "t", "r", "x1", "x2", "x3", "S"], rows))
    return rep


# nonzero brackets among (P_t, P1, P2, P3, J12, D), worked out by hand from the generators
_EXPECTED_BRACKETS = {
    ("P1", "J12"): {"P2": -1.0},
    ("P2", "J12"): {"P1": 1.0},
    ("P_t", "D"): {"P_t": 2.0},
    ("P1", "D"): {"P1": 1.0},
    ("P2", "D"): {"P2": 1.0},
    ("P3", "D"): {"P3": 1.0},
}


def expected_structure_constants(names: list[str]) -> np.ndarray:
    n = len(names)
    c = np.zeros((n, n, n))
    for (a, b), coef in _EXPECTED_BRACKETS.items():
        i, j = names.index(a), names.index(b)
        for z, v in coef.items():
            c[i, j, names.index(z)] = v
            c[j, i, names.index(z)] = -v
    return c


def cmd_symmetry(cfg: RunConfig, out: Path) -> Report:
    rep = Report("symmetry", cfg)
    sc = cfg.raw["symmetry"]
    rng = np.random.default_rng(cfg.raw["seed"])
    basis = [sy.P_t, sy.P1, sy.P2, sy.P3, sy.J12, sy.D]
    names = [b.name for b in basis]
    c = sy.structure_constants(basis)
    rep.check("structure_constants_mismatch", float(np.abs(c - expected_structure_constants(names)).max()), 0.0)
    rows = []
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            rows.append((a, b) + tuple(c[i, j]))
    _atomic_write(out / "structure_constants.csv", _csv_text(["X", "Y"] + names, rows))

    jac = 0.0
    for X in basis:
        for Y in basis:
            jac = max(jac, float(np.abs((sy.commutator(X, Y) + sy.commutator(Y, X)).matrix).max()))
            for Z in basis:
                s = (sy.commutator(X, sy.commutator(Y, Z)) + sy.commutator(Y, sy.commutator(Z, X))
                     + sy.commutator(Z, sy.commutator(X, Y)))
                jac = max(jac, float(np.abs(s.matrix).max()))
    rep.check("antisymmetry_and_jacobi", jac, 0.0)

    failures = 0
    for dim in range(1, 6):
        for _ in range(sc["n_draws"]):
            a, b, f = rng.uniform(0, 5), rng.uniform(-5, 5), rng.uniform(0, math.pi)
            try:
                sy.optimal_subalgebras(dim, a, b, f)
            except ValueError:
                failures += 1
    rep.check("catalog_closure_failures", failures, 0)

    flow_err = 0.0
    for X in basis + [sy.P1 + 0.5 * sy.J12, sy.D + sy.P3]:
        p = rng.uniform(-2, 2, 4)
        a, b = rng.uniform(-1, 1, 2)
        lhs = np.array(sy.flow(X, a, sy.flow(X, b, p)))
        rhs = np.array(sy.flow(X, a + b, p))
        flow_err = max(flow_err, float(np.abs(lhs - rhs).max() / max(1.0, np.abs(rhs).max())))
    rep.check("flow_group_law", flow_err, TOL_FLOW)

    prob = cfg.problem
    sol = _solve_exact(cfg)
    rt = cov = 0.0
    for _ in range(sc["n_equivalence"]):
        e = random_equivalence(rng)
        image = sy.equivalence_transform(e, prob)
        back = sy.equivalence_transform(e.inverse(), image)
        rt = max(rt, _problem_distance(prob, back))
        guess = (abs(e.beta) * sol.omega2 * (1 + rng.uniform(-0.03, 0.03)),
                 abs(e.beta) / e.alpha * sol.mu * (1 + rng.uniform(-0.03, 0.03)))
        s2 = ex.solve_parameters(image, guess, tol=cfg.raw["tol"])
        cov = max(cov, abs(s2.omega2 / (abs(e.beta) * sol.omega2) - 1),
                  abs(s2.mu / (abs(e.beta) / e.alpha * sol.mu) - 1))
    rep.check("equivalence_round_trip", rt, TOL_ROUND_TRIP)
    rep.check("equivalence_covariance_rel", cov, TOL_COVARIANCE)

    field_ = rc.FieldEvaluator(sol)
    n = sc["n_invariance_points"]
    checker = rc.residual_checker(
        rc.interior_samples(field_, "liquid", n, rng, 0.5) + rc.interior_samples(field_, "solid", n, rng, 0.5),
        rc.surface_samples(field_, 1, n, rng),
        rc.surface_samples(field_, 2, n, rng),
    )
    cache: dict = {}

    def cached(f):
        if f is field_:
            if "base" not in cache:
                cache["base"] = checker(f)
            return cache["base"]
        return checker(f)

    eps = sc["epsilon"]
    gens = sy.invariance_generators(prob.flux.kind)
    results = []
    for X in gens:
        r = sy.verify_invariance(X, eps, field_, cached)
        results.append({"generator": r.generator, "epsilon": r.epsilon, "before": r.before, "after": r.after})
        rep.check(f"invariance_{r.generator}", r.after, 2.0 * r.before)
    if prob.flux.kind == "constant":
        r = sy.verify_invariance(sy.D, eps, field_, cached)
        results.append({"generator": "D", "epsilon": r.epsilon, "before": r.before, "after": r.after})
        rep.check("control_D_breaks_constant_flux", r.after, CONTROL_FACTOR * r.before, mode="min")
    rep.data["info"]["invariance"] = results
    rep.data["solution"] = _solution_block(sol.omega1, sol.omega2, sol.mu)
    return rep


def random_equivalence(rng: np.random.Generator) -> sy.EquivalenceParams:
    """A random group element with scalings in ``[0.3, 3]`` and random signs on ``delta``."""
    sgn = rng.choice([-1.0, 1.0], size=2)
    return sy.EquivalenceParams(
        alpha=rng.uniform(0.3, 3.0),
        beta=rng.uniform(0.3, 3.0),
        beta1=rng.uniform(0, 2 * math.pi),
        gamma0=rng.uniform(-1, 1),
        gamma1=rng.uniform(-1, 1),
        gamma2=rng.uniform(-1, 1),
        gamma3=rng.uniform(-1, 1),
        gamma4=rng.uniform(-1, 1),
        gamma5=rng.uniform(-1, 1),
        delta1=float(sgn[0] * rng.uniform(0.3, 3.0)),
        delta2=float(sgn[1] * rng.uniform(0.3, 3.0)),
    )


def _problem_distance(a: StefanProblem, b: StefanProblem) -> float:
    """Max relative difference of constants and of diffusivities at the interface temperatures."""
    pa, pb = a.params.as_dict(), b.params.as_dict()
    d = max(abs(pa[k] - pb[k]) / max(1.0, abs(pa[k])) for k in pa)
    for x, y in ((a.d1v, b.d1v), (a.d1m, b.d1m), (a.d2m, b.d2m), (a.flux.q, b.flux.q)):
        d = max(d, abs(x - y) / max(1.0, abs(x)))
    for s in (a.params.u_v, a.params.u_m):
        d = max(d, abs(a.d1(s) - b.d1(s)) / max(1.0, abs(a.d1(s))))
    for s in (a.params.v_m, a.params.v_inf):
        d = max(d, abs(a.d2(s) - b.d2(s)) / max(1.0, abs(a.d2(s))))
    return d


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "solve-exact": cmd_solve_exact,
    "solve-bvp": cmd_solve_bvp,
    "verify": cmd_verify,
    "symmetry": cmd_symmetry,
    "surfaces": cmd_surfaces,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stefan-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults to the reference set)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--tol", type=float, help="solver tolerance override")
        p.add_argument("--seed", type=int, help="seed for sample-point generation")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--solution", help="report.json of an earlier solve, checked for config drift")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        cfg = RunConfig.load(args.config, args.tol, args.seed)
        _threads()
        if args.command == "verify":
            rep = cmd_verify(cfg, out, args.solution)
        else:
            rep = COMMANDS[args.command](cfg, out)
        _atomic_write(out / "report.json", rep.to_json())
    except (ConfigError, InvalidParameters) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, DomainError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    for c in rep.data["checks"]:
        log.info("%-36s %-4s %.3e (tol %.1e)", c["name"], "ok" if c["passed"] else "FAIL", c["value"], c["tolerance"])
    if not rep.passed:
        failed = [c["name"] for c in rep.data["checks"] if not c["passed"]]
        print(f"error: checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(rep.data["solution"], sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
