"""Command-line experiment runner: ``fracp-lab run|validate|list-experiments``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._backend import DEFAULT as BACKEND
from .grid import Domain, ProblemParams

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

EXPERIMENTS = {
    "torsion": "solution of the constant right-hand side problem",
    "eigen": "first eigenvalue and positive eigenfunction",
    "qproblem": "unique positive solution of the purely concave problem",
    "minimal": "minimal positive solution by monotone iteration",
    "lambda-sweep": "minimal solutions along a list of lambdas (bifurcation CSV)",
    "lambda-bracket": "bisection bracket for the extremal lambda",
    "bubbles": "truncated bubble norms and exponent fits over an eps/delta sweep",
    "path": "energy along the special mountain-pass path and the ray supremum",
    "mountain-pass": "path deformation and Newton polish for a second solution",
    "genus": "sampled min-max upper bounds for the symmetric levels",
    "verify-all": "elementary inequalities and qualitative principles",
}

DEFAULTS = {
    "n": 1, "s": 0.3, "p": 2.0, "q": 1.5, "lam": 0.01,
    "domain": [0.0, 1.0], "N": 128, "backend": "auto",
    "tol": 1e-10, "budget": 20000, "outdir": "out", "seed": 0, "threads": 1,
    "lambdas": [0.01, 0.02, 0.05, 0.1, 0.2],
    "lo": None, "hi": None, "bracket_tol": 0.05, "max_probes": 40,
    "ratios": [0.25, 0.125, 0.0625, 0.03125, 0.015625], "delta": None, "eps": None, "k": None,
    "fit_tol": 0.15, "samples": 33, "j_max": 5, "r": None,
}


class ConfigError(Exception):
    """Usage error with an optional line number in the config file."""

    def __init__(self, msg, line=None):
        super().__init__(msg)
        self.line = line


@dataclass
class ExperimentConfig:
    experiment: str
    params: ProblemParams
    domain: Domain
    N: int
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _key_lines(text: str) -> dict:
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith('"'):
            key = stripped[1:].split('"', 1)[0]
            out.setdefault(key, i)
    return out


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    lines = _key_lines(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = _parse_value(v)
        lines[k.strip()] = None
    return build_config(raw, lines)


def build_config(raw: dict, lines=None) -> ExperimentConfig:
    lines = lines or {}
    unknown = sorted(set(raw) - set(DEFAULTS) - {"experiment"})
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", lines.get(unknown[0]))
    if "experiment" not in raw:
        raise ConfigError("missing key 'experiment'")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}", lines.get("experiment"))
    values = {**DEFAULTS, **raw}
    try:
        params = ProblemParams(int(values["n"]), float(values["s"]), float(values["p"]),
                               float(values["q"]), float(values["lam"]))
    except (TypeError, ValueError) as exc:
        bad = next((k for k in ("n", "s", "p", "q", "lam") if k in raw), "n")
        raise ConfigError(f"invalid parameters: {exc}", lines.get(bad)) from None
    dom = values["domain"]
    try:
        if isinstance(dom, dict):
            domain = Domain.from_dict(dom)
        elif len(dom) == 2:
            domain = Domain.interval(*map(float, dom))
        elif len(dom) == 4:
            domain = Domain.rectangle(*map(float, dom))
        else:
            raise ValueError("domain must list 2 or 4 bounds")
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid domain: {exc}", lines.get("domain")) from None
    if domain.dim != params.n:
        raise ConfigError("domain dimension differs from n", lines.get("domain"))
    N = values["N"]
    if not isinstance(N, int) or N < 4:
        raise ConfigError("N must be an integer >= 4", lines.get("N"))
    if values["threads"] != 1:
        raise ConfigError("only threads=1 is supported (serial, fixed-order sums)", lines.get("threads"))
    if values["backend"] not in ("auto", "compiled", "python"):
        raise ConfigError("backend must be auto, compiled or python", lines.get("backend"))
    return ExperimentConfig(exp, params, domain, N, values, lines)


# --- validation ----------------------------------------------------------------

def validate(cfg: ExperimentConfig) -> list:
    """Parameter-regime violations for the configured experiment."""
    from .verify import k_window_threshold

    pr, exp, out = cfg.params, cfg.experiment, []
    needs_lam = {"qproblem", "minimal", "path", "mountain-pass", "genus"}
    if exp in needs_lam and not pr.lam > 0:
        out.append("lambda must be positive")
    if exp in {"minimal", "lambda-sweep", "lambda-bracket", "path", "mountain-pass", "genus",
               "qproblem"} and not pr.q < pr.p:
        out.append("q must be below p")
    if exp in {"path", "mountain-pass"}:
        if pr.p < 2:
            out.append("mountain-pass requires p >= 2")
        if not pr.p - 1 < pr.q < pr.p:
            out.append("mountain-pass requires p-1 < q < p")
        if not k_window_threshold(pr):
            thr = pr.sp * (pr.q + 1) / (pr.q + 1 - pr.p) if pr.q + 1 > pr.p else float("inf")
            out.append(f"dimension threshold fails: n={pr.n} <= sp(q+1)/(q+1-p)={thr:.6g}")
        if not cfg.domain.origin_interior and not all(lo < 0 < hi for lo, hi in cfg.domain.bounds):
            out.append("the origin must be interior to the domain")
    if exp == "lambda-sweep" and (not cfg["lambdas"] or min(cfg["lambdas"]) <= 0):
        out.append("lambdas must be a nonempty list of positive values")
    if exp == "bubbles" and max(cfg["ratios"]) > 0.5:
        out.append("bubble ratios must satisfy eps <= delta/2")
    if exp == "genus" and cfg["j_max"] < 1:
        out.append("j_max must be at least 1")
    return out


# --- experiments ------------------------------------------------------------------

def _problem(cfg: ExperimentConfig):
    from .energy import Problem
    return Problem.build(cfg.params, cfg.domain, cfg.N, cfg["backend"])


def _table(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    path.write_text(buf.getvalue())


def _json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def exp_torsion(cfg, out):
    from .solvers import torsion
    prob = _problem(cfg)
    rep = torsion(prob)
    rep.write(out, "torsion")
    return {"converged": rep.converged, "positive": rep.solution.min() > 0}


def exp_eigen(cfg, out):
    from .solvers import first_eigenpair
    lam1, phi, rep = first_eigenpair(_problem(cfg), tol=cfg["tol"])
    rep.write(out, "eigen")
    return {"converged": rep.converged, "positive": phi.min() > 0,
            "max_is_one": abs(phi.max() - 1.0) < 1e-12, "lambda1_positive": lam1 > 0}


def exp_qproblem(cfg, out):
    from .solvers import solve_Q
    rep = solve_Q(_problem(cfg), cfg.params.lam, tol=cfg["tol"])
    rep.write(out, "qproblem")
    return {"converged": rep.converged, "energy_negative": rep.energy < 0,
            "positive": rep.solution.min() > 0}


def exp_minimal(cfg, out):
    from .solvers import minimal_solution
    rep = minimal_solution(_problem(cfg), cfg.params.lam, budget=cfg["budget"])
    rep.write(out, "minimal")
    return {"converged": rep.converged}


def exp_lambda_sweep(cfg, out):
    from .solvers import bifurcation_csv, lambda_sweep
    lams = sorted(float(x) for x in cfg["lambdas"])
    rows = lambda_sweep(_problem(cfg), lams, budget=cfg["budget"])
    (out / "bifurcation.csv").write_text(bifurcation_csv(rows))
    sem = [r["seminorm"] for r in rows if r["status"] in ("converged", "converged-iterates")]
    return {"seminorm_monotone": bool(np.all(np.diff(sem) > 0)), "any_converged": bool(sem)}


def exp_lambda_bracket(cfg, out):
    from .solvers import estimate_Lambda
    br = estimate_Lambda(_problem(cfg), cfg["lo"], cfg["hi"], tol=cfg["bracket_tol"],
                         max_probes=cfg["max_probes"], budget=cfg["budget"])
    _json(out / "lambda_bracket.json", br.to_dict())
    _table(out / "probes.csv", ["lambda", "class", "status", "iterations", "max_value"],
           [[h["lambda"], h["class"], h["status"], h["iterations"], h["max_value"]]
            for h in br.history])
    return {"width": br.rel_width <= cfg["bracket_tol"], "monotone": br.monotone(),
            "verified": br.verified}


def exp_bubbles(cfg, out):
    from .bubbles import BubbleParams, bubble_estimates, trunc_G, trunc_M
    pr = cfg.params
    delta = cfg["delta"] or 1.0
    est = bubble_estimates(pr, delta, tuple(cfg["ratios"]))
    (out / "bubbles.csv").write_text(est.to_csv())
    fits = {k: getattr(est, k).to_dict() if getattr(est, k) else None
            for k in ("seminorm_fit", "crit_fit", "q_fit")}
    _json(out / "bubbles.json", {"theta": est.theta, "fits": fits, "heuristic": est.heuristic,
                                 "regime_note": est.regime_note,
                                 "q_lower_ratio": list(est.q_lower_ratio),
                                 "scaling_defect": est.scaling_defect})
    knots, Ms = True, []
    for ratio in cfg["ratios"]:
        b = BubbleParams(ratio * delta, delta, est.theta, pr.n, pr.s, pr.p)
        hi, lo = b.U_eps(b.delta), b.U_eps(b.theta * b.delta)
        knots &= bool(trunc_G(lo, b) == 0.0 and abs(trunc_G(hi, b) - hi) <= 4e-16 * hi)
        Ms.append(trunc_M(b))
    tol = cfg["fit_tol"]
    sem_ok = est.seminorm_fit is not None and est.seminorm_fit.rel_dev <= tol
    return {"knots_exact": knots, "M_in_(1,2]": all(1 < m <= 2 for m in Ms),
            "seminorm_rate": sem_ok, "q_rate": est.q_fit.rel_dev <= tol}


def _path_setup(cfg):
    from .bubbles import find_theta
    from .energy import sobolev_constant
    from .solvers import minimal_solution
    from .verify import admissible_delta, k_window
    pr = cfg.params
    prob = _problem(cfg)
    theta = find_theta(pr.n, pr.s, pr.p)
    delta = cfg["delta"] or admissible_delta(prob, theta)
    win = k_window(pr)
    if cfg["k"] is not None:
        k = float(cfg["k"])
    elif win is None:
        raise ConfigError("k window is empty for these parameters")
    else:
        k = 0.5 * (win[0] + win[1])
    eps = cfg["eps"] or delta ** (k + 1)
    S = sobolev_constant(pr)
    u = minimal_solution(prob, pr.lam, budget=cfg["budget"])
    return prob, theta, delta, eps, k, S, u


def exp_path(cfg, out):
    from .solvers import path_profile
    prob, theta, delta, eps, k, S, u = _path_setup(cfg)
    pp = path_profile(prob, u.solution, cfg.params.lam, eps, delta, S,
                      samples=cfg["samples"], theta=theta)
    _table(out / "path.csv", ["t", "energy"], [[float(t), float(e)] for t, e in zip(pp.t, pp.energies)])
    _json(out / "path.json", {**pp.to_dict(), "k": k})
    return {"minimal_converged": u.converged, "ray_sup_positive": pp.ray_sup > 0,
            "ray_sup_below_critical": pp.below_critical,
            "endpoint_below_start": bool(pp.energies[-1] < pp.energies[0])}


def exp_mountain_pass(cfg, out):
    from .solvers import mountain_pass_solve, path_profile
    prob, theta, delta, eps, k, S, u = _path_setup(cfg)
    pp = path_profile(prob, u.solution, cfg.params.lam, eps, delta, S,
                      samples=cfg["samples"], theta=theta)
    rep = mountain_pass_solve(prob, pp, u.solution, cfg.params.lam)
    rep.write(out, "mountain_pass")
    return {"converged": rep.converged, "nonnegative": rep.solution.min() >= -1e-8,
            "level_positive": rep.energy > 0, "level_below_critical": rep.energy < pp.critical_level}


def exp_genus(cfg, out):
    from .energy import sobolev_constant
    from .solvers import genus_levels
    pr = cfg.params
    S = sobolev_constant(pr)
    r = cfg["r"] or 0.25 * S.value ** (pr.n / (pr.sp * pr.p))
    bounds = genus_levels(_problem(cfg), range(1, cfg["j_max"] + 1), r, S_est=S)
    _table(out / "genus.csv", ["j", "value", "eps", "samples"],
           [[b.j, b.value, b.eps, b.samples] for b in bounds])
    vals = np.array([b.value for b in bounds])
    return {"negative": bool(np.all(vals < 0)), "nondecreasing": bool(np.all(np.diff(vals) >= 0))}


def exp_verify_all(cfg, out):
    from . import verify as V
    from .energy import Problem
    from .solvers import minimal_solution, solve_dirichlet, torsion
    pr = cfg.params
    verdicts = {}
    lam = pr.lam if pr.lam > 0 else 0.01
    prob = Problem.build(pr, cfg.domain, cfg.N, cfg["backend"])
    # M is the sup of the minimal solution at the larger parameter
    M = minimal_solution(prob, 2 * lam, budget=cfg["budget"]).solution.max()
    b = V.beta0(lam, 2 * lam, M, pr.q, pr.p_star)
    verdicts["beta0"] = V.Verdict(b > 1, [], values={"beta0": b, "M": M}).to_dict()
    for p_, g_ in ((2.0, 1.0), (2.0, 2.0), (3.0, 1.0), (3.0, 2.0)):
        C, v = V.elementary_C(p_, g_, seed=cfg["seed"])
        verdicts[f"elementary_C_p{p_:g}_g{g_:g}"] = v.to_dict()
    mism = []
    for n_ in (1, 2):
        for s_ in np.linspace(0.05, 0.45, 5):
            for q_ in np.linspace(1.05, 1.95, 10):
                P = ProblemParams(n_, float(s_), 2.0, float(q_), 0.0)
                if (V.k_window(P) is not None) != V.k_window_threshold(P):
                    mism.append([n_, float(s_), float(q_)])
    verdicts["k_window_lattice"] = V.Verdict(not mism, mism, values={"points": 100}).to_dict()
    e = torsion(prob).solution
    e2 = solve_dirichlet(prob, 2.0 ** (pr.p - 1)).solution
    verdicts["comparison"] = V.check_comparison(prob, e2, e).to_dict()
    fit, (rmin, rmax) = V.boundary_decay_fit(e, pr.s)
    verdicts["boundary_decay"] = V.Verdict(fit.rel_dev <= 0.15 and rmin > 0, [], fit,
                                           {"ratio_min": rmin, "ratio_max": rmax}).to_dict()
    if all(lo < 0 < hi for lo, hi in cfg.domain.bounds):
        verdicts["cutoff_convergence"] = V.cutoff_convergence(prob, e).to_dict()
    _json(out / "verify.json", verdicts)
    return {k: v["pass"] for k, v in verdicts.items()}


RUNNERS = {
    "torsion": exp_torsion, "eigen": exp_eigen, "qproblem": exp_qproblem,
    "minimal": exp_minimal, "lambda-sweep": exp_lambda_sweep,
    "lambda-bracket": exp_lambda_bracket, "bubbles": exp_bubbles, "path": exp_path,
    "mountain-pass": exp_mountain_pass, "genus": exp_genus, "verify-all": exp_verify_all,
}


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment, "config": cfg.values, "config_hash": cfg.hash,
        "versions": {"fracp_lab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__, "backend": BACKEND},
    }


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg["outdir"])
    out.mkdir(parents=True, exist_ok=True)
    man = manifest(cfg)
    man["status"] = "started"
    _json(out / "manifest.json", man)
    t = time.perf_counter()
    checks = RUNNERS[cfg.experiment](cfg, out)
    checks = {k: bool(v) for k, v in checks.items()}
    man.update(status="finished", wall_time_s=time.perf_counter() - t, checks=checks,
               passed=all(checks.values()))
    _json(out / "manifest.json", man)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {cfg.experiment}: {name}")
    return EXIT_OK if man["passed"] else EXIT_FAIL


def _usage_error(path, exc: ConfigError) -> int:
    loc = f"{path}:{exc.line}: " if exc.line else f"{path}: "
    print(f"error: {loc}{exc}", file=sys.stderr)
    return EXIT_USAGE


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fracp-lab", description="fractional p-Laplacian experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    v = sub.add_parser("validate", help="check a config for regime violations")
    v.add_argument("config")
    v.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sub.add_parser("list-experiments", help="list experiment names")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.cmd == "list-experiments":
        for name, desc in EXPERIMENTS.items():
            print(f"{name:15s} {desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        return _usage_error(args.config, exc)
    problems = validate(cfg)
    if args.cmd == "validate":
        for msg in problems:
            print(f"violation: {msg}")
        if not problems:
            print("ok")
        return EXIT_OK if not problems else EXIT_FAIL
    if problems:
        for msg in problems:
            print(f"error: {args.config}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except ConfigError as exc:
        return _usage_error(args.config, exc)


if __name__ == "__main__":
    sys.exit(main())
