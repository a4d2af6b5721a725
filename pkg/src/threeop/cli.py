"""Config-driven runner: ``threeop run <config>`` and ``threeop validate <config>``.

A config is a JSON document::

    {
      "problem": {"kind": "three_objective", "params": {...}},
      "solver": {"variant": "basic", "gamma": 1.0, "lambda": 1.0, "max_iter": 1000, "tol": 1e-10},
      "output": {"trace_path": "trace.csv", "summary_path": "summary.json"},
      "seed": 0
    }

Exit status: 0 converged, 1 config error, 2 iteration cap reached, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import admm as admm_mod
from . import applications as apps
from .corpus import quadratic_monotropic, quadratic_triple
from .diagnostics import build_slow_example
from .errors import InvalidInputError, NumericalError, StepsizeError
from .numkit import make_rng
from .operators import (ForwardOperator, compose_gradient, grad_feasibility, identity_prox, make_quadratic_prox,
                        project_box, project_halfspace, project_hyperplane, project_simplex, prox_l1, prox_nuclear,
                        quadratic_forward, zero_forward)
from .splitting import RelaxationSchedule, ThreeOperatorProblem, solve_basic
from .variants import AccelConfig, solve_accelerated, solve_linesearch

__all__ = ["ConfigError", "validate", "run", "main", "TRACE_HEADER"]

TRACE_HEADER = "k,fpr_sq,objective,dist_ref,gamma_k,lambda_k,elapsed_s"
KINDS = ("split_feasibility", "three_objective", "multi_reg", "matrix_completion", "qp", "admm3", "admm_m",
         "slow_example")
VARIANTS = ("basic", "accelerated", "linesearch", "primal_dual")
OPERATOR_KINDS = ("split_feasibility", "three_objective", "matrix_completion", "qp", "slow_example")

EXIT_OK, EXIT_CONFIG, EXIT_MAX_ITER, EXIT_DIVERGED = 0, 1, 2, 3


class ConfigError(InvalidInputError):
    """Invalid configuration; ``field`` names the offending dotted key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _require(d, key, path):
    if not isinstance(d, dict) or key not in d or d[key] is None:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    return int(value) if integer else float(value)


def _array(value, path, ndim):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric array") from None
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if ndim == 1 and arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != ndim or arr.size == 0:
        raise ConfigError(path, f"expected a nonempty {ndim}-d array")
    if not np.all(np.isfinite(arr)) and ndim == 2:
        raise ConfigError(path, "entries must be finite")
    return arr


def _prox(spec, path, dim):
    kind = _require(spec, "type", path)
    try:
        if kind == "zero":
            return identity_prox()
        if kind == "l1":
            return prox_l1(_number(_require(spec, "weight", path), f"{path}.weight", positive=True))
        if kind == "box":
            lo = _array(spec.get("lower", -math.inf), f"{path}.lower", 1)
            hi = _array(spec.get("upper", math.inf), f"{path}.upper", 1)
            return project_box(lo, hi)
        if kind == "simplex":
            return project_simplex()
        if kind == "halfspace":
            return project_halfspace(_array(_require(spec, "normal", path), f"{path}.normal", 1),
                                     _number(spec.get("offset", 0.0), f"{path}.offset"))
        if kind == "hyperplane":
            return project_hyperplane(_array(_require(spec, "normal", path), f"{path}.normal", 1),
                                      _number(spec.get("offset", 0.0), f"{path}.offset"))
        if kind == "quadratic":
            p = _array(_require(spec, "P", path), f"{path}.P", 2)
            c = _array(spec.get("c", [0.0] * p.shape[0]), f"{path}.c", 1)
            eig = np.linalg.eigvalsh(0.5 * (p + p.T))
            if eig[0] < -1e-12:
                raise ConfigError(f"{path}.P", "must be positive semidefinite")
            return make_quadratic_prox(p, c, max(eig[0], 0.0), eig[-1])
        if kind == "nuclear":
            return prox_nuclear(_number(_require(spec, "weight", path), f"{path}.weight", positive=True),
                                _number(_require(spec, "rows", path), f"{path}.rows", True, True),
                                _number(_require(spec, "cols", path), f"{path}.cols", True, True))
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.type", f"unknown operator type {kind!r}")


def _forward(spec, path):
    kind = _require(spec, "type", path)
    if kind == "zero":
        return zero_forward()
    if kind == "quadratic":
        p = _array(_require(spec, "P", path), f"{path}.P", 2)
        c = _array(spec.get("c", [0.0] * p.shape[0]), f"{path}.c", 1)
        eig = np.linalg.eigvalsh(0.5 * (p + p.T))
        if eig[0] < -1e-12:
            raise ConfigError(f"{path}.P", "must be positive semidefinite")
        if not np.any(p):
            return zero_forward()
        return quadratic_forward(p, c, max(eig[0], 0.0))
    if kind == "least_squares":
        a = _array(_require(spec, "A", path), f"{path}.A", 2)
        b = _array(_require(spec, "b", path), f"{path}.b", 1)
        if b.size != a.shape[0]:
            raise ConfigError(f"{path}.b", f"expected {a.shape[0]} entries")
        p = a.T @ a
        return quadratic_forward(p, -a.T @ b, max(np.linalg.eigvalsh(p)[0], 0.0))
    raise ConfigError(f"{path}.type", f"unknown forward operator type {kind!r}")


@dataclass
class Built:
    """A constructed instance ready to run."""

    kind: str
    problem: Any = None
    z0: Optional[np.ndarray] = None
    reference: Optional[np.ndarray] = None
    beta: float = math.inf
    extra: dict = field(default_factory=dict)


def _z0(params, path, dim):
    if "z0" in params:
        z = _array(params["z0"], f"{path}.z0", 1)
        if z.size != dim:
            raise ConfigError(f"{path}.z0", f"expected {dim} entries, got {z.size}")
        return z
    return np.zeros(dim)


def _build(config, seed) -> Built:
    prob = _require(config, "problem", "")
    kind = _require(prob, "kind", "problem")
    if kind not in KINDS:
        raise ConfigError("problem.kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    params = _require(prob, "params", "problem")
    path = "problem.params"
    if not isinstance(params, dict):
        raise ConfigError(path, "expected a mapping")
    rng = make_rng(seed)
    if kind == "three_objective":
        if "random" in params:
            dim = _number(_require(params["random"], "dim", f"{path}.random"), f"{path}.random.dim", True, True)
            qt = quadratic_triple(rng, dim)
            return Built(kind, qt.problem, _z0(params, path, dim), qt.x_star, qt.problem.c.beta)
        dim = _number(_require(params, "dim", path), f"{path}.dim", True, True)
        f = _prox(_require(params, "f", path), f"{path}.f", dim)
        g = _prox(_require(params, "g", path), f"{path}.g", dim)
        h = _forward(_require(params, "h", path), f"{path}.h")
        if "L" in params:
            h = compose_gradient(_array(params["L"], f"{path}.L", 2), h)
        problem = ThreeOperatorProblem(f, g, h)
        return Built(kind, problem, _z0(params, path, dim), None, h.beta)
    if kind == "split_feasibility":
        lmat = _array(_require(params, "L", path), f"{path}.L", 2)
        dim = lmat.shape[1]
        c1 = _prox(_require(params, "c1", path), f"{path}.c1", dim)
        c2 = _prox(_require(params, "c2", path), f"{path}.c2", dim)
        c3 = _prox(_require(params, "c3", path), f"{path}.c3", lmat.shape[0])
        c = grad_feasibility(lmat, c3)
        return Built(kind, ThreeOperatorProblem(c1, c2, c), _z0(params, path, dim), None, c.beta,
                     {"L": lmat, "c3": c3})
    if kind == "qp":
        q = _array(_require(params, "Q", path), f"{path}.Q", 2)
        c = _array(_require(params, "c", path), f"{path}.c", 1)
        dim = c.size
        c1 = _prox(_require(params, "c1", path), f"{path}.c1", dim)
        c2 = _prox(_require(params, "c2", path), f"{path}.c2", dim)
        spec = apps.QpSpec(q, c, c1, c2, bool(params.get("precondition", False)))
        try:
            qe = spec.effective_q()
            fwd = quadratic_forward(qe, c)
        except InvalidInputError as exc:
            raise ConfigError(f"{path}.Q", str(exc)) from None
        return Built(kind, ThreeOperatorProblem(c2, c1, fwd), _z0(params, path, dim), None, fwd.beta)
    if kind == "matrix_completion":
        if "random" in params:
            r = params["random"]
            rows = _number(r.get("rows", 20), f"{path}.random.rows", True, True)
            cols = _number(r.get("cols", 15), f"{path}.random.cols", True, True)
            rank = _number(r.get("rank", 2), f"{path}.random.rank", True, True)
            frac = _number(r.get("fraction", 0.6), f"{path}.random.fraction", True)
            truth = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
            mask = rng.random((rows, cols)) < frac
            obs = apps.observations_from_mask(truth, mask)
        else:
            rows = _number(_require(params, "rows", path), f"{path}.rows", True, True)
            cols = _number(_require(params, "cols", path), f"{path}.cols", True, True)
            obs = [tuple(o) for o in _require(params, "observations", path)]
        if not obs:
            raise ConfigError(f"{path}.observations", "at least one observed entry is required")
        mu = _number(params.get("mu", 0.0), f"{path}.mu")
        if mu < 0:
            raise ConfigError(f"{path}.mu", "must be >= 0")
        lo = params.get("lower", -math.inf)
        hi = params.get("upper", math.inf)
        mask = np.zeros((rows, cols))
        x0 = np.zeros((rows, cols))
        for o in obs:
            i, j, v = int(o[0]), int(o[1]), float(o[2])
            if not (0 <= i < rows and 0 <= j < cols):
                raise ConfigError(f"{path}.observations", f"entry ({i}, {j}) outside the matrix")
            mask[i, j], x0[i, j] = 1.0, v
        fm, fx = mask.reshape(-1), x0.reshape(-1)
        fwd = ForwardOperator(lambda x: fm * (x - fx), 1.0, 0.0, 1.0, "masked fit",
                              lambda x: 0.5 * float(np.sum((fm * (x - fx)) ** 2)))
        box = project_box(np.full(rows * cols, float(lo)), np.full(rows * cols, float(hi)))
        nuc = prox_nuclear(mu, rows, cols) if mu > 0 else identity_prox()
        z0 = np.clip(fx, float(lo), float(hi))
        return Built(kind, ThreeOperatorProblem(box, nuc, fwd), z0, None, 1.0, {"rows": rows, "cols": cols})
    if kind == "slow_example":
        a = _number(params.get("a", 0.0), f"{path}.a")
        n_blocks = _number(params.get("n_blocks", 200), f"{path}.n_blocks", True, True)
        try:
            ex = build_slow_example(a, "slow", n_blocks)
        except InvalidInputError as exc:
            raise ConfigError(path, str(exc)) from None
        return Built(kind, ex.problem, ex.z0, np.zeros(ex.z0.size), 1.0)
    if kind == "multi_reg":
        regs_spec = _require(params, "regs", path)
        if not isinstance(regs_spec, list) or not regs_spec:
            raise ConfigError(f"{path}.regs", "expected a nonempty list")
        dim = _number(_require(params, "dim", path), f"{path}.dim", True, True)
        regs = [_prox(s, f"{path}.regs[{i}]", dim) for i, s in enumerate(regs_spec)]
        h = _forward(_require(params, "h", path), f"{path}.h")
        lmat = _array(params["L"], f"{path}.L", 2) if "L" in params else None
        comp = compose_gradient(lmat, h)
        return Built(kind, None, _z0(params, path, dim), None, len(regs) * comp.beta,
                     {"regs": regs, "h": h, "L": lmat})
    # admm3 / admm_m
    if "random" in params:
        r = params["random"]
        m = 3 if kind == "admm3" else _number(r.get("blocks", 4), f"{path}.random.blocks", True, True)
        rows = _number(r.get("rows", 4), f"{path}.random.rows", True, True)
        dim = _number(r.get("dim", 3), f"{path}.random.dim", True, True)
        qm = quadratic_monotropic(rng, rows, (dim,) * m)
        blocks = [admm_mod.quadratic_block(p, c, l) for p, c, l in zip(qm.ps, qm.cs, qm.ls)]
        b = qm.b
    else:
        bspec = _require(params, "blocks", path)
        if not isinstance(bspec, list):
            raise ConfigError(f"{path}.blocks", "expected a list")
        b = _array(_require(params, "b", path), f"{path}.b", 1)
        blocks = []
        for i, s in enumerate(bspec):
            bp = f"{path}.blocks[{i}]"
            p = _array(_require(s, "P", bp), f"{bp}.P", 2)
            lmat = _array(_require(s, "L", bp), f"{bp}.L", 2)
            c = _array(s.get("c", [0.0] * p.shape[0]), f"{bp}.c", 1)
            try:
                blocks.append(admm_mod.quadratic_block(p, c, lmat))
            except InvalidInputError as exc:
                raise ConfigError(bp, str(exc)) from None
    if kind == "admm3" and len(blocks) != 3:
        raise ConfigError(f"{path}.blocks", f"admm3 needs exactly 3 blocks, got {len(blocks)}")
    if len(blocks) < 3:
        raise ConfigError(f"{path}.blocks", "at least 3 blocks are required")
    return Built(kind, None, None, None, math.inf, {"blocks": blocks, "b": b})


def _solver_settings(config, overrides):
    solver = _require(config, "solver", "")
    variant = _require(solver, "variant", "solver")
    if variant not in VARIANTS:
        raise ConfigError("solver.variant", f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    gamma = _number(_require(solver, "gamma", "solver"), "solver.gamma", positive=True)
    lam = _number(solver.get("lambda", 1.0), "solver.lambda")
    eps = solver.get("epsilon")
    eps = None if eps is None else _number(eps, "solver.epsilon")
    eta = _number(solver.get("eta", 0.5), "solver.eta")
    max_iter = _number(overrides.get("max_iter", solver.get("max_iter", 100_000)), "solver.max_iter", True, True)
    tol = _number(overrides.get("tol", solver.get("tol", 1e-10)), "solver.tol")
    if tol < 0:
        raise ConfigError("solver.tol", "must be >= 0")
    averaging = solver.get("averaging", "none")
    if averaging not in ("none", "uniform", "weighted"):
        raise ConfigError("solver.averaging", f"unknown averaging {averaging!r}")
    return {"variant": variant, "gamma": gamma, "lambda": lam, "epsilon": eps, "eta": eta, "max_iter": max_iter,
            "tol": tol, "averaging": averaging, "branch": solver.get("branch", "cocoercive"),
            "pd_form": solver.get("pd_form", "equivalent_form"), "sigma": solver.get("sigma")}


def _schedule(built, s):
    if s["epsilon"] is None:
        return RelaxationSchedule.default(built.beta, s["gamma"], s["lambda"])
    return RelaxationSchedule(s["gamma"], s["epsilon"], s["lambda"])


def _check_solver(built: Built, s) -> list:
    """Stepsize and branch findings for a built instance."""
    findings = []
    variant = s["variant"]
    if built.kind not in OPERATOR_KINDS and variant != "basic":
        findings.append(f"solver.variant: kind {built.kind!r} only supports the basic variant")
        return findings
    if s["averaging"] != "none" and variant != "basic":
        findings.append("solver.averaging: averaging is only available for the basic variant")
    if built.kind == "slow_example" and s["gamma"] != 1.0:
        findings.append("solver.gamma: the slow example is defined for gamma = 1")
    if built.kind in ("admm3", "admm_m"):
        prob = admm_mod.AdmmProblem(built.extra["blocks"], built.extra["b"], s["gamma"])
        try:
            prob.validate()
        except InvalidInputError as exc:
            findings.append(f"solver.gamma: {exc}")
        return findings
    if variant in ("basic",) or built.kind == "multi_reg":
        sched = _schedule(built, s)
        try:
            sched.validate(built.beta)
        except StepsizeError as exc:
            field_name = "solver.lambda" if "lambda" in str(exc) else (
                "solver.epsilon" if str(exc).startswith("epsilon") else "solver.gamma")
            findings.append(f"{field_name}: {exc}")
        return findings
    problem = built.problem
    if variant == "accelerated":
        if s["branch"] == "lipschitz" and not problem.b.mu > 0:
            findings.append("solver.branch: the lipschitz branch assumes μ_B > 0 (strongly monotone B); "
                            f"got μ_B = {problem.b.mu!r}")
            return findings
        try:
            AccelConfig(s["gamma"], s["eta"], s["branch"]).check(problem)
        except InvalidInputError as exc:
            findings.append(f"solver.gamma: {exc}")
    elif variant == "linesearch":
        if problem.c.value is None:
            findings.append("problem.params.h: line search needs the value of h")
    elif variant == "primal_dual":
        form = s["pd_form"]
        if form not in ("fbs_pd", "equivalent_form"):
            findings.append(f"solver.pd_form: unknown form {form!r}")
        elif form == "fbs_pd":
            sigma = s["sigma"]
            if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not sigma > 0:
                findings.append("solver.sigma: fbs_pd needs sigma > 0")
    return findings


def validate(config, overrides=None) -> list:
    """All findings for ``config`` (an empty list means it is runnable)."""
    overrides = overrides or {}
    findings = []
    if not isinstance(config, dict):
        return ["config: expected a JSON object"]
    seed = overrides.get("seed", config.get("seed", 0))
    try:
        seed = _number(seed, "seed", integer=True)
        if seed < 0:
            raise ConfigError("seed", "must be >= 0")
    except ConfigError as exc:
        findings.append(str(exc))
        seed = 0
    built = settings = None
    try:
        built = _build(config, seed)
    except ConfigError as exc:
        findings.append(str(exc))
    try:
        settings = _solver_settings(config, overrides)
    except ConfigError as exc:
        findings.append(str(exc))
    out = config.get("output", {})
    if not isinstance(out, dict):
        findings.append("output: expected a mapping")
    if built is not None and settings is not None:
        findings.extend(_check_solver(built, settings))
    return findings


def _fmt(value):
    if value is None:
        return ""
    return repr(float(value))


def write_trace(path, records, timing=False):
    """CSV with the fixed header; floats use shortest round-trip formatting."""
    lines = [TRACE_HEADER]
    for r in records:
        lines.append(",".join([str(int(r.k)), _fmt(r.fpr_sq), _fmt(r.objective), _fmt(r.dist_ref),
                               _fmt(r.gamma_k), _fmt(r.lambda_k), _fmt(r.elapsed) if timing else ""]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _execute(built: Built, s):
    """Run the configured solver; returns (solution, trace)."""
    gamma, max_iter, tol = s["gamma"], s["max_iter"], s["tol"]
    if built.kind == "multi_reg":
        regs = built.extra["regs"]
        return apps.solve_multi_reg(regs, built.extra["L"], built.extra["h"], gamma, s["lambda"],
                                    [built.z0] * len(regs), max_iter, tol, s["epsilon"])
    if built.kind in ("admm3", "admm_m"):
        blocks, b = built.extra["blocks"], built.extra["b"]
        prob = admm_mod.AdmmProblem(blocks, b, gamma)
        w0 = np.zeros(b.size)
        x_last = blocks[-1].linear_argmin(-w0)
        solver = admm_mod.solve_admm3 if built.kind == "admm3" else admm_mod.solve_admm_m
        w, xs, trace = solver(prob, w0, x_last, max_iter, tol)
        return np.concatenate([w] + list(xs)), trace
    problem, variant = built.problem, s["variant"]
    if variant == "basic":
        avg = None if s["averaging"] == "none" else s["averaging"]
        state, trace = solve_basic(problem, _schedule(built, s), built.z0, max_iter, tol,
                                   reference=built.reference, averaging=avg)
        return state.x_b, trace
    if variant == "accelerated":
        state, trace = solve_accelerated(problem, AccelConfig(gamma, s["eta"], s["branch"]), built.z0, max_iter,
                                         tol, reference=built.reference)
        return state.x_b, trace
    if variant == "linesearch":
        state, trace = solve_linesearch(problem, gamma, built.z0, max_iter, tol, reference=built.reference)
        return state.x_b, trace
    form = s["pd_form"]
    sigma = None if form == "equivalent_form" else float(s["sigma"])
    x, _, trace = apps.solve_primal_dual(problem, gamma, sigma, built.z0, None, form, max_iter, tol)
    return x, trace


def run(config, overrides=None, out_dir=None, stream=None) -> int:
    """Validate, run and export one config; returns the exit status."""
    stream = stream or sys.stderr
    overrides = overrides or {}
    findings = validate(config, overrides)
    if findings:
        for f in findings:
            print(f"config error: {f}", file=stream)
        return EXIT_CONFIG
    seed = int(overrides.get("seed", config.get("seed", 0)))
    built = _build(config, seed)
    s = _solver_settings(config, overrides)
    out = config.get("output", {}) or {}
    trace_path = out.get("trace_path", "trace.csv")
    summary_path = out.get("summary_path", "summary.json")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        trace_path = os.path.join(out_dir, os.path.basename(trace_path))
        summary_path = os.path.join(out_dir, os.path.basename(summary_path))
    start = time.perf_counter()
    status, message, solution, trace = "converged", None, None, None
    try:
        solution, trace = _execute(built, s)
        status = trace.meta.get("status", "max_iter")
    except NumericalError as exc:
        status, message = "diverged", str(exc)
    wall = time.perf_counter() - start
    records = [] if trace is None else trace.records
    for path in (trace_path, summary_path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
    write_trace(trace_path, records, bool(out.get("timing", False)))
    last = records[-1] if records else None
    effective = json.loads(json.dumps(config))
    effective["seed"] = seed
    effective.setdefault("solver", {}).update({"max_iter": s["max_iter"], "tol": s["tol"]})
    summary = {
        "config": effective,
        "result": {
            "status": status,
            "iterations": len(records),
            "final_fpr_sq": None if last is None else last.fpr_sq,
            "objective": None if last is None else last.objective,
            "dist_ref": None if last is None else last.dist_ref,
            "wall_time_s": wall,
            "solution": None if solution is None else [float(v) for v in solution],
            "message": message,
        },
    }
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, allow_nan=True)
        fh.write("\n")
    if status == "converged":
        return EXIT_OK
    if status == "diverged":
        print(f"solver diverged: {message}", file=stream)
        return EXIT_DIVERGED
    return EXIT_MAX_ITER


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh), None
    except OSError as exc:
        return None, f"config: cannot read {path}: {exc.strerror}"
    except json.JSONDecodeError as exc:
        return None, f"config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="threeop", description="Three-operator splitting runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a config and write trace and summary")
    p_run.add_argument("config")
    p_run.add_argument("--out", metavar="DIR", help="directory for the trace and summary files")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--max-iter", type=int, dest="max_iter")
    p_run.add_argument("--tol", type=float)
    p_run.add_argument("--timing", action="store_true", help="fill elapsed_s (makes traces non-reproducible)")
    p_val = sub.add_parser("validate", help="report config problems without running")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    config, err = _load(args.config)
    if err is not None:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        findings = validate(config)
        for f in findings:
            print(f)
        if not findings:
            print("ok")
        return EXIT_CONFIG if findings else EXIT_OK
    overrides = {k: getattr(args, k) for k in ("seed", "max_iter", "tol") if getattr(args, k) is not None}
    if args.timing:
        config.setdefault("output", {})["timing"] = True
    return run(config, overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
