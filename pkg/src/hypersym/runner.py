"""Experiment orchestration: configs, calibration, artifacts, reports.

Every command is a pure function of (config, seed): outputs are
byte-identical across runs on the same build.  Summaries carry per-criterion
pass/fail plus every fitted constant; the report command only aggregates,
never recomputes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from hypersym import engine, matkernel, planner, rootsplit, solver, symmetrizer
from hypersym.coeffs import SystemCoefficients, coeffs_from_json
from hypersym.errors import ConfigError
from hypersym.presets import get_preset
from hypersym.symmetrizer import ParameterSet
from hypersym.weights import bracket

SCHEMA_VERSION = "1"

_COMMON_PROPS = {
    "command": {"type": "string"},
    "schema_version": {"type": "string"},
    "seed": {"type": "integer"},
    "out": {"type": "string"},
    "preset": {"type": "string"},
    "coeffs": {"type": "object"},
}


def _schema(extra: dict, required: list[str]) -> dict:
    props = dict(_COMMON_PROPS)
    props.update(extra)
    return {
        "type": "object",
        "properties": props,
        "required": ["command", "schema_version"] + required,
        "additionalProperties": False,
    }


_NUM = {"type": "number"}
_NUMLIST = {"type": "array", "items": {"type": "number"}}

COMMAND_SCHEMAS = {
    "certify": _schema({"tol": _NUM, "n_t": {"type": "integer"},
                        "n_x": {"type": "integer"}, "xi_values": _NUMLIST,
                        "s_values": _NUMLIST, "y_values": _NUMLIST}, []),
    "theta": _schema({"eps_lo": _NUM, "eps_hi": _NUM, "n_eps": {"type": "integer"},
                      "n_t": {"type": "integer"}, "n_x": {"type": "integer"}}, []),
    "nuij": _schema({"m_max": {"type": "integer"}, "n_polys": {"type": "integer"},
                     "spread": _NUM, "s_values": _NUMLIST}, ["seed"]),
    "symmetrize": _schema({"xi_lo": _NUM, "xi_hi": _NUM, "n_xi": {"type": "integer"},
                           "n_t": {"type": "integer"}, "n_x": {"type": "integer"},
                           "check_a_power": {"type": "boolean"}}, []),
    "conjtest": _schema({"tau": _NUM, "rho": _NUM, "ell": _NUM,
                         "n_lattice": {"type": "integer"},
                         "k_list": {"type": "array", "items": {"type": "integer"}},
                         "order_one": {"type": "boolean"}}, []),
    "plan": _schema({"theta": {"type": "integer"}, "mode": {"type": "string"},
                     "kappa": {"type": "string"}}, ["theta"]),
    "solve": _schema({"n_lattice": {"type": "integer"}, "h": _NUM, "eps_par": _NUM,
                      "dt": _NUM, "stride": {"type": "integer"}, "s": _NUM,
                      "c0": _NUM, "horizon": _NUM, "ell": _NUM}, ["seed"]),
    "study-h": _schema({"n_lattice": {"type": "integer"}, "h_list": _NUMLIST,
                        "s": _NUM, "c0": _NUM, "dt": _NUM}, ["seed"]),
    "study-parabolic": _schema({"n_lattice": {"type": "integer"},
                                "eps_list": _NUMLIST, "s": _NUM, "c0": _NUM,
                                "dt": _NUM, "h": _NUM}, ["seed"]),
    "report": _schema({"run_dir": {"type": "string"}}, ["run_dir"]),
}


def validate_config(config: dict) -> dict:
    """Schema-validate a config; unknown fields and commands are rejected."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    command = config.get("command")
    if command not in COMMAND_SCHEMAS:
        raise ConfigError(
            f"unknown command {command!r}; have {sorted(COMMAND_SCHEMAS)}"
        )
    if config.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION!r}"
        )
    if jsonschema is not None:
        try:
            jsonschema.validate(config, COMMAND_SCHEMAS[command])
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config rejected: {exc.message}") from exc
    return config


def _resolve_coeffs(config: dict) -> tuple[SystemCoefficients, int | None, str]:
    if "preset" in config:
        p = get_preset(config["preset"])
        return p.coeffs, p.theta, p.name
    if "coeffs" in config:
        return coeffs_from_json(config["coeffs"]), None, "inline"
    raise ConfigError("config needs a preset or inline coeffs")


# ---------------------------------------------------------------------------
# Calibration


@dataclass
class Calibration:
    c: float
    a0: float
    eps0: float
    theta: int
    max_ratio: float


def calibrate(coeffs: SystemCoefficients, theta: int | None = None) -> Calibration:
    """Empirical constants for the parameter constraints.

    ``c`` is 1.05x the certified spectral-bound ratio, floored at 0.5 so the
    damping-window constraints stay nondegenerate for x-independent families
    (whose certified ratio is exactly zero).  ``a0`` is scanned from the
    imaginary spread of H_N relative to c <xi>^rho; ``eps0`` is halved from
    0.5 until the theta fit at that scale is clean.
    """
    ts = np.linspace(0.0, 1.0, 4)
    xs = np.linspace(0.0, 2.0 * math.pi, 5, endpoint=False)
    cert = matkernel.spectral_bound_certify(
        coeffs, ts, xs, (1.0, -1.0), np.geomspace(1e-3, 1e-1, 5)
    )
    c = max(1.05 * cert.max_ratio, 0.5)
    if theta is None:
        theta = matkernel.estimate_theta(
            coeffs, np.geomspace(1e-3, 1e-1, 7), t_values=ts, x_values=xs
        ).theta_hat
    eps0 = 0.5
    for _ in range(3):
        te = matkernel.estimate_theta(
            coeffs,
            np.geomspace(eps0 * 1e-2, eps0, 7),
            t_values=ts,
            x_values=xs,
        )
        if te.theta_hat == theta and te.residual <= 0.25:
            break
        eps0 /= 2.0
    # imaginary spread of H_N relative to the damping scale, over a probe set
    probe = ParameterSet(rho=0.5, a=2.0, ell=4.0, tau=min(0.5, eps0), T=2.0,
                         c1=0.1, theta=theta, a0=0.0, eps0=eps0, c_spec=c)
    worst = 0.0
    for t in ts:
        for x in xs:
            for xi in (4.0, 16.0, 64.0):
                h = symmetrizer.hn_matrix(coeffs, probe, float(t), float(x), xi)
                mu = bracket(xi, 4.0) ** 0.5
                worst = max(worst, float(np.max(np.abs(np.linalg.eigvals(h).imag))) / (c * mu))
    a0 = worst * 1.05
    return Calibration(c=c, a0=a0, eps0=eps0, theta=theta, max_ratio=cert.max_ratio)


def run_params(
    coeffs: SystemCoefficients,
    theta: int,
    mode: str = "lipschitz",
    kappa=None,
    ell_max: float | None = None,
    cal: Calibration | None = None,
) -> ParameterSet:
    """Admissible parameters for an evolution run, calibrated per problem.

    Without an ``ell_max`` cap the planner template is used directly.  A cap
    (needed when the cutoff range h <= 1/ell must reach coarse h) shrinks a
    to the weight window ``a <= ell^(1-rho)``, which is only admissible when
    the calibrated damping floor a0 is small enough.
    """
    cal = cal or calibrate(coeffs, theta)
    rho_frac, _ = planner.rho_required(theta, mode, kappa)
    if ell_max is None:
        # Keep the damping at scale a >= 2 even when the empirical floor
        # is lower, so the weight window stays nontrivial.
        a0_eff = max(cal.a0, 1.0)
        pr = planner.plan(theta, mode, kappa, c=Fraction(cal.c).limit_denominator(10**6),
                          a0=Fraction(a0_eff).limit_denominator(10**6),
                          eps0=Fraction(cal.eps0).limit_denominator(10**6))
        return pr.params
    rho = float(rho_frac)
    ell = float(ell_max)
    a = 0.999 * ell ** (1.0 - rho)
    if a < cal.a0 + 1.0:
        raise ConfigError(
            f"cannot satisfy a >= a0+1 = {cal.a0 + 1:.3g} with ell <= {ell}"
        )
    big_t = a / (2.0 * cal.c)
    tau = min(0.999 * big_t / cal.c, 0.999 * cal.eps0 * ell ** (1.0 - rho))
    c1 = cal.c * tau / 2.0
    params = ParameterSet(rho=rho_frac, a=a, ell=ell, tau=tau, T=big_t, c1=c1,
                          theta=theta, kappa=kappa,
                          delta=planner.feasible_region(theta, kappa).vertex_delta
                          if mode == "holder" else None,
                          a0=cal.a0, eps0=cal.eps0, c_spec=cal.c)
    violations = planner.validate_params(params, cal.c, cal.a0, cal.eps0)
    if violations:
        raise ConfigError("calibrated params invalid: " + "; ".join(violations))
    return params


def _solve_setup(config: dict):
    coeffs, theta_decl, name = _resolve_coeffs(config)
    mode = "holder" if coeffs.t_regularity == "holder" else "lipschitz"
    kappa = Fraction(coeffs.kappa).limit_denominator(100) if coeffs.kappa else None
    cal = calibrate(coeffs, theta_decl)
    ell_max = config.get("ell")
    params = run_params(coeffs, cal.theta, mode, kappa, ell_max=ell_max, cal=cal)
    s0 = float(planner.s0_holder(cal.theta, kappa) if mode == "holder"
               else planner.s0_lipschitz(cal.theta))
    s = config.get("s", 0.5 * (1.0 + s0))
    if not s < s0:
        raise ConfigError(f"data index s = {s} must be below s0 = {s0}")
    n_x = config.get("n_lattice", 256)
    big_t = float(params.T)
    c0_min = 1.2 * big_t * float(bracket(n_x / 2, float(params.ell))) ** float(params.rho) \
        / float(bracket(n_x / 2, 1.0)) ** (1.0 / s)
    c0 = config.get("c0", max(1.5, c0_min))
    g = solver.gevrey_data(n_x, coeffs.m, s, c0, seed=config.get("seed", 0))
    horizon = config.get("horizon",
                         (big_t - float(params.c1)) / float(params.a))
    problem = solver.CauchyProblem(coeffs, g, horizon=horizon, gevrey_s=s,
                                   gevrey_c0=c0)
    if not problem.check_certificate():
        raise ConfigError("synthesized data violates its own Gevrey certificate")
    return coeffs, name, params, problem, cal


# ---------------------------------------------------------------------------
# Commands


def _cmd_certify(config: dict) -> dict:
    coeffs, theta, name = _resolve_coeffs(config)
    ts = np.linspace(0.0, 1.0, config.get("n_t", 4))
    xs = np.linspace(0.0, 2 * math.pi, config.get("n_x", 6), endpoint=False)
    xis = config.get("xi_values", [1.0, -1.0, 2.0])
    rep = matkernel.certify_real_spectrum(coeffs, ts, xs, xis,
                                          tol=config.get("tol", 1e-9))
    sb = matkernel.spectral_bound_certify(
        coeffs, ts, xs, config.get("y_values", [1.0, 0.5, -1.0]),
        config.get("s_values", list(np.geomspace(1e-4, 1e-1, 7))),
    )
    return {
        "preset": name,
        "real_spectrum": {
            "passed": rep.passed,
            "max_imag": rep.max_imag,
            "tol_effective": rep.tol_effective,
            "worst_sample": list(rep.worst_sample),
            "n_samples": rep.n_samples,
        },
        "spectral_bound": {
            "passed": sb.passed,
            "max_ratio": sb.max_ratio,
            "table": [[s, v] for s, v in sb.table],
            "n_samples": sb.n_samples,
        },
        "passed": bool(rep.passed and sb.passed),
    }


def _cmd_theta(config: dict) -> dict:
    coeffs, theta_decl, name = _resolve_coeffs(config)
    eps = np.geomspace(config.get("eps_lo", 1e-3), config.get("eps_hi", 1e-1),
                       config.get("n_eps", 9))
    ts = np.linspace(0.0, 1.0, config.get("n_t", 4))
    xs = np.linspace(0.0, 2 * math.pi, config.get("n_x", 5), endpoint=False)
    te = matkernel.estimate_theta(coeffs, eps, t_values=ts, x_values=xs)
    matches = theta_decl is None or te.theta_hat == theta_decl
    return {
        "preset": name,
        "theta_hat": te.theta_hat,
        "theta_declared": theta_decl,
        "theta_raw": te.theta_raw,
        "residual": te.residual,
        "upper_fit": list(te.upper_fit),
        "lower_fit": list(te.lower_fit),
        "warning": te.warning,
        "converged": te.converged,
        "n_taylor": te.n_used,
        "passed": bool(matches and not te.warning),
    }


def _cmd_nuij(config: dict) -> dict:
    m_max = config.get("m_max", 6)
    n_polys = config.get("n_polys", 200)
    spread = config.get("spread", 3.0)
    s_values = config.get("s_values", list(np.geomspace(1e-3, 1.0, 7)))
    seed = config["seed"]
    table = []
    worst_margin = math.inf
    for m in range(1, m_max + 1):
        c_m = rootsplit.nuij_constant(m)
        worst = math.inf
        for i in range(n_polys):
            poly = rootsplit.random_real_rooted(m, spread, seed + 1000 * m + i)
            for s in s_values:
                if m == 1:
                    continue  # single root: no gap to measure
                res = rootsplit.nuij_split(poly, float(s))
                worst = min(worst, res.min_gap / (c_m * s))
        margin = worst if m > 1 else math.inf
        worst_margin = min(worst_margin, margin)
        table.append({"m": m, "c_m": c_m,
                      "min_gap_over_cs": None if m == 1 else worst})
    passed = worst_margin >= 1.0 - 1e-9
    return {"table": table, "worst_margin": worst_margin, "passed": bool(passed),
            "n_polys": n_polys, "s_values": list(map(float, s_values))}


def _cmd_symmetrize(config: dict) -> dict:
    coeffs, theta_decl, name = _resolve_coeffs(config)
    cal = calibrate(coeffs, theta_decl)
    params = run_params(coeffs, cal.theta, cal=cal)
    xis = np.geomspace(config.get("xi_lo", 2.0**4), config.get("xi_hi", 2.0**12),
                       config.get("n_xi", 9))
    ts = np.linspace(0.0, 1.0, config.get("n_t", 4))
    xs = np.linspace(0.0, 2 * math.pi, config.get("n_x", 5), endpoint=False)
    field = symmetrizer.build_field(coeffs, params, ts, xs, xis)
    inv = field.check_invariants()
    rhs = field.rhs_scales()
    lyap_ok = inv["max_lyapunov_residual_rel"] <= 1e-8
    sub = (slice(None), slice(0, 2), slice(None))
    quad = symmetrizer.quadrature_R(field.M[sub], np.broadcast_to(
        rhs[None, None, :], field.M.shape[:-2])[sub], tol=1e-8)
    agree = float(np.max(
        np.linalg.norm(quad - field.R[sub], axis=(-2, -1))
        / np.linalg.norm(field.R[sub], axis=(-2, -1))
    ))
    lb = symmetrizer.lower_bound_check(field)
    probe = symmetrizer.symbol_estimate_probe(
        coeffs, params, xis, check_a_power=config.get("check_a_power", False)
    )
    return {
        "preset": name,
        "params": params.to_json(),
        "invariants": inv,
        "lyapunov_ok": bool(lyap_ok),
        "quadrature_agreement": agree,
        "quadrature_ok": bool(agree <= 1e-6),
        "lower_bound": {"exponent": lb.exponent, "target": lb.target,
                        "c_prime": lb.c_prime, "passed": lb.passed},
        "symbol_rows": [
            {"alpha": r.alpha, "beta": r.beta, "dt": r.dt, "target": r.target,
             "fitted": r.fitted, "residual": r.residual,
             "a_power_fitted": r.a_power_fitted, "passed": r.passed,
             "inconclusive": r.inconclusive}
            for r in probe.rows
        ],
        "passed": bool(lyap_ok and agree <= 1e-6 and lb.passed and probe.passed),
    }


def _cmd_conjtest(config: dict) -> dict:
    rho = config.get("rho", 0.75)
    ell = config.get("ell", 1.0)
    tau = config.get("tau", 1.5)
    n_x = config.get("n_lattice", 256)
    k_list = config.get("k_list", [0, 1, 2])
    m_eye = np.eye(1)
    if config.get("order_one", True):
        a = engine.TrigMatrixSymbol(
            m=1, terms=((1, m_eye, lambda xi: bracket(xi, ell).astype(complex)),)
        )
    else:
        a = engine.TrigMatrixSymbol(m=1, terms=((1, m_eye, None),))
    rep = engine.conjugation_remainder_probe(a, tau, rho, ell, k_list, n_x,
                                             two_sided=config.get("order_one", True))
    orders = [r.fitted for r in rep.rows]
    monotone = all(
        orders[i + 1] <= orders[i] + 0.1
        for i in range(len(orders) - 1)
        if orders[i] is not None and orders[i + 1] is not None
    )
    return {
        "rho": rho, "ell": ell, "tau_used": rep.tau_used,
        "tau_shrunk": rep.tau_shrunk,
        # the engine quantizes by the Kohn-Nirenberg rule; the probe compares
        # operators, so the quantization choice only shifts lower-order terms
        "quantization": "kohn-nirenberg",
        "rows": [{"k": r.k, "target": r.target, "fitted": r.fitted,
                  "passed": r.passed} for r in rep.rows],
        "monotone": bool(monotone),
        "passed": bool(rep.passed and monotone),
    }


def _cmd_plan(config: dict) -> dict:
    theta = config["theta"]
    mode = config.get("mode", "lipschitz")
    kappa = Fraction(config["kappa"]) if "kappa" in config else None
    result = planner.plan(theta, mode, kappa)
    doc = result.to_json()
    doc["passed"] = True
    return doc


def _cmd_solve(config: dict, out_dir: str | None) -> dict:
    coeffs, name, params, problem, cal = _solve_setup(config)
    res = solver.solve_cauchy(
        problem, params,
        h=config.get("h", 1.0 / float(params.ell)),
        eps_par=config.get("eps_par", 0.0),
        dt=config.get("dt"),
        stride=config.get("stride", 8),
    )
    tr = res.trace
    eta = res.dt**2 + 1e-8
    stride_eta = eta * config.get("stride", 8)
    increments = tr.increments[1:]
    if tr.er_mode == "skipped" or not len(increments):
        # x-dependent coefficients: the monotone-energy gate only applies
        # where Op(R) is an exact multiplier
        monotone = None
    else:
        monotone = bool(np.all(increments <= stride_eta))
    a = float(params.a)
    c_t = tr.gevrey_c
    have_radius = np.all(np.isfinite(c_t))
    radius_ok = bool(
        have_radius
        and np.all(c_t >= c_t[0] - a * tr.times * 1.1 - 1e-9)
        and np.all(c_t > 0)
    )
    rep = solver.energy_residual(res)
    if out_dir:
        tr.to_csv(os.path.join(out_dir, "energy_trace.csv"))
        traj = np.stack([st.coeffs for st in res.states])
        np.ascontiguousarray(traj).tofile(os.path.join(out_dir, "trajectory.bin"))
        with open(os.path.join(out_dir, "trajectory_meta.json"), "w") as fh:
            json.dump({"shape": list(traj.shape), "dtype": "complex128",
                       "order": "C", "times": [float(t) for t in res.times]},
                      fh, sort_keys=True, indent=2)
    return {
        "preset": name,
        "params": params.to_json(),
        "n_lattice": problem.g.n_x,
        "h": res.h, "eps_par": res.eps_par, "dt": res.dt,
        "horizon": problem.horizon,
        "er_mode": tr.er_mode,
        "eta_per_step": eta,
        "max_increment": float(np.max(increments)) if monotone is not None else None,
        "energy_monotone": monotone,
        "gevrey_c0_fit": float(c_t[0]) if have_radius else None,
        "gevrey_c_final": float(c_t[-1]) if have_radius else None,
        "radius_ok": radius_ok,
        "empirical_c_first": rep.c_first,
        "empirical_c_second": rep.c_second,
        "passed": bool((monotone is not False) and (radius_ok or not have_radius)),
    }


def _cmd_study_h(config: dict) -> dict:
    h_list = config.get("h_list", [1 / 64, 1 / 128, 1 / 256])
    config = dict(config)
    config.setdefault("ell", 1.0 / max(h_list))
    coeffs, name, params, problem, cal = _solve_setup(config)
    st = solver.h_uniformity_study(problem, params, h_list, dt=config.get("dt"))
    return {
        "preset": name,
        "params": params.to_json(),
        "h_values": st.h_values,
        "constants_first": st.constants_first,
        "constants_second": st.constants_second,
        "spread_first": st.spread_first,
        "spread_second": st.spread_second,
        "curve_spread": st.curve_spread,
        "passed": st.passed,
    }


def _cmd_study_parabolic(config: dict) -> dict:
    coeffs, name, params, problem, cal = _solve_setup(config)
    eps_list = config.get("eps_list", [1e-2, 1e-3, 1e-4])
    st = solver.parabolic_study(problem, params, eps_list, dt=config.get("dt"),
                                h=config.get("h"))
    return {
        "preset": name,
        "eps_values": st.eps_values,
        "self_differences": st.self_differences,
        "rate": st.rate,
        "sup_norms": st.sup_norms,
        "energy_spread": st.energy_spread,
        "passed": bool(st.passed_rate and st.passed_uniform),
    }


def _cmd_report(config: dict) -> dict:
    run_dir = config["run_dir"]
    summary_path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(summary_path):
        raise ConfigError(f"no summary.json under {run_dir!r}")
    with open(summary_path) as fh:
        summary = json.load(fh)
    lines = [f"run report: {run_dir}", "=" * 40]
    for key in sorted(summary):
        if key in ("config",):
            continue
        lines.append(f"{key}: {summary[key]}")
    trace_path = os.path.join(run_dir, "energy_trace.csv")
    if os.path.exists(trace_path):
        with open(trace_path) as fh:
            rows = fh.read().strip().splitlines()
        lines.append("")
        lines.append(f"energy trace: {len(rows) - 1} samples")
        lines += rows[:2] + (["..."] if len(rows) > 3 else []) + rows[-1:]
    text = "\n".join(lines) + "\n"
    out_path = os.path.join(run_dir, "report.txt")
    with open(out_path, "w") as fh:
        fh.write(text)
    return {"report": out_path, "passed": bool(summary.get("passed", True))}


_DISPATCH = {
    "certify": lambda cfg, out: _cmd_certify(cfg),
    "theta": lambda cfg, out: _cmd_theta(cfg),
    "nuij": lambda cfg, out: _cmd_nuij(cfg),
    "symmetrize": lambda cfg, out: _cmd_symmetrize(cfg),
    "conjtest": lambda cfg, out: _cmd_conjtest(cfg),
    "plan": lambda cfg, out: _cmd_plan(cfg),
    "solve": _cmd_solve,
    "study-h": lambda cfg, out: _cmd_study_h(cfg),
    "study-parabolic": lambda cfg, out: _cmd_study_parabolic(cfg),
    "report": lambda cfg, out: _cmd_report(cfg),
}


def run(config: dict, out_dir: str | None = None) -> tuple[int, dict]:
    """Execute one command; returns (exit_status, summary).

    Exit status: 0 ok, 1 criterion failed.  Configuration and numeric
    failures raise and are mapped to codes 2/3 by the CLI.
    """
    config = validate_config(config)
    command = config["command"]
    if out_dir is None:
        out_dir = config.get("out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    summary = _DISPATCH[command](config, out_dir)
    summary = {"command": command, "config": config, **summary}
    if out_dir:
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
    status = 0 if summary.get("passed", True) else 1
    return status, summary
