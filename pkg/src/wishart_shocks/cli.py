"""Experiment runner.

    python -m wishart_shocks <command> [--config FILE] [--seed U64] [--out PATH]
                                       [--format csv|json] [key=value ...]

Configuration is a flat ``key=value`` file (``#`` starts a comment); command
line ``key=value`` pairs override it.  Lists are comma separated, complex
numbers use Python syntax (``1+2j``).  Every data file is written together
with ``<stem>.manifest.json``.

Exit status: 0 when all contracts hold, 1 on a contract violation, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from . import __version__
from .asymptotics import MicroCoordinates, bessoid
from .charpoly import ACPContext, pde_residual, q_integral_scaled
from .diffusion import EnsembleParams, estimate_acp, estimate_density, l1_distance, run_trials
from .resolvent import (bin_masses, characteristic_curves, density, lower_edge,
                        shock_positions)

COMMANDS = ("density", "edges", "mc-density", "acp-compare", "pde-check",
            "bessoid-map", "scaling-fit", "characteristics")

DEFAULTS = {
    "density": dict(a=1.0, r=1.0, taus=[0.4, 1.0, 2.0], lambda_max=0.0, n_lambda=400,
                    eps=1e-9, norm_tol=1e-6),
    "edges": dict(a=1.0, tau_min=0.1, tau_max=2.0, n_tau=96, tol=1e-6),
    "mc-density": dict(N=200, M=200, a=1.0, tau=1.0, trials=100, bins=60, l1_tol=0.05),
    "acp-compare": dict(N=2, M=3, a=1.0, tau=1.0, trials=10000,
                        z=[-1 + 0j, -0.5 + 0.5j, 0.5j, 0.3 + 0j], n_sigma=3.0),
    "pde-check": dict(N=4, M=6, a=1.0, z_center=2 + 0j, tau_center=0.7, half_width=0.1,
                      tau_half_width=0.05,
                      n_grid=3, h=0.05, tol=1e-4, max_loss=1e-4),
    "bessoid-map": dict(nu=0.0, s_arg=math.pi / 4, s_mod_max=4.0, n_mod=9,
                        ts=[-1.0, 0.0, 1.0]),
    "scaling-fit": dict(Ns=[50, 100, 200, 400], a=1.0, trials=200, target=-1.5, tol=0.15),
    "characteristics": dict(a=1.0, tau_max=2.0, n_tau=101,
                            real_starts=[-0.9, -0.5, 0.0, 0.5, 1.0, 2.0],
                            complex_starts=[-0.5 + 0.5j, 0.5j, 0.5 + 0.5j, 1 + 0.5j]),
}


class ConfigError(ValueError):
    pass


class ContractViolation(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    output_path: Path = Path("out.csv")
    format: str = "csv"


@dataclass
class RunManifest:
    config_echo: dict
    seed: int
    tool_version: str
    wall_time: float
    warnings: list = field(default_factory=list)
    contracts: dict = field(default_factory=dict)


@dataclass
class Table:
    columns: list
    rows: list
    contracts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


# configuration

def _parse_scalar(text, like):
    if isinstance(like, bool):
        if text.lower() not in ("true", "false", "1", "0"):
            raise ValueError(text)
        return text.lower() in ("true", "1")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, complex):
        return complex(text.replace(" ", ""))
    return text


def _parse_value(key, text, like):
    try:
        if isinstance(like, list):
            parts = [p.strip() for p in text.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            return [_parse_scalar(p, like[0]) for p in parts]
        return _parse_scalar(text.strip(), like)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None


def parse_pairs(lines, source="<args>"):
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve(command, file_pairs, cli_pairs):
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    params = dict(DEFAULTS[command])
    raw = {**file_pairs, **cli_pairs}
    seed = raw.pop("seed", None)
    for k, v in raw.items():
        if k not in params:
            raise ConfigError(f"unknown key {k!r} for {command}")
        params[k] = _parse_value(k, v, DEFAULTS[command][k])
    if params.get("a", 0.0) < 0:
        raise ConfigError("a must be nonnegative")
    if seed is not None:
        seed = _parse_value("seed", seed, 0)
    return params, seed


# commands

def _cmd_density(p, seed):
    hi = p["lambda_max"]
    if hi <= 0:
        hi = 1.05 * max(shock_positions(t, p["a"]).support[1] if p["r"] == 1 else
                        8 * (p["a"] ** 2 + t) for t in p["taus"])
    lam = np.linspace(0.0, hi, p["n_lambda"] + 1)[1:]
    rows, contracts = [], {}
    for tau in p["taus"]:
        curve = density(tau, p["a"], p["r"], lam, p["eps"])
        contracts[f"normalization tau={tau!r}"] = curve.normalization_defect <= p["norm_tol"]
        rows += [[tau, float(x), float(y)] for x, y in zip(curve.lambdas, curve.rho)]
    return Table(["tau", "lambda", "rho"], rows, contracts)


def _cmd_edges(p, seed):
    a = p["a"]
    taus = np.linspace(p["tau_min"], p["tau_max"], p["n_tau"])
    rows = []
    for tau in taus:
        f = shock_positions(float(tau), a, p["tol"])
        rows.append([float(tau), f.support[0], f.support[1], float(lower_edge(tau, a)),
                     int(f.critical)])
    table = Table(["tau", "lower", "upper", "lower_unclipped", "critical"], rows)
    g = [r[3] for r in rows]
    if g[0] * g[-1] < 0:
        tc = optimize.brentq(lambda t: lower_edge(t, a), p["tau_min"], p["tau_max"],
                             xtol=1e-14, maxiter=2000)
        table.contracts["lower edge reaches 0 at a^2"] = abs(tc - a * a) <= p["tol"] * max(1, a * a)
        table.rows.append([tc, 0.0, shock_positions(tc, a).support[1], 0.0, 1])
    else:
        table.warnings.append("tau range does not bracket the critical time")
    return table


def _cmd_mc_density(p, seed):
    params = EnsembleParams(p["N"], p["M"], p["a"], p["tau"], seed)
    stats = run_trials(params, p["trials"])
    top = float(stats.eigenvalue_pool.max()) * 1.02
    hist = estimate_density(stats, p["bins"], (0.0, top))
    theory = bin_masses(hist.bin_edges, p["tau"], p["a"], params.r)
    l1 = l1_distance(hist, theory)
    width = np.diff(hist.bin_edges)
    rows = [[float(hist.bin_edges[i]), float(hist.bin_edges[i + 1]), float(hist.rho[i]),
             float(theory[i] / width[i])] for i in range(len(width))]
    t = Table(["lambda_lo", "lambda_hi", "rho_mc", "rho_theory"], rows,
              {f"L1 < {p['l1_tol']!r}": l1 < p["l1_tol"]})
    t.warnings.append(f"L1 distance {l1!r}")
    if stats.clamped:
        t.warnings.append(f"{stats.clamped} eigenvalues clamped to 0")
    return t


def _cmd_acp_compare(p, seed):
    params = EnsembleParams(p["N"], p["M"], p["a"], p["tau"], seed)
    z = np.array(p["z"], dtype=complex)
    stats = estimate_acp(params, z, p["trials"])
    ctx = ACPContext(params)
    rows, ok = [], True
    for zi, qm, se in zip(z, stats.acp_mean, stats.acp_stderr):
        q = q_integral_scaled(ctx, complex(zi), p["tau"])
        qi = q.value
        ok &= abs(qm - qi) <= p["n_sigma"] * se + q.relative_error * abs(qi)
        rows.append([zi.real, zi.imag, qm.real, qm.imag, float(se), qi.real, qi.imag])
    return Table(["re_z", "im_z", "re_q_mc", "im_q_mc", "stderr", "re_q_integral",
                  "im_q_integral"], rows, {f"within {p['n_sigma']!r} stderr": bool(ok)})


def _cmd_pde_check(p, seed):
    ctx = ACPContext(EnsembleParams(p["N"], p["M"], p["a"]), max_loss=p["max_loss"])
    w, n = p["half_width"], p["n_grid"]
    zc = p["z_center"]
    zs = zc + np.linspace(-w, w, n)
    taus = p["tau_center"] + np.linspace(-p["tau_half_width"], p["tau_half_width"], n)
    res = float(np.max(pde_residual(ctx, zs, taus, h_z=p["h"], h_tau=p["h"])))
    return Table(["max_residual"], [[res]], {f"residual <= {p['tol']!r}": res <= p["tol"]})


def _cmd_bessoid_map(p, seed):
    rows = []
    mods = np.linspace(0.0, p["s_mod_max"], p["n_mod"])
    for t in p["ts"]:
        for m in mods:
            s = complex(m * np.exp(1j * p["s_arg"]))
            b = bessoid(MicroCoordinates(s, t, p["nu"]))
            rows.append([s.real, s.imag, t, abs(b), float(np.angle(b))])
    finite = all(math.isfinite(r[3]) for r in rows)
    return Table(["re_s", "im_s", "t", "abs_b", "arg_b"], rows, {"finite": finite})


def _cmd_scaling_fit(p, seed):
    a = p["a"]
    rows = []
    for N in p["Ns"]:
        stats = run_trials(EnsembleParams(N, N, a, a * a, seed), p["trials"])
        rows.append([N, float(stats.smallest.mean())])
    logs = np.log(np.array(rows, dtype=float))
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    t = Table(["N", "smallest_mean"], rows,
              {f"exponent {p['target']!r} +- {p['tol']!r}": abs(slope - p["target"]) <= p["tol"]})
    t.warnings.append(f"fitted exponent {slope!r}")
    t.rows.append(["exponent", slope])
    return t


def _cmd_characteristics(p, seed):
    a = p["a"]
    taus = np.linspace(0.0, p["tau_max"], p["n_tau"])
    rows = []
    for kind, starts in (("real", p["real_starts"]), ("complex", p["complex_starts"])):
        # launch points are given as lambda(0); the map parameter is lambda(0) - a^2
        z0 = [complex(s) - a * a for s in starts]
        z0 = [z + 1e-12 if z == 0 else z for z in z0]
        curves = characteristic_curves(taus, z0, a)
        for k, (s, c) in enumerate(zip(starts, curves)):
            rows += [[kind, k, complex(s).real, complex(s).imag, float(t), v.real, v.imag]
                     for t, v in zip(taus, c)]
    return Table(["kind", "start", "re_start", "im_start", "tau", "re_z", "im_z"], rows)


HANDLERS = {
    "density": _cmd_density, "edges": _cmd_edges, "mc-density": _cmd_mc_density,
    "acp-compare": _cmd_acp_compare, "pde-check": _cmd_pde_check,
    "bessoid-map": _cmd_bessoid_map, "scaling-fit": _cmd_scaling_fit,
    "characteristics": _cmd_characteristics,
}


# output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (np.integer, bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def render(table: Table, fmt, manifest: RunManifest = None):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    doc = {"manifest": asdict(manifest) if manifest else None, "columns": table.columns,
           "rows": [[_json_cell(v) for v in row] for row in table.rows]}
    return json.dumps(doc, indent=1, default=str) + "\n"


def _echo(params):
    return {k: (repr(v) if isinstance(v, complex) else
                [repr(x) if isinstance(x, complex) else x for x in v] if isinstance(v, list) else v)
            for k, v in params.items()}


def run(config: RunConfig):
    """Execute one command; returns (exit status, manifest)."""
    t0 = time.perf_counter()
    table = HANDLERS[config.command](config.params, config.seed)
    failed = [name for name, ok in table.contracts.items() if not ok]
    manifest = RunManifest(
        {"command": config.command, "format": config.format, **_echo(config.params)},
        config.seed, __version__, 0.0, list(table.warnings),
        {k: bool(v) for k, v in table.contracts.items()})
    # the data file must not depend on wall time: render before it is filled in
    out = Path(config.output_path)
    out.write_text(render(table, config.format, manifest))
    manifest.wall_time = time.perf_counter() - t0
    out.with_name(out.stem + ".manifest.json").write_text(
        json.dumps(asdict(manifest), indent=1, default=str) + "\n")
    for name in failed:
        print(f"contract violated: {name}", file=sys.stderr)
    return (1 if failed else 0), manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="wishart-shocks", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        file_pairs = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            file_pairs = parse_pairs(text.splitlines(), str(args.config))
        params, seed = resolve(args.command, file_pairs, parse_pairs(args.overrides))
        seed = args.seed if args.seed is not None else (seed or 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        out = args.out or Path(f"{args.command}.{args.format}")
        if not out.parent.resolve().is_dir():
            raise ConfigError(f"output directory {out.parent} does not exist")
        config = RunConfig(args.command, params, seed, out, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        status, _ = run(config)
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as exc:
        print(f"contract violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
