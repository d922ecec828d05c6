"""Command-line entry point: ``htsim <subcommand>``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .architectures import TAGS, make_architecture
from .errors import ConfigError, HtsimError, NumericalError, PreconditionError
from .harness import (Trajectory, fmt, load_config, run_scenario, sweep, sweep_csv,
                      write_meta)
from .plant import ParameterSet

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _meta(cfg, **extra):
    d = {"config": cfg.to_dict(),
         "effective_gains": cfg.architecture.effective_gains().to_dict()}
    d.update(extra)
    return d


def cmd_simulate(args):
    cfg = load_config(args.config)
    res = run_scenario(cfg)
    res.trajectory.to_csv(args.out)
    m = res.metrics.as_dict()
    m["contact_osc_n"] = res.contact_oscillation
    write_meta(args.out, _meta(cfg, metrics=m, diverged=res.diverged))
    print(json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                      for k, v in {**m, "diverged": res.diverged}.items()}))
    if res.diverged:
        print("simulation diverged", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _parse_values(axis, text):
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise ConfigError("--values is empty")
    if axis == "architecture":
        return items
    try:
        return [float(v) for v in items]
    except ValueError:
        raise ConfigError(f"--values must be numbers for axis {axis}") from None


def cmd_sweep(args):
    cfg = load_config(args.config)
    values = _parse_values(args.axis, args.values)
    rows = sweep(cfg, args.axis, values)
    sweep_csv(rows, args.out)
    write_meta(args.out, _meta(cfg, axis=args.axis, values=values))
    if any(r.result is not None and r.result.diverged for r in rows):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_hybrid(args):
    from .frequency import frequency_grid, hybrid_response, scattering_norms

    gains = json.loads(args.gains) if args.gains else {}
    arch = make_architecture(args.arch, gains)
    p = ParameterSet.from_dict(json.loads(args.params)) if args.params else ParameterSet()
    omega = frequency_grid(args.w_min, args.w_max, args.points)
    resp = hybrid_response(arch, p, args.delay_ms / 1000.0, omega)
    norms = scattering_norms(resp)
    lines = ["omega,h11_re,h11_im,h12_re,h12_im,h21_re,h21_im,h22_re,h22_im,scattering_norm"]
    for i, w in enumerate(omega):
        H = resp.H[i]
        vals = [w] + [f(H[a, b]) for a in (0, 1) for b in (0, 1)
                      for f in (np.real, np.imag)] + [norms[i]]
        lines.append(",".join(fmt(v) for v in vals))
    Path(args.out).write_text("\n".join(lines) + "\n")
    write_meta(args.out, {"architecture": arch.to_dict(), "params": p.to_dict(),
                          "delay_ms": args.delay_ms,
                          "passive_on_grid": bool(np.all(norms[np.isfinite(norms)] <= 1 + 1e-9))})
    return EXIT_OK


def cmd_stability(args):
    from .stability import assemble, is_stable, mori_cheres, routh_h21, routh_margin

    cfg = load_config(args.config)
    cl = assemble(cfg.params, cfg.architecture, contact=not args.free_space)
    v = is_stable(cl)
    mc, mc_ok = mori_cheres(cl)
    g = cfg.architecture.effective_gains()
    out = {
        "architecture": cfg.architecture.tag,
        "contact": not args.free_space,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in v.eigenvalues],
        "stable": v.stable,
        "margin": v.margin,
        "structural_zero_mode": v.structural_zero,
        "routh_hurwitz_h21": {"k_pf": g.k_pf, "holds": routh_h21(cfg.params, g.k_pf),
                              "margin": routh_margin(cfg.params, g.k_pf)},
        "mori_cheres": {"value": mc, "delay_independent": mc_ok},
        "gains": g.to_dict(),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_robustness(args):
    from .stability import TABLE_VI_PARAMS, robustness_table

    cfg = load_config(args.config)
    names = tuple(args.params.split(",")) if args.params else TABLE_VI_PARAMS
    try:
        rows = robustness_table(cfg.params, cfg.architecture, names)
    except PreconditionError as e:
        raise NumericalError(str(e)) from None
    lines = ["parameter,nominal,min,max,percent_variation,min_unbounded,max_unbounded"]
    for r in rows:
        lines.append(",".join([r.parameter, fmt(r.nominal), fmt(r.min), fmt(r.max),
                               fmt(r.percent_variation), fmt(r.min_unbounded),
                               fmt(r.max_unbounded)]))
    Path(args.out).write_text("\n".join(lines) + "\n")
    write_meta(args.out, _meta(cfg, method="one-parameter eigenvalue boundary bisection"))
    return EXIT_OK


def cmd_fit(args):
    from .sysid import FitData, FitProblem, fit

    traj = Trajectory.from_csv(args.data)
    free = [s.strip() for s in args.free.split(",") if s.strip()]
    init = ParameterSet.from_dict(json.loads(args.init)) if args.init else ParameterSet()
    data = FitData.from_trajectory(traj, args.model)
    rep = fit(FitProblem(data, tuple(free), init, args.reg))
    out = rep.to_dict()
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        write_meta(args.out, {"data": str(args.data), "free": free, "init": init.to_dict(),
                              "reg": args.reg, "model": args.model})
    print(text)
    return EXIT_OK


def build_parser():
    ap = _Parser(prog="htsim", description="Bilateral teleoperation simulation and analysis")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario, write the trajectory CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run a scenario over delays, stiffnesses or architectures")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=("delay", "stiffness", "architecture"))
    s.add_argument("--values", required=True,
                   help="comma list: ms for delay, N/mm for stiffness, tags for architecture")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("hybrid", help="hybrid matrix and scattering norm over frequency")
    s.add_argument("--arch", required=True, choices=TAGS)
    s.add_argument("--delay-ms", type=float, default=0.0)
    s.add_argument("--gains", help="JSON object of gain overrides")
    s.add_argument("--params", help="JSON object of parameter overrides")
    s.add_argument("--w-min", type=float, default=1e-2)
    s.add_argument("--w-max", type=float, default=1e2)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hybrid)

    s = sub.add_parser("stability", help="eigenvalues and stability tests as JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--free-space", action="store_true", help="linearise without contact")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("robustness", help="per-parameter stability bounds as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--params", help="comma list of parameter names")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_robustness)

    s = sub.add_parser("fit", help="grey-box fit of model parameters to a trajectory CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--free", required=True)
    s.add_argument("--init", help="JSON object of initial parameter values")
    s.add_argument("--reg", type=float, default=None)
    s.add_argument("--model", choices=("follower", "operator"), default="follower")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as e:
        print(f"config error: invalid JSON: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except HtsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
