"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 configuration error,
3 solver failure rate above 50 %.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback

from . import config as _config
from . import crlb as _crlb
from .errors import ConfigError
from .hierarchy import assign_levels, dynamic_anchor_set
from .localize import AnchorBelief, LocalizeProblem, Method, locate
from .model import STREAM_MEASURE, STREAM_SOLVER, substream, synthesize_measurements
from .report import emit_report, write_outputs
from .sim import localize_instant, run_manet, run_mobile_sweep, run_static_sweep

log = logging.getLogger("toaloc")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_FAILURES = 0, 1, 2, 3
FAILURE_LIMIT = 0.5

D = _config.DEFAULTS


def _common(p, source_flag="--config", default_source=None):
    p.add_argument(source_flag, dest="source", default=default_source,
                   help="JSON config/scenario file or bundled name (static9, manet50)"
                        f" (default: {default_source})")
    p.add_argument("--sigma", type=float, help=f"range noise std in m (default: {D['sigma']})")
    p.add_argument("--delta", type=float, help=f"base position noise std in m (default: {D['delta']})")
    p.add_argument("--seed", type=int, help=f"root random seed (default: {D['seed']})")


def _solver_flags(p):
    p.add_argument("--eta", type=float, help=f"motion penalty factor (default: {D['eta']})")
    p.add_argument("--pso-particles", type=int, help=f"(default: {D['pso.particles']})")
    p.add_argument("--pso-iterations", type=int, help=f"(default: {D['pso.iterations']})")
    p.add_argument("--pso-inertia", type=float, help=f"(default: {D['pso.inertia']})")
    p.add_argument("--pso-cognitive", type=float, help=f"(default: {D['pso.cognitive']})")
    p.add_argument("--pso-social", type=float, help=f"(default: {D['pso.social']})")
    p.add_argument("--ichan-max-iter", type=int, help=f"(default: {D['ichan.max_iter']})")
    p.add_argument("--ichan-eps", type=float, help=f"(default: {D['ichan.eps']})")


def _run_flags(p):
    p.add_argument("--out", help="output file; side tables and figures go next to it "
                                 "(default: report to stdout, no figures)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="(default: csv)")
    p.add_argument("--trials", type=int, help=f"trials or runs (default: {D['trials']})")
    p.add_argument("--workers", type=int, help=f"worker processes (default: {D['workers']})")
    p.add_argument("--methods", help="comma separated methods "
                                     f"(default: {','.join(D['methods'])})")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def build_parser():
    ap = argparse.ArgumentParser(prog="toaloc", description="Multi-hop TOA localization toolkit",
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("levels", help="print the localization level of every node")
    _common(p, "--scenario", "static9")

    p = sub.add_parser("crlb", help="print the CRLB of every node as JSON rows")
    _common(p, "--scenario", "static9")

    p = sub.add_parser("locate", help="localize one node from one synthetic measurement draw")
    _common(p, "--scenario", "static9")
    _solver_flags(p)
    p.add_argument("--target", required=True, help="node id to localize")
    p.add_argument("--method", default="two-step",
                   choices=[m.value for m in Method if m is not Method.LEVEL1_MLE],
                   help="estimator (default: two-step)")

    p = sub.add_parser("sweep", help="static sigma sweep, or mobile trajectories when the "
                                     "config has a mobility block")
    _common(p, "--config", "static9")
    _solver_flags(p)
    _run_flags(p)
    p.add_argument("--sigma-sweep", help="comma separated sigmas in m (default: [sigma])")
    p.add_argument("--eta-sweep", help="comma separated penalty factors (default: [eta])")

    p = sub.add_parser("simulate", help="MANET time-series run")
    _common(p, "--config", None)
    _solver_flags(p)
    _run_flags(p)
    p.add_argument("--v-mean", type=float, help="mean speed in m/s (overrides mobility.v_mean)")
    p.add_argument("--duration", type=float,
                   help=f"simulated seconds (default: {D['mobility.duration']})")
    return ap


def _floats(text, name):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(name, f"expected comma separated numbers, got {text!r}") from None


def overrides_from_args(args):
    o = {"sigma": args.sigma, "delta": args.delta, "seed": args.seed}
    for name in ("eta", "trials", "workers"):
        if hasattr(args, name):
            o[name] = getattr(args, name)
    for flag, key in (("pso_particles", "pso.particles"), ("pso_iterations", "pso.iterations"),
                      ("pso_inertia", "pso.inertia"), ("pso_cognitive", "pso.cognitive"),
                      ("pso_social", "pso.social"), ("ichan_max_iter", "ichan.max_iter"),
                      ("ichan_eps", "ichan.eps"), ("v_mean", "mobility.v_mean"),
                      ("duration", "mobility.duration")):
        if getattr(args, flag, None) is not None:
            o[key] = getattr(args, flag)
    if getattr(args, "methods", None):
        o["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if getattr(args, "sigma_sweep", None):
        o["sigma_sweep"] = _floats(args.sigma_sweep, "sigma_sweep")
    elif args.sigma is not None:
        o["sigma_sweep"] = [args.sigma]
    if getattr(args, "eta_sweep", None):
        o["eta_sweep"] = _floats(args.eta_sweep, "eta_sweep")
    return o


def _default_manet_source():
    return {"scenario": "manet50",
            "mobility": {"v_mean": 20.0, "v_n_max": 5.0, "dt": 0.2, "duration": 20.0},
            "trials": 1}


def load_config(args, require_mobility=False):
    over = overrides_from_args(args)
    if args.command == "simulate" and args.source is None:
        data = _default_manet_source()
        if args.trials is None:
            over.pop("trials", None)
        return _config.parse_and_validate(data, over, require_mobility)
    return _config.load(args.source, over, require_mobility)


# subcommands ---------------------------------------------------------------------

def cmd_levels(args, out):
    cfg = load_config(args)
    out.write(json.dumps(assign_levels(cfg.scenario).to_dict(), indent=1) + "\n")
    return EXIT_OK


def cmd_crlb(args, out):
    cfg = load_config(args)
    sc = cfg.scenario
    lm = assign_levels(sc)
    rows = []
    for node in sorted(sc.ids):
        row = {"id": node, "level": lm.levels.get(node)}
        if node in lm.unlocalizable:
            row["crlb_m2"] = None
        elif lm.levels[node] == 0:
            row["crlb_m2"] = 2 * sc.noise.delta**2
        else:
            row["crlb_m2"] = _crlb.crlb_of_target(_crlb.build_fim(sc, lm, node))
        rows.append(row)
    out.write("\n".join(json.dumps(r) for r in rows) + "\n")
    return EXIT_OK


def cmd_locate(args, out):
    cfg = load_config(args)
    sc, sim = cfg.scenario, cfg.sim
    lm = assign_levels(sc)
    if args.target not in sc.ids:
        raise ConfigError("target", f"unknown node id {args.target!r}")
    if lm.levels.get(args.target, 0) < 1:
        raise ConfigError("target", f"node {args.target!r} is a base anchor or unlocalizable")
    root = sim.root_seed
    ms = synthesize_measurements(sc, substream(root, 0, STREAM_MEASURE))
    method = Method(args.method)
    k = lm.levels[args.target]
    if k == 1:
        das = dynamic_anchor_set(sc, lm, args.target)
        crl = {a: _crlb.anchor_crlb_for_localization(sc, lm, a) for a in das.anchors}
        prob = LocalizeProblem([AnchorBelief(a, ms.observed_anchor_pos[a], crl[a]) for a in das.anchors],
                               [ms.range(args.target, a) for a in das.anchors], max(sc.noise.sigma, 1e-12),
                               search_radius_anchor=sim.search_radius_anchor,
                               search_radius_target=sim.search_radius_target,
                               pso=sim.pso.with_seed(int(substream(root, 0, STREAM_SOLVER).integers(2**62))),
                               ichan=sim.ichan)
        est = locate(prob, method, eta=sim.eta)
    else:
        res = localize_instant(sc, ms, lm, sim, (method,), (root, 0), max_level=k)
        if args.target not in res.estimates[method]:
            raise RuntimeError(f"localization of {args.target!r} failed")
        est = res.estimates[method][args.target]
    out.write(json.dumps(est.to_dict()) + "\n")
    return EXIT_OK


def _emit(report, args, out):
    if args.out:
        paths = write_outputs(report, args.out, args.format, figures=not args.no_figures)
        for p in paths:
            log.info("wrote %s", p)
    else:
        out.write(emit_report(report, args.format))
    if report.failure_rate > FAILURE_LIMIT:
        log.error("solver failure rate %.0f%% exceeds %.0f%%",
                  100 * report.failure_rate, 100 * FAILURE_LIMIT)
        return EXIT_FAILURES
    return EXIT_OK


def cmd_sweep(args, out):
    cfg = load_config(args)
    if cfg.sim.mobility is None:
        report = run_static_sweep(cfg.sim)
    else:
        report = run_mobile_sweep(cfg.sim)
    return _emit(report, args, out)


def cmd_simulate(args, out):
    cfg = load_config(args, require_mobility=True)
    return _emit(run_manet(cfg.sim), args, out)


COMMANDS = {"levels": cmd_levels, "crlb": cmd_crlb, "locate": cmd_locate,
            "sweep": cmd_sweep, "simulate": cmd_simulate}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        errors = getattr(exc, "errors", None) or [(exc.field, str(exc).split(": ", 1)[-1])]
        for f, msg in errors:
            print(f"config error: {f}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:  # noqa: BLE001 - last-resort mapping to the internal-error code
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
