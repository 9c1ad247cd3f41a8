"""
Command-line driver.

    matskew simulate  --config FILE | --preset NAME  --out DIR
    matskew fit       --data FILE --family gh|vg|nig --out FILE
    matskew reproduce --preset NAME --replicates N --seed N --out DIR
    matskew marginals --data FILE [--bins 30] [--range LO HI] --out FILE

Exit codes: 0 success, 1 fit failure, 2 invalid input.
"""

import argparse
import json
import os
import sys
import warnings

from . import simulation as sim
from .ecm import FitConfig, fit
from .errors import FitError, MatskewError

EXIT_OK = 0
EXIT_FIT = 1
EXIT_INPUT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def build_parser():
    parser = _Parser(prog="matskew", description="Matrix variate skew distributions: simulate, fit, report.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write simulated dataset files")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON simulation config")
    src.add_argument("--preset", choices=sim.PRESETS)
    p.add_argument("--replicates", type=_positive_int, help="overrides the config value")
    p.add_argument("--observations", type=_positive_int, help="overrides the config value")
    p.add_argument("--seed", type=int, help="overrides the config value")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit one dataset by ECM")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True, choices=("gh", "vg", "nig"))
    p.add_argument("--epsilon", type=_positive_float, default=1e-6)
    p.add_argument("--max-iter", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=0, help="initialization seed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("reproduce", help="simulate, fit every replicate, aggregate")
    p.add_argument("--preset", required=True, choices=sim.PRESETS)
    p.add_argument("--replicates", type=_positive_int, default=50)
    p.add_argument("--observations", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=_positive_float, default=1e-6)
    p.add_argument("--max-iter", type=_positive_int, default=2000)
    p.add_argument("--workers", type=_positive_int, help="worker processes (default: MATSKEW_THREADS or CPU count)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("marginals", help="per-column histogram data")
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=_positive_int, default=30)
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--out", required=True)
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise sim.ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise sim.ValidationError(f"{path}: {exc.strerror}") from None
    try:
        return sim.SimulationConfig.from_dict(doc)
    except sim.ValidationError as exc:
        raise sim.ValidationError(f"{path}: {exc}") from None


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise sim.ValidationError(f"{path}: {exc.strerror}") from None


def cmd_simulate(args):
    if args.config:
        cfg = _load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("replicates", "observations", "seed")
                     if getattr(args, k) is not None}
        if overrides:
            cfg = sim.SimulationConfig(cfg.name, cfg.params, cfg.mixing,
                                       **{"replicates": cfg.replicates, "observations": cfg.observations,
                                          "seed": cfg.seed, **overrides})
    else:
        cfg = sim.SimulationConfig.from_preset(
            args.preset,
            replicates=args.replicates or 50,
            observations=args.observations or 100,
            seed=0 if args.seed is None else args.seed,
        )
    _ensure_dir(args.out)
    width = max(3, len(str(cfg.replicates - 1)))
    for k, x in enumerate(sim.simulate_replicates(cfg)):
        path = os.path.join(args.out, f"{cfg.name}-rep{k:0{width}d}.json")
        sim.write_dataset(path, x, location=cfg.params.m)
    print(f"wrote {cfg.replicates} dataset(s) to {args.out}")
    return EXIT_OK


def cmd_fit(args):
    x, _ = sim.read_dataset(args.data)
    cfg = FitConfig(family=args.family, epsilon=args.epsilon, max_iter=args.max_iter, init_seed=args.seed)
    res = fit(x, cfg)
    sim._atomic_write(args.out, sim.dump_json(res.to_dict()))
    state = "converged" if res.converged else "stopped at max_iter"
    print(f"{state} after {res.iterations} iterations, loglik {res.loglik:.6f}")
    return EXIT_OK


def cmd_reproduce(args):
    cfg = sim.SimulationConfig.from_preset(args.preset, args.replicates, args.observations, args.seed)
    workers = sim.worker_count(args.workers)
    _ensure_dir(args.out)
    data = sim.simulate_replicates(cfg)
    fits = sim.fit_replicates(data, cfg.family, args.epsilon, args.max_iter, init_seed=args.seed,
                              workers=workers)
    truth = {"m": cfg.params.m.tolist(), "a": cfg.params.a.tolist(), "sigma": cfg.params.sigma.tolist(),
             "psi": cfg.params.psi.tolist(), "mixing": cfg.mixing.to_dict()}
    report = sim.AggregateReport.from_fits(cfg.name, cfg.family, cfg.params.dims, truth, fits)
    doc = report.to_dict()
    doc["settings"] = {"replicates": args.replicates, "observations": args.observations, "seed": args.seed,
                       "epsilon": args.epsilon, "max_iter": args.max_iter}
    sim._atomic_write(os.path.join(args.out, f"{cfg.name}-report.json"), sim.dump_json(doc))
    sim._atomic_write(os.path.join(args.out, f"{cfg.name}-report.txt"), report.to_text())
    c = report.counts
    print(f"{cfg.name}: {c['converged']} converged, {c['max_iter']} hit max_iter, {c['failed']} failed")
    return EXIT_OK


def cmd_marginals(args):
    x, location = sim.read_dataset(args.data)
    if args.range is not None and not args.range[0] < args.range[1]:
        raise sim.ValidationError("--range needs LO < HI")
    hists = sim.column_histograms(x, args.bins, args.range)
    sim._atomic_write(args.out, sim.histogram_csv(hists, location))
    print(f"wrote {len(hists)} column histogram(s) to {args.out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "reproduce": cmd_reproduce,
    "marginals": cmd_marginals,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except FitError as exc:
        print(f"matskew: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (MatskewError, ValueError) as exc:
        print(f"matskew: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
