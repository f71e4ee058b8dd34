"""Command line entry point: ``enroute {gen-net,lossless,lossy,verify}``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import EnrouteError
from .experiment import ExperimentConfig, aggregate, format_csv, load_config, run_lossless, run_lossy
from .scheduling import assign_schedule, causal_sets_for, check_causal_sets, prune_for_decodability
from .topology import RadioModel, network_to_json, random_network
from .transform import assemble_global_matrix, decode_epochs, encode_epochs, verify_critical_sampling, verify_invertibility
from .zoo import SCHEMES, build_scheme


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.scheme:
        over["schemes"] = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    if args.trials is not None:
        over["trials"] = args.trials
    return replace(cfg, **over) if over else cfg


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(rows) -> None:
    for (scheme, radio, corr, step), agg in sorted(aggregate(rows).items()):
        print(f"{scheme:15s} {radio:8s} {corr:4s} step={step:g} ratio={agg['ratio_mean']:+.4f} "
              f"(sd {agg['ratio_std']:.4f}, n={agg['trials']}) snr={agg['snr_mean']:.2f} dB", file=sys.stderr)


def cmd_gen_net(args) -> int:
    radio = RadioModel.fixed(args.radius) if args.radio == "fixed" else RadioModel.variable()
    net = random_network(args.nodes, args.extent, radio, seed=args.seed or 0)
    _write(network_to_json(net) + "\n", args.out)
    return 0


def cmd_lossless(args) -> int:
    rows = run_lossless(_config(args))
    _write(format_csv(rows), args.out)
    _summary(rows)
    return 0


def cmd_lossy(args) -> int:
    rows = run_lossy(_config(args))
    _write(format_csv(rows), args.out)
    _summary(rows)
    return 0


def verify_suite(networks: int = 10, nodes: int = 15, seed: int = 0) -> list[str]:
    """Invariant checks over a fixture set of random networks; returns failures."""
    failures = []
    rng = np.random.default_rng(seed)
    for i in range(networks):
        radio = RadioModel.fixed(200.0) if i % 2 else RadioModel.variable()
        net = random_network(nodes, 600.0, radio, seed=seed + i)
        sched = assign_schedule(net)
        causal = causal_sets_for(net, sched)
        for p in check_causal_sets(causal, net, sched):
            failures.append(f"net {i}: {p}")
        if prune_for_decodability(causal, net, sched) != causal:
            failures.append(f"net {i}: pruning is not idempotent")
        cov = np.eye(net.n) + 0.5
        x = rng.normal(size=(3, net.n))
        for name in SCHEMES:
            t = build_scheme(name, net, sched, causal, covariance=cov)
            y = encode_epochs(t, x)
            if not np.allclose(decode_epochs(t, y), x, rtol=1e-9, atol=1e-9):
                failures.append(f"net {i} {name}: round trip failed")
            if not np.allclose(assemble_global_matrix(t) @ x.T, y.T, rtol=1e-9, atol=1e-9):
                failures.append(f"net {i} {name}: global matrix disagrees with encoding")
            if not verify_invertibility(t).ok:
                failures.append(f"net {i} {name}: singular local matrix")
            if not verify_critical_sampling(t):
                failures.append(f"net {i} {name}: not critically sampled")
    return failures


def cmd_verify(args) -> int:
    failures = verify_suite(seed=args.seed or 0)
    for f in failures:
        print(f"FAIL {f}")
    print("verify: ok" if not failures else f"verify: {len(failures)} failure(s)")
    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enroute", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--scheme", help="comma-separated scheme selectors")
        p.add_argument("--trials", type=int, help="number of random networks")

    g = sub.add_parser("gen-net", help="generate a random network as JSON")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--nodes", type=int, default=50)
    g.add_argument("--extent", type=float, default=600.0)
    g.add_argument("--radio", choices=("variable", "fixed"), default="variable")
    g.add_argument("--radius", type=float, default=150.0)
    g.set_defaults(func=cmd_gen_net)
    for name, func, text in (("lossless", cmd_lossless, "cost reduction with unit-step detail coding"),
                             ("lossy", cmd_lossy, "cost and SNR over quantizer steps")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.set_defaults(func=func)
    v = sub.add_parser("verify", help="run the invariant suite on fixture networks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EnrouteError, OSError) as exc:
        print(f"enroute: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
