"""Command line entry point: ``lpgnn-lab <subcommand>``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .graph import SyntheticConfig, generate_synthetic, save_dataset
from .harness import (
    ConfigError,
    ExperimentConfig,
    SWEEPABLE,
    format_report,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    run_sweep_rows,
    summarize,
)

EXIT_USAGE = 2
EXIT_RUNTIME = 3

log = logging.getLogger("lpgnn_lab")


class UsageError(Exception):
    pass


def _common(seed_default=None):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=seed_default, help="root seed (default: 0, or the config file's)")
    p.add_argument("--out", help="output path (default: stdout for CSV commands)")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _experiment_flags():
    d = ExperimentConfig()
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("experiment")
    g.add_argument("--dataset", help=f"dataset directory or 'synthetic' (default: {d.dataset})")
    g.add_argument("--arch", choices=["gcn", "sage"], help=f"architecture (default: {d.arch})")
    g.add_argument("--eps-x", type=float, help=f"feature privacy budget (default: {d.eps_x})")
    g.add_argument("--eps-y", type=float, help=f"label privacy budget (default: {d.eps_y})")
    g.add_argument("--m", type=int, help="sampled coordinates per node; 0 means d (default: 0)")
    g.add_argument("--k-x", type=int, help=f"KProp hops on features (default: {d.k_x})")
    g.add_argument("--k-y", type=int, help=f"KProp hops on labels (default: {d.k_y})")
    g.add_argument("--repeats", type=int, help=f"repeats per configuration (default: {d.repeats})")
    g.add_argument("--defense", action="store_true", default=None,
                   help="clients withhold reports whose features leave [alpha, beta]")
    g.add_argument("--hidden-dim", type=int, help=f"hidden units (default: {d.hidden_dim})")
    g.add_argument("--learning-rate", type=float, help=f"step size (default: {d.learning_rate})")
    g.add_argument("--weight-decay", type=float, help=f"L2 penalty (default: {d.weight_decay})")
    g.add_argument("--max-epochs", type=int, help=f"epoch cap (default: {d.max_epochs})")
    g.add_argument("--patience", type=int, help=f"early-stopping patience (default: {d.patience})")
    g.add_argument("--json", dest="json_out", help="also write full result rows as JSON here")
    return p


_FLAG_FIELDS = ("dataset", "arch", "eps_x", "eps_y", "m", "k_x", "k_y", "repeats", "defense",
                "hidden_dim", "learning_rate", "weight_decay", "max_epochs", "patience", "seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpgnn-lab",
        description="Attacks and defenses for locally private GNNs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common, exp = _common(), _experiment_flags()

    g = sub.add_parser("gen-data", parents=[common], help="write a synthetic planted-partition dataset")
    s = SyntheticConfig()
    g.add_argument("--nodes", type=int, default=s.num_nodes, help=f"(default: {s.num_nodes})")
    g.add_argument("--classes", type=int, default=s.num_classes, help=f"(default: {s.num_classes})")
    g.add_argument("--d", type=int, default=s.d, help=f"feature dimension (default: {s.d})")
    g.add_argument("--intra", type=float, default=s.intra_edge_prob, help=f"(default: {s.intra_edge_prob})")
    g.add_argument("--inter", type=float, default=s.inter_edge_prob, help=f"(default: {s.inter_edge_prob})")
    g.add_argument("--signal", type=float, default=s.feature_signal, help=f"(default: {s.feature_signal})")

    sub.add_parser("baseline", parents=[common, exp], help="LPGNN with no attack")

    a = sub.add_parser("attack", parents=[common, exp], help="run one attack")
    a.add_argument("kind", choices=["inject", "flip", "infer", "poison"])
    a.add_argument("--rate", type=float,
                   help="inject/flip/poison: fraction of nodes (default 0.1); infer: number of targets (default 10)")

    w = sub.add_parser("sweep", parents=[common, exp], help="sweep one parameter")
    w.add_argument("--axis", required=True, choices=sorted(SWEEPABLE))
    w.add_argument("--values", required=True, help="comma separated values")
    w.add_argument("--attack", dest="attack_kind", choices=["none", "inject", "flip", "infer", "poison"])
    w.add_argument("--rate", type=float, help="attack parameter when not sweeping it")

    r = sub.add_parser("report", parents=[common], help="mean and std per configuration of a results CSV")
    r.add_argument("csv", help="results CSV from baseline/attack/sweep")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = ExperimentConfig.from_dict(json.load(fh))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"bad config file {args.config}: {exc}") from None
    overrides = {}
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return replace(cfg, **overrides)


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_rows(rows, args):
    _emit(rows_to_csv(rows), args.out)
    if getattr(args, "json_out", None):
        Path(args.json_out).write_text(rows_to_json(rows))


def cmd_gen_data(args):
    if not args.out:
        raise UsageError("gen-data needs --out DIR")
    config = SyntheticConfig(args.nodes, args.classes, args.d, args.intra, args.inter, args.signal)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = generate_synthetic(config, args.seed or 0)
    save_dataset(ds, args.out)
    log.info("wrote %d nodes, %d edges to %s", ds.num_nodes, ds.graph.num_edges, args.out)


def cmd_baseline(args):
    cfg = replace(_load_config(args), attack="none", attack_param=0.0)
    _emit_rows(run_experiment(cfg), args)


def cmd_attack(args):
    cfg = _load_config(args)
    rate = args.rate
    if rate is None:
        rate = cfg.attack_param if cfg.attack == args.kind and cfg.attack_param else (10 if args.kind == "infer" else 0.1)
    cfg = replace(cfg, attack=args.kind, attack_param=float(rate))
    _emit_rows(run_experiment(cfg), args)


def cmd_sweep(args):
    cfg = _load_config(args)
    if args.attack_kind:
        cfg = replace(cfg, attack=args.attack_kind)
    if args.rate is not None:
        cfg = replace(cfg, attack_param=args.rate)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma separated numbers, got {args.values!r}") from None
    if not values:
        raise UsageError("--values is empty")
    if args.axis in ("rate", "attack_param") and cfg.attack == "none":
        raise UsageError("sweeping the attack rate needs --attack")
    if args.axis not in ("rate", "attack_param"):
        cfg.validate()
    _emit_rows(run_sweep_rows(cfg, args.axis, values), args)


def cmd_report(args):
    try:
        text = Path(args.csv).read_text()
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.csv}") from None
    _emit(format_report(summarize(text)), args.out)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "baseline": cmd_baseline,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"lpgnn-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"lpgnn-lab {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
