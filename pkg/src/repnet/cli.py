"""Command line entry point: ``repnet rank | attack-eval | stats``.

Settings come from built-in defaults, then an optional JSON ``--config`` file,
then command line flags. The log level is read from ``REPNET_LOG_LEVEL``.

Exit codes: 0 success, 1 configuration error, 2 runtime error (I/O, bad
input data, numerical failure or nonconvergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

from .attacks import AttackKind, Direction
from .clustering import multipartite_rank
from .dataset import DatasetError, RatingScale, dataset_stats, k_core_filter, read_ratings
from .experiment import DEFAULT_FRACTIONS, METHODS, EvalRow, ExperimentConfig, evaluate_attacks
from .ranker import Aggregation, Decay, DenominatorGuard, NumericalError, RankerConfig, run_fixed_point
from .similarity import Compressor, Measure

log = logging.getLogger("repnet")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
LOG_ENV = "REPNET_LOG_LEVEL"

DEFAULTS: dict[str, Any] = {
    # ranker
    "lam": 0.3,
    "p": 1,
    "aggregation": "average",
    "decay": "constant",
    "upsilon": 0.5,
    "s": 5,
    "epsilon": 1e-9,
    "max_iters": 1000,
    "initial_reputation": 1.0,
    "guard": "floor",
    # rating scale
    "r_min": 1,
    "r_max": 5,
    # clustering
    "mode": "bipartite",
    "measure": "LD",
    "theta": 3,
    "compressor": "zlib",
    "alpha": 0.8,
    "min_cluster_size": 1,
    # attacks
    "attack": "random",
    "direction": "nuke",
    "fractions": list(DEFAULT_FRACTIONS),
    "methods": list(METHODS),
    "filler_count": 9,
    "poisson_lambda": 5.0,
    "seed": 0,
}


class ConfigError(Exception):
    pass


def fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".15g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# -- configuration ---------------------------------------------------------


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def load_settings(args: argparse.Namespace) -> dict[str, Any]:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        settings.update(loaded)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    return settings


def scale_from(s: dict[str, Any]) -> RatingScale:
    return RatingScale(int(s["r_min"]), int(s["r_max"]))


def ranker_from(s: dict[str, Any]) -> RankerConfig:
    return RankerConfig(
        lam=float(s["lam"]),
        p=s["p"],
        aggregation=s["aggregation"],
        decay=s["decay"],
        upsilon=float(s["upsilon"]),
        s=s["s"],
        epsilon=float(s["epsilon"]),
        max_iters=s["max_iters"],
        initial_reputation=float(s["initial_reputation"]),
        guard=s["guard"],
    )


def experiment_from(s: dict[str, Any]) -> ExperimentConfig:
    return ExperimentConfig(
        ranker=ranker_from(s),
        theta=s["theta"],
        compressor=s["compressor"],
        alpha=float(s["alpha"]),
        min_cluster_size=int(s["min_cluster_size"]),
        methods=tuple(str(m).upper() for m in s["methods"]),
        attack=s["attack"],
        direction=s["direction"],
        fractions=tuple(float(f) for f in s["fractions"]),
        filler_count=s["filler_count"],
        poisson_lambda=float(s["poisson_lambda"]),
        seed=int(s["seed"]),
    )


# -- commands --------------------------------------------------------------


def cmd_rank(args: argparse.Namespace) -> int:
    s = load_settings(args)
    try:
        scale = scale_from(s)
        exp = experiment_from(s)
        exp.ranker.check_contraction(scale)
        if s["mode"] not in ("bipartite", "multipartite"):
            raise ValueError(f"mode must be bipartite or multipartite, got {s['mode']!r}")
        simcfg = exp.similarity(str(s["measure"]).upper())
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    d = read_ratings(args.data, scale)
    if d.n_ratings == 0:
        raise DatasetError(f"{args.data} holds no ratings")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if s["mode"] == "bipartite":
        res = run_fixed_point(d, exp.ranker)
        rankings = res.state.ranking_map()
        reputations = res.state.reputation_map()
        summary = [("all", d.n_users, d.n_items, res.iterations, res.converged)]
        converged, iterations = res.converged, res.iterations
    else:
        mp = multipartite_rank(d, simcfg, exp.alpha, exp.ranker, exp.min_cluster_size)
        r = mp.ranking
        rankings = r.displayed
        reputations = dict(sorted(r.reputations().items()))
        summary = [
            (c.index, c.size, len(c.rankings), c.result.iterations, c.result.converged)
            for c in r.per_cluster
        ]
        converged, iterations = r.converged, r.iterations
        with open(out / "clusters.csv", "w", newline="", encoding="utf-8") as fh:
            mp.partition.to_csv(fh)
        write_csv(
            out / "cluster_rankings.csv",
            ("cluster_id", "item", "ranking"),
            ((c.index, item, v) for c in r.per_cluster for item, v in c.rankings.items()),
        )

    write_csv(out / "rankings.csv", ("item", "ranking"), rankings.items())
    write_csv(out / "reputations.csv", ("user", "reputation"), reputations.items())
    write_csv(out / "summary.csv", ("cluster", "users", "items", "iterations", "converged"), summary)
    print(f"iterations={iterations} converged={fmt(converged)}")
    if not converged:
        log.error("ranking did not converge within max_iters=%d; outputs are partial", exp.ranker.max_iters)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_attack_eval(args: argparse.Namespace) -> int:
    s = load_settings(args)
    try:
        scale = scale_from(s)
        exp = experiment_from(s)
        exp.ranker.check_contraction(scale)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    d = read_ratings(args.data, scale)
    if d.n_ratings == 0:
        raise DatasetError(f"{args.data} holds no ratings")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows: list[EvalRow] = []
    for row in evaluate_attacks(d, exp):
        log.info("%s fraction=%g robustness=%s", row.method, row.fraction, fmt(row.robustness))
        rows.append(row)
    header = list(EvalRow.COLUMNS) + (["seconds"] if args.timing else [])
    write_csv(
        out / "attack_eval.csv",
        header,
        (list(r.values()) + ([r.seconds] if args.timing else []) for r in rows),
    )
    if not args.no_figures:
        from .plotting import render_sweep

        title = "random spam"
        if exp.attack is not AttackKind.RANDOM_SPAM:
            title = f"{exp.attack.value} attack ({exp.direction.value})"
        render_sweep(rows, out, title)
    if not all(r.converged for r in rows):
        log.error("some runs did not converge; see the converged column")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    s = load_settings(args)
    try:
        scale = scale_from(s)
        if args.k_core is not None and args.k_core < 1:
            raise ValueError("--k-core must be >= 1")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    d = read_ratings(args.data, scale)
    if args.k_core is not None:
        d = k_core_filter(d, args.k_core, users_only=args.users_only)
    st = dataset_stats(d)
    if args.format == "json":
        text = st.to_json() + "\n"
    else:
        text = "metric,value\n" + "".join(f"{k},{v}\n" for k, v in st.csv_rows())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="ratings CSV: user_id,item_id,rating,timestamp (no header)")
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--r-min", dest="r_min", type=int, help="lowest allowed rating (default 1)")
    p.add_argument("--r-max", dest="r_max", type=int, help="highest allowed rating (default 5)")


def _add_ranker(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ranker")
    g.add_argument("--lam", type=float, help="penalty strength lambda (default 0.3)")
    g.add_argument("--p", type=int, help="exponent on rating errors (default 1)")
    g.add_argument("--aggregation", choices=[a.value for a in Aggregation])
    g.add_argument("--decay", choices=[k.value for k in Decay])
    g.add_argument("--upsilon", type=float, help="logistic decay floor (default 0.5)")
    g.add_argument("--s", type=int, help="logistic decay midpoint (default 5)")
    g.add_argument("--epsilon", type=float, help="convergence tolerance (default 1e-9)")
    g.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap (default 1000)")
    g.add_argument("--initial-reputation", dest="initial_reputation", type=float)
    g.add_argument("--guard", choices=[x.value for x in DenominatorGuard])

    g = p.add_argument_group("clustering")
    g.add_argument("--theta", type=int, help="LD confidence threshold (default 3)")
    g.add_argument("--compressor", choices=[c.value for c in Compressor])
    g.add_argument("--alpha", type=float, help="similarity threshold for an edge (default 0.8)")
    g.add_argument("--min-cluster-size", dest="min_cluster_size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repnet", description="Reputation-based ranking on rating data, with attack evaluation."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="rank items and users")
    _add_common(p)
    _add_ranker(p)
    p.add_argument("--mode", choices=["bipartite", "multipartite"])
    p.add_argument("--measure", choices=[m.value for m in Measure], help="similarity for multipartite mode")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("attack-eval", help="compare methods on clean and attacked data")
    _add_common(p)
    _add_ranker(p)
    p.add_argument("--attack", choices=[k.value for k in AttackKind])
    p.add_argument("--direction", choices=[x.value for x in Direction])
    p.add_argument("--fractions", type=_csv_list(float), help="comma separated, e.g. 0,0.25,0.5")
    p.add_argument("--methods", type=_csv_list(str), help=f"comma separated subset of {','.join(METHODS)}")
    p.add_argument("--filler-count", dest="filler_count", type=int)
    p.add_argument("--poisson-lambda", dest="poisson_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timing", action="store_true", help="add a wall time column (not reproducible)")
    p.add_argument("--no-figures", dest="no_figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_attack_eval)

    p = sub.add_parser("stats", help="dataset summary")
    _add_common(p)
    p.add_argument("--k-core", dest="k_core", type=int, help="apply k-core filtering first")
    p.add_argument("--users-only", dest="users_only", action="store_true", help="k-core on users only")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(func=cmd_stats)
    return parser


def _setup_logging() -> None:
    name = os.environ.get(LOG_ENV, "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (OSError, DatasetError, NumericalError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
