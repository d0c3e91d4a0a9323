"""Command-line entry point: ``hybrid-reward {score,eval,serve,simulate,plot-data,config}``.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .boxes import TaskType
from .config import Config, ConfigError, load_config, scorer_params
from .grpo import RewardWeights
from .metrics import EvalFileError, EvalRecord, evaluate, format_table, load_eval_file
from .protocol import RequestError, dumps, score_request
from .scorer import HybridRewardScorer
from .utils.validation import check_ground_truth

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("hybrid_reward")


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", metavar="PATH", help="INI config file")
    g.add_argument("--strict", action="store_true", default=None, help="fail on the first malformed record")
    g.add_argument("--seed", type=int, metavar="N", help="random seed (simulate)")
    g.add_argument("--weights", metavar="A,B,C", help="lambda_srar,lambda_rpcr,lambda_evol")
    g.add_argument("--matching", choices=["one_to_one", "greedy", "literal"], help="OVD matching policy")
    g.add_argument("--kl", choices=["exact", "k3"], help="KL estimator")
    g.add_argument("--output", metavar="PATH", help="output file (directory for simulate)")
    g.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="hybrid-reward", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score line-delimited ScoreRequest records")
    p.add_argument("input", help="request file, or - for stdin")
    p.add_argument("--eval-output", metavar="PATH", help="also write eval records built from each group's first rollout")

    p = sub.add_parser("eval", parents=[common], help="compute Acc@t / mAP / Pass@1 over an eval record file")
    p.add_argument("input", help="eval record file")
    p.add_argument("--task", choices=["REC", "OVD", "VQA"], help="require every record to have this task")
    p.add_argument("--thresholds", metavar="T1,T2", help="Acc@t thresholds for REC (default 0.5,0.7)")

    sub.add_parser("serve", parents=[common], help="run the HTTP scoring service")

    p = sub.add_parser("simulate", parents=[common], help="toy template-policy GRPO runs")
    p.add_argument("--steps", type=int, help="updates per run")
    p.add_argument("--seeds", type=int, metavar="N", help="run seeds seed..seed+N-1")
    p.add_argument("--templates", type=int, metavar="M", help="number of templates")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--stochastic", action="store_true", default=None, help="Bernoulli correctness")
    p.add_argument("--clipped", action="store_true", default=None, help="add the clipped-surrogate KL term")
    p.add_argument("--compare-evol", action="store_true", help="paired runs with lambda_evol set to 0")

    p = sub.add_parser("plot-data", parents=[common], help="aggregate trajectory CSVs per step")
    p.add_argument("inputs", nargs="+", help="trajectory CSV files")

    sub.add_parser("config", parents=[common], help="print the resolved configuration")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    overrides = {
        ("rewards", "matching"): args.matching,
        ("grpo", "kl_estimator"): args.kl,
        ("simulate", "seed"): args.seed,
        ("eval", "strict"): args.strict,
    }
    if args.weights is not None:
        w = RewardWeights.parse(args.weights)
        overrides.update(
            {("weights", "lambda_srar"): w.lambda_srar, ("weights", "lambda_rpcr"): w.lambda_rpcr, ("weights", "lambda_evol"): w.lambda_evol}
        )
    for attr, key in [("steps", "steps"), ("seeds", "seeds"), ("templates", "templates"), ("learning_rate", "learning_rate"),
                      ("stochastic", "stochastic_correctness"), ("clipped", "clipped")]:
        if getattr(args, attr, None) is not None:
            overrides[("simulate", key)] = getattr(args, attr)
    if getattr(args, "thresholds", None) is not None:
        overrides[("eval", "acc_thresholds")] = args.thresholds
    return load_config(args.config, overrides=overrides)


@contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _read_lines(path: str):
    if path == "-":
        return sys.stdin.read().splitlines()
    return Path(path).read_text(encoding="utf-8").splitlines()


def _score_line(params: dict, line: str):
    """Score one request line; returns (response, eval_record or None, error or None)."""
    scorer = HybridRewardScorer(**params).fit()
    try:
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RequestError("INVALID_REQUEST", f"not valid JSON: {exc}") from None
        body, result = score_request(req, scorer)
    except RequestError as exc:
        return exc.to_dict(), None, f"{exc.code}: {exc.message}"
    task = TaskType.coerce(req["task"])
    rec = EvalRecord(body["request_id"], task, result.rollouts[0].parsed, check_ground_truth(task, req["ground_truth"]))
    return body, rec.to_dict(), None


def cmd_score(args, cfg: Config) -> int:
    strict = bool(cfg["eval"]["strict"])
    numbered = [(n, line) for n, line in enumerate(_read_lines(args.input), 1) if line.strip()]
    work = partial(_score_line, scorer_params(cfg))
    if args.parallel > 1 and len(numbered) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(work, [line for _, line in numbered], chunksize=8))
    else:
        results = [work(line) for _, line in numbered]

    failed = False
    with _open_out(args.output) as out, _open_out(args.eval_output) if args.eval_output else _null() as ev:
        for (lineno, _), (body, rec, err) in zip(numbered, results):
            if err is not None:
                print(f"{args.input}:{lineno}: {err}", file=sys.stderr)
                failed = True
                if strict:
                    return EXIT_USAGE
            out.write(dumps(body) + "\n")
            if ev is not None and rec is not None:
                ev.write(dumps(rec) + "\n")
    return EXIT_USAGE if failed and strict else EXIT_OK


@contextmanager
def _null():
    yield None


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from None


def cmd_eval(args, cfg: Config) -> int:
    try:
        thresholds = _parse_floats(cfg["eval"]["acc_thresholds"], "thresholds")
        records = load_eval_file(args.input, strict=bool(cfg["eval"]["strict"]))
        reports = evaluate(records, task=args.task, acc_thresholds=thresholds)
    except (EvalFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    payload = {"reports": [r.to_dict() for r in reports]}
    table = format_table(reports)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dumps(payload) + "\n")
        print(table)
    else:
        print(dumps(payload))
        print(table, file=sys.stderr)
    return EXIT_OK


def cmd_serve(args, cfg: Config) -> int:
    from .service import serve

    svc = cfg["service"]
    try:
        serve(HybridRewardScorer(**scorer_params(cfg)), host=svc["host"], port=int(svc["port"]), log_level=svc["log_level"])
    except OSError as exc:
        print(f"error: cannot bind {svc['host']}:{svc['port']}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _sim_config(cfg: Config):
    from .simulate import SimConfig

    s, g = cfg["simulate"], cfg["grpo"]
    w = cfg["weights"]
    return SimConfig(
        group_size=s["group_size"],
        steps=s["steps"],
        learning_rate=s["learning_rate"],
        weights=RewardWeights(w["lambda_srar"], w["lambda_rpcr"], w["lambda_evol"]),
        seed=s["seed"],
        stochastic_correctness=s["stochastic_correctness"],
        clipped=s["clipped"],
        epsilon_clip=g["epsilon_clip"],
        beta_kl=g["beta_kl"],
        kl_estimator=g["kl_estimator"],
        epsilon_std=g["epsilon_std"],
    )


def cmd_simulate(args, cfg: Config) -> int:
    from .evolution import HashingEmbedder
    from .simulate import TemplateWorld, config_dict, sweep, without_evolution

    s = cfg["simulate"]
    try:
        sim_cfg = _sim_config(cfg)
        world = TemplateWorld.default(
            M=s["templates"], salient=s["salient"], others=s["others"],
            embedder=HashingEmbedder(cfg["embedder"]["n_features"], cfg["embedder"]["seed"]),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seeds = list(range(sim_cfg.seed, sim_cfg.seed + max(1, int(s["seeds"]))))
    runs = {"evol": sweep(world, sim_cfg, seeds, args.parallel)}
    if args.compare_evol:
        runs["no_evol"] = sweep(world, without_evolution(sim_cfg), seeds, args.parallel)

    summary = {"config": config_dict(sim_cfg), "templates": world.M, "runs": {}}
    for name, trajs in runs.items():
        summary["runs"][name] = [{"seed": sd, **t.summary()} for sd, t in zip(seeds, trajs)]
    if args.compare_evol:
        h_with = np.array([t.entropy[-1] for t in runs["evol"]])
        h_without = np.array([t.entropy[-1] for t in runs["no_evol"]])
        summary["comparison"] = {
            "median_final_entropy_with_evol": float(np.median(h_with)),
            "median_final_entropy_without_evol": float(np.median(h_without)),
            "paired_win_fraction": float(np.mean(h_with > h_without)),
            "median_entropy_gap": float(np.median(h_with - h_without)),
        }

    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for name, trajs in runs.items():
            for sd, t in zip(seeds, trajs):
                t.to_csv(out / f"trajectory_{name}_seed{sd}.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    else:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


PLOT_COLUMNS = ("entropy", "mean_reward", "mean_evol", "top_template_prob")


def cmd_plot_data(args, cfg: Config) -> int:
    series = []
    for path in args.inputs:
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
            series.append(np.array([[float(r[c]) for c in PLOT_COLUMNS] for r in rows]))
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    n = min(len(s) for s in series)
    stack = np.stack([s[:n] for s in series])  # (runs, steps, columns)
    with _open_out(args.output) as out:
        writer = csv.writer(out)
        writer.writerow(["step", "runs"] + [f"{c}_{stat}" for c in PLOT_COLUMNS for stat in ("mean", "median", "min", "max")])
        for i in range(n):
            row = [i + 1, len(series)]
            for j in range(len(PLOT_COLUMNS)):
                col = stack[:, i, j]
                row += [repr(float(col.mean())), repr(float(np.median(col))), repr(float(col.min())), repr(float(col.max()))]
            writer.writerow(row)
    return EXIT_OK


def cmd_config(args, cfg: Config) -> int:
    with _open_out(args.output) as out:
        out.write(cfg.to_ini())
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "simulate": cmd_simulate,
    "plot-data": cmd_plot_data,
    "config": cmd_config,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.parallel < 1:
        parser.error("--parallel must be >= 1")
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
