"""Experiment runner: synthetic validation, replay, live runs, sweeps, reports.

Every command is a deterministic function of its flags, config file, and
inputs. Flags win over config-file values. Outputs are line-delimited episode
records, CSV curves, and a summary.json per command invocation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import POLICY_KINDS, make_policy
from .episodes import RewardMode, run_stream
from .metrics import MultisetMetrics
from .protocol import LiveSource, SubprocessChannel
from .synthetic import (
    deceptive_instance,
    default_config,
    estimation_error,
    make_episode_set,
    run_rounds,
)
from .trace import (
    load_trace,
    write_curve,
    write_episode_records,
    write_rounds_curves,
    write_trace,
)

EXIT_OK = 0
EXIT_RUN_ERROR = 1
EXIT_USAGE = 2

OUT_DIR_ENV = "TOOLBANDIT_OUT"


class UsageError(Exception):
    pass


def _parse_seeds(raw: str) -> list[int]:
    try:
        seeds = [int(s) for s in raw.split(",") if s.strip() != ""]
    except ValueError:
        raise UsageError(f"bad seed list {raw!r}")
    if not seeds:
        raise UsageError("at least one seed is required")
    return seeds


def _parse_pattern(raw: str) -> tuple[int, ...]:
    try:
        pattern = tuple(int(p) for p in raw.split(",") if p.strip() != "")
    except ValueError:
        raise UsageError(f"bad ground-truth pattern {raw!r}")
    if not pattern or any(p < 1 for p in pattern):
        raise UsageError("ground-truth pattern needs positive multiplicities")
    return pattern


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config_values(path: str, subparser) -> dict:
    """Read a JSON config and coerce values for the chosen subcommand."""
    try:
        values = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file: {exc}")
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    known = {action.dest for action in subparser._actions}
    coerced = {}
    for key, value in values.items():
        if key not in known:
            raise UsageError(f"config key {key!r} is not a flag of this command")
        if key == "seeds" and isinstance(value, str):
            value = _parse_seeds(value)
        if key == "gt_pattern" and isinstance(value, (str, list)):
            value = (
                _parse_pattern(value)
                if isinstance(value, str)
                else tuple(int(p) for p in value)
            )
        coerced[key] = value
    return coerced


def _episode_stream_seeds(seed: int) -> dict:
    """Seed derivation shared by synth episode runs and sweeps."""
    return {"env": 100 + seed, "episodes": 200 + seed, "run": seed}


def _summarize(per_seed: list[dict]) -> dict:
    keys = [
        k
        for k in per_seed[0]
        if k != "seed" and isinstance(per_seed[0][k], (int, float))
    ]
    summary = {}
    for key in keys:
        values = [row[key] for row in per_seed]
        summary[f"{key}_mean"] = float(np.mean(values))
        summary[f"{key}_std"] = float(np.std(values))
    return summary


def _write_summary(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _macro_or_empty(result) -> MultisetMetrics:
    if result.completed:
        return result.macro()
    return MultisetMetrics(0.0, 0.0, 0.0, 0, 0, 0)


def _run_episode_stream(args, episodes, source, seed, priors=None):
    policy = make_policy(
        args.policy,
        source.dimension,
        alpha=args.alpha,
        epsilon=args.epsilon,
        ucb1_c=args.ucb1_c,
        rng_seed=seed,
    )
    mode = RewardMode(args.reward_mode, final_weight=args.final_weight)
    result = run_stream(
        policy,
        episodes,
        source,
        mode,
        s=args.s,
        m=args.m,
        shuffle_seed=seed,
        priors=priors,
    )
    return policy, result


def cmd_synth(args) -> int:
    out = _out_dir(args)
    per_seed = []
    if args.task == "rounds":
        for seed in args.seeds:
            if args.instance == "deceptive":
                cfg, priors = deceptive_instance(
                    noise_sigma=args.noise_sigma, horizon=args.horizon, seed=seed
                )
            else:
                cfg = default_config(
                    dimension=args.dimension,
                    num_arms=args.arms,
                    noise_sigma=args.noise_sigma,
                    horizon=args.horizon,
                    seed=100 + seed,
                )
                priors = None
            policy = make_policy(
                args.policy, cfg.dimension, alpha=args.alpha,
                epsilon=args.epsilon, ucb1_c=args.ucb1_c, rng_seed=seed,
            )
            checkpoints = tuple(t for t in (100, 500, 2000) if t <= cfg.horizon)
            result = run_rounds(
                policy, cfg, priors=priors,
                checkpoints=checkpoints, error_every=max(cfg.horizon // 50, 1),
            )
            label = f"synth_rounds_{args.policy}_a{args.alpha}_seed{seed}"
            write_rounds_curves(out / f"{label}.rounds.csv", result.regret_curve, result.error_curve)
            err = estimation_error(policy, cfg) if hasattr(policy, "theta_estimate") else float("nan")
            per_seed.append(
                {
                    "seed": seed,
                    "regret_at_T": float(result.final_regret),
                    "opt_rate": result.optimal_rate(),
                    "estimation_error": err,
                }
            )
    else:
        for seed in args.seeds:
            seeds = _episode_stream_seeds(seed)
            cfg = default_config(
                dimension=args.dimension,
                num_arms=args.arms,
                noise_sigma=args.noise_sigma,
                horizon=args.horizon,
                seed=seeds["env"],
            )
            episodes, source = make_episode_set(
                cfg,
                num_episodes=args.episodes,
                gt_size=args.gt_size,
                seed=seeds["episodes"],
                gt_pattern=args.gt_pattern,
                margin=args.margin,
            )
            policy, result = _run_episode_stream(args, episodes, source, seeds["run"])
            label = (
                f"synth_episodes_{args.policy}_a{args.alpha}_{args.reward_mode}_seed{seed}"
            )
            meta = {
                "policy": args.policy, "alpha": args.alpha, "seed": seed,
                "reward_mode": args.reward_mode,
            }
            write_episode_records(out / f"{label}.episodes.jsonl", result, meta)
            write_curve(out / f"{label}.curve.csv", result.running_avg_f1)
            macro = _macro_or_empty(result)
            per_seed.append(
                {
                    "seed": seed,
                    "avg_f1": macro.f1,
                    "avg_precision": macro.precision,
                    "avg_recall": macro.recall,
                    "opt_rate": result.opportunity_rate(),
                    "regret_at_T": float(result.cumulative_regret),
                    "estimation_error": estimation_error(policy, cfg)
                    if hasattr(policy, "theta_estimate")
                    else float("nan"),
                    "aborted": result.aborted_count,
                }
            )
    summary = {
        "command": "synth",
        "task": args.task,
        "policy": args.policy,
        "alpha": args.alpha,
        "reward_mode": args.reward_mode,
        "per_seed": per_seed,
        **_summarize(per_seed),
    }
    _write_summary(out / f"synth_{args.task}_{args.policy}_a{args.alpha}_{args.reward_mode}.summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _replay_like(args, data, live_channel_factory=None) -> int:
    out = _out_dir(args)
    per_seed = []
    for seed in args.seeds:
        if live_channel_factory is None:
            source = data.source()
            priors = data.embeddings or None
        else:
            source = LiveSource(live_channel_factory(), timeout=args.timeout)
            if source.dimension != data.dimension:
                raise RuntimeError(
                    f"extractor dimension {source.dimension} != episodes dimension {data.dimension}"
                )
            priors = source.embeddings or None
        try:
            policy, result = _run_episode_stream(args, data.episodes, source, seed, priors)
        finally:
            source.close()
        mode_name = "live" if live_channel_factory else "replay"
        label = f"{mode_name}_{args.policy}_a{args.alpha}_seed{seed}"
        meta = {"policy": args.policy, "alpha": args.alpha, "seed": seed}
        write_episode_records(out / f"{label}.episodes.jsonl", result, meta)
        write_curve(out / f"{label}.curve.csv", result.running_avg_f1)
        macro = _macro_or_empty(result)
        per_seed.append(
            {
                "seed": seed,
                "avg_f1": macro.f1,
                "final_running_avg_f1": float(result.final_running_avg_f1),
                "opt_rate": result.opportunity_rate(),
                "regret_at_T": float(result.cumulative_regret),
                "aborted": result.aborted_count,
            }
        )
    mode_name = "live" if live_channel_factory else "replay"
    summary = {
        "command": mode_name,
        "policy": args.policy,
        "alpha": args.alpha,
        "trace": str(args.trace),
        "per_seed": per_seed,
        **_summarize(per_seed),
    }
    _write_summary(_out_dir(args) / f"{mode_name}_{args.policy}_a{args.alpha}.summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args) -> int:
    data = load_trace(args.trace)
    return _replay_like(args, data)


def cmd_live(args) -> int:
    if not args.extractor_cmd:
        raise UsageError("live mode needs --extractor-cmd")
    data = load_trace(args.trace)  # episode definitions; recorded contexts unused
    return _replay_like(
        args, data, live_channel_factory=lambda: SubprocessChannel(args.extractor_cmd)
    )


def cmd_sweep(args) -> int:
    alphas = [float(a) for a in args.alphas.split(",") if a.strip() != ""]
    if len(alphas) < 2:
        raise UsageError("sweep needs at least two alpha values")
    out = _out_dir(args)
    rows = []
    for alpha in alphas:
        f1s = []
        for seed in args.seeds:
            seeds = _episode_stream_seeds(seed)
            cfg = default_config(
                dimension=args.dimension,
                num_arms=args.arms,
                noise_sigma=args.noise_sigma,
                seed=seeds["env"],
            )
            episodes, source = make_episode_set(
                cfg,
                num_episodes=args.episodes,
                gt_size=args.gt_size,
                seed=seeds["episodes"],
                gt_pattern=args.gt_pattern,
                margin=args.margin,
            )
            policy = make_policy("linucb", cfg.dimension, alpha=alpha, rng_seed=seeds["run"])
            result = run_stream(
                policy, episodes, source,
                RewardMode(args.reward_mode, final_weight=args.final_weight),
                s=args.s, m=args.m, shuffle_seed=seeds["run"],
            )
            f1s.append(_macro_or_empty(result).f1)
        rows.append(
            {
                "alpha": alpha,
                "mean_f1": float(np.mean(f1s)),
                "std_f1": float(np.std(f1s)),
                "per_seed_f1": f1s,
            }
        )
    best = max(rows, key=lambda r: r["mean_f1"])
    summary = {
        "command": "sweep",
        "alphas": alphas,
        "rows": rows,
        "best_alpha": best["alpha"],
        "best_mean_f1": best["mean_f1"],
    }
    _write_summary(out / "sweep.summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    out = _out_dir(args)
    summaries = sorted(out.glob("*.summary.json"))
    if not summaries:
        print(f"no summaries found under {out}", file=sys.stderr)
        return EXIT_RUN_ERROR
    print(f"{'file':50s} {'avg F1':>8s} {'opt rate':>9s} {'regret@T':>10s} {'err':>8s}")
    for path in summaries:
        payload = json.loads(path.read_text())
        f1 = payload.get("avg_f1_mean", payload.get("best_mean_f1", float("nan")))
        opt = payload.get("opt_rate_mean", float("nan"))
        regret = payload.get("regret_at_T_mean", float("nan"))
        err = payload.get("estimation_error_mean", float("nan"))
        print(f"{path.name:50s} {f1:8.3f} {opt:9.3f} {regret:10.1f} {err:8.3f}")
    return EXIT_OK


def cmd_dump_synth(args) -> int:
    """Generate a learnable synthetic-context trace for replay experiments."""
    seeds = _episode_stream_seeds(args.seeds[0])
    cfg = default_config(
        dimension=args.dimension,
        num_arms=args.arms,
        noise_sigma=args.noise_sigma,
        seed=seeds["env"],
    )
    episodes, source = make_episode_set(
        cfg,
        num_episodes=args.episodes,
        gt_size=args.gt_size,
        seed=seeds["episodes"],
        gt_pattern=args.gt_pattern,
        margin=args.margin,
    )
    write_trace(
        args.trace,
        episodes,
        source.contexts,
        dimension=cfg.dimension,
        recorded_by="synthetic-generator",
        default_extra_steps=args.s,
    )
    print(f"wrote {len(episodes)} episodes to {args.trace}")
    return EXIT_OK


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="toolbandit",
        description="Online bandit experiment runner for sequential action selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    def common(p, trace_required=False):
        p.add_argument("--policy", default="linucb", choices=POLICY_KINDS)
        p.add_argument("--alpha", type=float, default=0.1)
        p.add_argument("--epsilon", type=float, default=0.1)
        p.add_argument("--ucb1-c", type=float, default=1.0, dest="ucb1_c")
        p.add_argument("--s", type=int, default=3, help="extra step allowance")
        p.add_argument("--m", type=int, default=3, help="per-arm selection cap")
        p.add_argument("--reward-mode", default="step", choices=("step", "final", "both"))
        p.add_argument("--final-weight", type=float, default=1.0)
        p.add_argument("--seeds", type=_parse_seeds, default=[0, 1, 2])
        p.add_argument("--out", default=None, help=f"output dir (or ${OUT_DIR_ENV})")
        p.add_argument("--config", default=None, help="JSON config file; flags win")
        if trace_required:
            p.add_argument("--trace", required=True)

    def synth_shape(p):
        p.add_argument("--dimension", type=int, default=8)
        p.add_argument("--arms", type=int, default=10)
        p.add_argument("--noise-sigma", type=float, default=0.1, dest="noise_sigma")
        p.add_argument("--horizon", type=int, default=2000)
        p.add_argument("--episodes", type=int, default=300)
        p.add_argument("--gt-size", type=int, default=3, dest="gt_size")
        p.add_argument("--gt-pattern", type=_parse_pattern, default=None, dest="gt_pattern")
        p.add_argument("--margin", type=float, default=0.0)

    p_synth = sub.add_parser("synth", help="synthetic validation streams")
    common(p_synth)
    synth_shape(p_synth)
    p_synth.add_argument("--task", default="rounds", choices=("rounds", "episodes"))
    p_synth.add_argument("--instance", default="standard", choices=("standard", "deceptive"))
    p_synth.set_defaults(func=cmd_synth)
    subparsers["synth"] = p_synth

    p_replay = sub.add_parser("replay", help="replay a recorded trace")
    common(p_replay, trace_required=True)
    p_replay.set_defaults(func=cmd_replay)
    subparsers["replay"] = p_replay

    p_live = sub.add_parser("live", help="run against a live extractor process")
    common(p_live, trace_required=True)
    p_live.add_argument("--extractor-cmd", default=None, dest="extractor_cmd")
    p_live.add_argument("--timeout", type=float, default=120.0)
    p_live.set_defaults(func=cmd_live)
    subparsers["live"] = p_live

    p_sweep = sub.add_parser("sweep", help="alpha sweep on synthetic episodes")
    common(p_sweep)
    synth_shape(p_sweep)
    p_sweep.add_argument("--alphas", default="0.01,0.1,1.0,10.0")
    p_sweep.set_defaults(func=cmd_sweep)
    subparsers["sweep"] = p_sweep

    p_report = sub.add_parser("report", help="summarize a results directory")
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=cmd_report)
    subparsers["report"] = p_report

    p_dump = sub.add_parser("dump-synth", help="write a synthetic episode trace")
    common(p_dump, trace_required=True)
    synth_shape(p_dump)
    p_dump.set_defaults(func=cmd_dump_synth)
    subparsers["dump-synth"] = p_dump

    return parser, subparsers


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            # config values become the chosen subcommand's defaults, then a
            # re-parse lets explicitly passed flags win over them
            values = _load_config_values(args.config, subparsers[args.command])
            subparsers[args.command].set_defaults(**values)
            args = parser.parse_args(argv)
        if args.command == "synth" and args.reward_mode != "step" and args.task == "rounds":
            # reward modes describe episode learning; rounds have no episodes
            args.task = "episodes"
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_ERROR


if __name__ == "__main__":
    sys.exit(main())
