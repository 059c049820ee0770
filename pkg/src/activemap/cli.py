"""``activemap`` command line: train, eval, compare, trace, plot."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from activemap import harness, neural, plot, trainer
from activemap._backend import BACKEND

log = logging.getLogger("activemap")


def _load_config(args) -> harness.RunConfig:
    cfg = harness.RunConfig.load(args.config) if args.config else harness.RunConfig()
    ev = cfg.evaluation
    ev = dataclasses.replace(
        ev,
        **{k: v for k, v in (("seed", args.seed), ("episodes", args.episodes),
                             ("workers", getattr(args, "workers", None))) if v is not None},
    )
    policy = cfg.policy
    if getattr(args, "policy", None):
        policy = harness.PolicyConfig.parse(args.policy, **{
            k: v for k, v in dataclasses.asdict(policy).items() if k not in ("name", "weights")
        })
    if getattr(args, "weights", None):
        policy = dataclasses.replace(policy, name="learned", weights=args.weights)
    if getattr(args, "greedy", False):
        policy = dataclasses.replace(policy, greedy=True)
    return dataclasses.replace(cfg, evaluation=ev, policy=policy)


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_train(args):
    cfg = _load_config(args)
    tc = cfg.train
    overrides = {k: v for k, v in (("episodes", args.episodes), ("seed", args.seed),
                                   ("checkpoint_every", args.checkpoint_every)) if v is not None}
    tc = dataclasses.replace(tc, **overrides)
    out_dir = args.out_dir or cfg.output.get("dir", "runs/train")
    os.makedirs(out_dir, exist_ok=True)
    weights = os.path.join(out_dir, "weights.bin")

    def progress(ep, reward, curve):
        if (ep + 1) % args.log_every == 0:
            log.info("episode %d  reward %.2f  trailing-100 %.2f",
                     ep + 1, reward, curve.trailing_mean(100))

    params, curve = trainer.train(tc, cfg.env, checkpoint_path=weights, progress=progress)
    neural.save_params(params, weights)
    curve.write(os.path.join(out_dir, "curve.csv"),
                os.path.join(out_dir, "curve_smoothed.csv"), args.kernel_width)
    _write_json(os.path.join(out_dir, "config.json"),
                {**cfg.to_dict(), "train": tc.to_dict()})
    print(f"trained {tc.episodes} episodes; trailing-100 mean "
          f"{curve.trailing_mean(100):.2f}; weights -> {weights}")


def cmd_eval(args):
    cfg = _load_config(args)
    report = harness.evaluate(cfg)
    print(harness.format_table([report]))
    out = args.output or cfg.output.get("report")
    if out:
        _write_json(out, report.to_dict())


def cmd_compare(args):
    cfg = _load_config(args)
    base = {k: v for k, v in dataclasses.asdict(cfg.policy).items() if k not in ("name", "weights")}
    policies = [harness.PolicyConfig.parse(p.strip(), **base)
                for p in args.policies.split(",") if p.strip()]
    report = harness.compare(cfg, policies)
    print(harness.format_table(report.rows))
    print()
    for pair in report.paired():
        print(f"{pair['a']} - {pair['b']}: {pair['mean_difference']:+.2f} "
              f"(paired s.e. {pair['paired_se']:.2f})")
    out = args.output or cfg.output.get("report")
    if out:
        _write_json(out, report.to_dict())


def cmd_trace(args):
    cfg = _load_config(args)
    out = args.output or cfg.output.get("trace") or "trace.jsonl"
    n = harness.trace(cfg, args.episode, out, args.stride)
    print(f"wrote {n} records to {out}")


def cmd_plot(args):
    plot.emit_curve_svg(args.curve, args.output, args.kernel_width)
    print(f"wrote {args.output}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activemap", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policy=True):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--episodes", type=int)
        if policy:
            sp.add_argument("--policy", help="random | frontier | myopic | learned:<weights>")
            sp.add_argument("--weights", help="weight file for the learned policy")
            sp.add_argument("--greedy", action="store_true",
                            help="learned policy takes its most likely action")
            sp.add_argument("--workers", type=int)

    sp = sub.add_parser("train", help="train the MLP actor-critic with A2C")
    common(sp, policy=False)
    sp.add_argument("--out-dir")
    sp.add_argument("--checkpoint-every", type=int)
    sp.add_argument("--kernel-width", type=float, default=50.0)
    sp.add_argument("--log-every", type=int, default=100)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate one policy")
    common(sp)
    sp.add_argument("--output", help="write the JSON report here")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("compare", help="evaluate several policies on paired seeds")
    common(sp)
    sp.add_argument("--policies", default="random,myopic")
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("trace", help="record one episode as JSON lines")
    common(sp)
    sp.add_argument("--episode", type=int, default=0)
    sp.add_argument("--stride", type=int, default=0, help="belief snapshot every N steps")
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("plot", help="render a learning curve as SVG")
    sp.add_argument("curve")
    sp.add_argument("--output", required=True)
    sp.add_argument("--kernel-width", type=float, default=50.0)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.debug("kernel backend: %s", BACKEND)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - single-line error contract
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
