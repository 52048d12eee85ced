"""Command-line entry point: ``momentum-flow <command> [--config PATH] [--out DIR] [--seed N]``.

Set ``MOMENTUM_FLOW_THREADS`` to cap BLAS threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import io
from . import verify as verify_suites
from .config import ConfigError, RunConfig, load_config
from .datasets import gen_dataset
from .forward import simulate_batch
from .metrics import MetricReport, energy_distance, exact_w2, knn_recall, sliced_w2, velocity_dispersion_profile
from .neural import VelocityModel
from .reverse import ReverseConfig, SamplingError, sample_reverse
from .schedule import Schedule
from .training import TrainConfig, TrainingDiverged, train

log = logging.getLogger("momentum_flow")


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "config": cfg.to_dict(), **extra}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset(cfg: RunConfig):
    ds = cfg.dataset
    return gen_dataset(ds.name, ds.n, seed=ds.seed, normalize_points=ds.normalize)


def cmd_verify(cfg: RunConfig, args) -> int:
    v = cfg.verify
    results = verify_suites.run_all(n_mc=v.n_mc, n_posterior=v.n_posterior, seed=v.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
    all_passed = all(r.passed for r in results)
    report = _meta(cfg, "verify", seed=v.seed, all_passed=all_passed, suites=[r.to_dict() for r in results])
    path = io.write_json(_out_dir(cfg) / "verify_report.json", report)
    print(f"report written to {path}")
    return 0 if all_passed else 1


def cmd_gen_data(cfg: RunConfig, args) -> int:
    cloud = _dataset(cfg)
    meta = _meta(cfg, "gen-data", seed=cfg.dataset.seed)
    if cloud.shift is not None:
        meta["normalization"] = {"shift": cloud.shift.tolist(), "scale": cloud.scale.tolist()}
    path = io.write_points(_out_dir(cfg) / "data.csv", cloud, meta)
    print(f"wrote {len(cloud)} points to {path}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    s = cfg.make_schedule()
    data = io.read_points(args.data) if args.data else _dataset(cfg)
    if data.d != s.d:
        raise ValueError(f"data dimension {data.d} does not match schedule d={s.d}")
    tc = TrainConfig(
        schedule=s,
        iterations=cfg.train.iterations,
        batch_size=cfg.train.batch_size,
        lr=cfg.train.lr,
        seed=cfg.model.seed,
        hidden_width=cfg.model.width,
        time_feature_width=cfg.model.time_feature_width,
        log_every=cfg.train.log_every,
        cache_trajectories=cfg.train.cache_trajectories,
        dataset=str(args.data) if args.data else cfg.dataset.name,
    )
    report = train(tc, data)
    out = _out_dir(cfg)
    meta = _meta(cfg, "train", seed=cfg.model.seed)
    model_doc = report.model.to_dict()
    model_doc["meta"] = meta
    io.write_json(out / "model.json", model_doc)
    io.write_loss_curve(out / "loss.csv", report.losses, meta)
    summary = report.to_dict()
    summary.pop("model")
    summary["meta"] = meta
    io.write_json(out / "train_report.json", summary)
    first, last = report.losses[0][1], report.losses[-1][1]
    print(f"trained {tc.iterations} iterations in {report.seconds:.1f}s; loss {first:.4f} -> {last:.4f}")
    print(f"model written to {out / 'model.json'}")
    return 0


def _load_model(path) -> tuple[VelocityModel, dict]:
    doc = io.read_json(path)
    return VelocityModel.from_dict(doc), doc.get("meta", {})


def _sampling_schedule(cfg: RunConfig, args, model_meta: dict) -> Schedule:
    trained = model_meta.get("config", {}).get("schedule")
    if args.config is None and trained is not None:
        return Schedule.from_dict(trained)
    s = cfg.make_schedule()
    if trained is not None and (trained["T"], trained["gamma"]) != (s.T, s.gamma):
        raise ValueError(
            f"model was trained with T={trained['T']}, gamma={trained['gamma']} "
            f"but the config requests T={s.T}, gamma={s.gamma}"
        )
    return s


def cmd_sample(cfg: RunConfig, args) -> int:
    if not args.model:
        raise ValueError("sample needs --model PATH")
    model, model_meta = _load_model(args.model)
    s = _sampling_schedule(cfg, args, model_meta)
    if model.d != s.d:
        raise ValueError(f"model dimension {model.d} does not match schedule d={s.d}")
    r = cfg.reverse
    record = r.record_trajectories or args.trajectories
    rc = ReverseConfig(r.steps_per_subpath, r.terminal_variance_source, record, r.seed)
    result = sample_reverse(model, s, r.n_samples, rc)
    out = _out_dir(cfg)
    meta = _meta(cfg, "sample", seed=r.seed, nfe=result.nfe, model=str(args.model),
                 schedule={"T": s.T, "gamma": s.gamma, "d": s.d})
    io.write_points(out / "samples.csv", result.cloud, meta)
    if record and result.path is not None:
        io.write_reverse_trajectories(out / "trajectories.csv", result.path, s.T, r.steps_per_subpath, meta)
    print(f"wrote {len(result.cloud)} samples to {out / 'samples.csv'} (NFE={result.nfe})")
    return 0


def _evaluate(cfg: RunConfig, a, b) -> list[MetricReport]:
    e = cfg.eval
    sizes = (len(a), len(b))
    reports = []
    for name in e.metrics:
        if name == "sliced_w2":
            reports.append(MetricReport(name, sliced_w2(a, b, e.n_proj, e.seed), {"n_proj": e.n_proj, "seed": e.seed}, sizes))
        elif name == "energy_distance":
            reports.append(MetricReport(name, energy_distance(a, b), {}, sizes))
        elif name == "exact_w2":
            reports.append(MetricReport(name, exact_w2(a, b), {}, sizes))
        elif name == "knn_recall":
            recall, precision = knn_recall(a, b, e.k)
            reports.append(MetricReport("recall", recall, {"k": e.k}, sizes))
            reports.append(MetricReport("precision", precision, {"k": e.k}, sizes))
    return reports


def cmd_eval(cfg: RunConfig, args) -> int:
    if not (args.a and args.b):
        raise ValueError("eval needs --a REAL.csv and --b GENERATED.csv")
    a, b = io.read_points(args.a), io.read_points(args.b)
    reports = _evaluate(cfg, a, b)
    print(f"{'metric':<18}{'value':>14}  {'n_a':>6} {'n_b':>6}")
    for r in reports:
        print(f"{r.metric:<18}{r.value:>14.6f}  {r.sizes[0]:>6} {r.sizes[1]:>6}")
    records = [dict(r.to_dict(), a=str(args.a), b=str(args.b), config=cfg.eval.__dict__) for r in reports]
    io.append_jsonl(_out_dir(cfg) / "metrics.jsonl", records)
    return 0


def cmd_profile(cfg: RunConfig, args) -> int:
    """Velocity dispersion per sub-path: forward (shared v_0 and over data) and,
    given --model, along generated reverse paths."""
    s = cfg.make_schedule()
    rng_seed = cfg.verify.seed
    n = args.n
    shared = simulate_batch(s, np.zeros((n, s.d)), rng_seed, eps0=np.ones(s.d))
    data = _dataset(cfg)
    over_data = simulate_batch(s, data.points, rng_seed + 1)
    profile = {
        "forward_shared_v0": velocity_dispersion_profile(shared),
        "forward_over_data": velocity_dispersion_profile(over_data),
    }
    if args.model:
        model, _ = _load_model(args.model)
        r = cfg.reverse
        res = sample_reverse(model, s, max(r.n_samples, 2), ReverseConfig(r.steps_per_subpath, r.terminal_variance_source, True, r.seed))
        profile["reverse"] = velocity_dispersion_profile(res)
    for key, values in profile.items():
        print(f"{key:<20}" + " ".join(f"{v:.5f}" for v in values))
    io.write_json(_out_dir(cfg) / "profile.json", dict(_meta(cfg, "profile", seed=rng_seed, n=n), profile=profile))
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "profile": cmd_profile,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentum-flow", description="Momentum flow transport toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON run config")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--data", type=Path, default=None, help="train on this point CSV instead of generating")
        if name in ("sample", "profile"):
            p.add_argument("--model", type=Path, default=None)
        if name == "sample":
            p.add_argument("--trajectories", action="store_true", help="also write reverse paths")
        if name == "eval":
            p.add_argument("--a", type=Path, help="reference point CSV")
            p.add_argument("--b", type=Path, help="generated point CSV")
        if name == "profile":
            p.add_argument("--n", type=int, default=10_000, help="forward trajectories")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if args.seed is not None:
        for section in (cfg.model, cfg.reverse, cfg.dataset, cfg.eval, cfg.verify):
            section.seed = args.seed
    return cfg


def _thread_limit():
    n = os.environ.get("MOMENTUM_FLOW_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        with _thread_limit():
            return COMMANDS[args.command](cfg, args)
    except (ConfigError, FileNotFoundError, ValueError, TrainingDiverged, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
