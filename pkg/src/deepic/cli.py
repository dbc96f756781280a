"""Command-line driver: ``deepic {train,eval,baseline,perturb,blocklength,plot}``.

Runs are described by a JSON config with the sections below; unknown keys
are rejected and every run writes the fully resolved config next to its
outputs, so ``--config <out>/config.json`` reproduces it.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure.
The output directory is ``--out``, else the config's ``output_dir``, else
``$DEEPIC_OUTPUT_ROOT/<command>`` (default root ``runs``).
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import evalbench, plot as plotting
from .classic.schemes import BASELINES, make_baseline
from .ndgrad import NonFiniteError
from .neural import ArchConfig, CheckpointError, checkpoint
from .trainer import TrainConfig, TrainingDiverged, train

log = logging.getLogger("deepic")

OUTPUT_ROOT_ENV = "DEEPIC_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_TRAIN_KEYS = (
    "epochs", "batch_size", "enc_steps", "dec_steps", "enc_snr_db", "dec_snr_db", "alpha",
    "alpha_update", "lr", "grad_clip", "dtype", "val_snr_db", "val_blocks",
)


def default_config() -> dict:
    train_defaults = TrainConfig().to_dict()
    return {
        "seed": 0,
        "output_dir": None,
        "channel": {"h": [0.8], "snr_db": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], "noise_correlation": 0.0},
        "code": {"K": 100, "variant": "deepic", "arch": ArchConfig().to_dict()},
        "training": {k: train_defaults[k] for k in _TRAIN_KEYS},
        "evaluation": {"min_errors": 100, "max_blocks": 100_000, "batch_blocks": 1000},
        "baseline": {
            "iterations": 6,
            "interleaver_seed": 0,
            "td_power_policy": "equal_block_energy",
            "count_tail_energy": True,
        },
        "blocklength": {"lengths": [30, 60, 100]},
    }


class ConfigError(ValueError):
    """The run configuration is malformed."""


def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict) and key != "arch":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(defaults[key], value, where)
        elif key == "arch":
            if not isinstance(value, dict):
                raise ConfigError("config key 'code.arch' must be an object")
            try:
                out[key] = ArchConfig.from_dict({**defaults[key], **value}).to_dict()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"code.arch: {exc}") from exc
        else:
            out[key] = value
    return out


def resolve_config(raw: dict | None) -> dict:
    """Fill in defaults and validate; raises :class:`ConfigError`."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = _merge(default_config(), raw, "")
    h = cfg["channel"]["h"]
    cfg["channel"]["h"] = [float(v) for v in (h if isinstance(h, list) else [h])]
    cfg["channel"]["snr_db"] = [float(v) for v in cfg["channel"]["snr_db"]]
    # constructing the typed objects validates every value
    try:
        train_config(cfg)
        _stopping(cfg)
        evalbench.SweepSpec("check", cfg["channel"]["h"], cfg["channel"]["snr_db"], cfg["code"]["K"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> dict:
    if path is None:
        return resolve_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return resolve_config(raw)


def train_config(cfg: dict, K: int | None = None) -> TrainConfig:
    if len(cfg["channel"]["h"]) != 1:
        raise ConfigError("training needs exactly one channel.h value")
    return TrainConfig(
        K=int(cfg["code"]["K"] if K is None else K),
        h=cfg["channel"]["h"][0],
        variant=cfg["code"]["variant"],
        arch=cfg["code"]["arch"],
        seed=int(cfg["seed"]),
        noise_correlation=float(cfg["channel"]["noise_correlation"]),
        **cfg["training"],
    )


def _stopping(cfg: dict) -> evalbench.StoppingRule:
    return evalbench.StoppingRule(**cfg["evaluation"])


def _sweep_spec(cfg: dict, scheme: str, variant: str = "") -> evalbench.SweepSpec:
    return evalbench.SweepSpec(
        scheme=scheme,
        h_values=cfg["channel"]["h"],
        snr_db=cfg["channel"]["snr_db"],
        K=int(cfg["code"]["K"]),
        stop=_stopping(cfg),
        seed=int(cfg["seed"]),
        variant=variant,
        noise_correlation=float(cfg["channel"]["noise_correlation"]),
    )


def output_dir(args, cfg: dict, command: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / command


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def code_version_hash() -> str:
    """Git-style blob hash over the package sources, identifying the code version."""
    root = Path(__file__).parent
    digest = hashlib.sha1()
    for path in sorted(root.rglob("*.py")):
        body = path.read_bytes()
        digest.update(f"{path.relative_to(root).as_posix()}\0blob {len(body)}\0".encode())
        digest.update(body)
    return digest.hexdigest()


def _load_model(path, cfg: dict):
    return checkpoint.load(path, expected_kind=cfg["code"]["variant"])


# -- commands -------------------------------------------------------------------------


def cmd_train(args, cfg: dict) -> int:
    out = output_dir(args, cfg, "train")
    tc = train_config(cfg)
    _write_json(out / "config.json", cfg)
    result = train(tc, out_dir=out / "checkpoints")
    checkpoint.save(result.best, out / "checkpoint.json")
    checkpoint.save(result.last, out / "checkpoint_last.json")
    (out / "trainlog.csv").write_text(result.history.to_csv())
    manifest = {
        "command": "train",
        "config": cfg,
        "code_version": code_version_hash(),
        "best_epoch": result.best_epoch,
        "best_validation_ber": result.best_ber,
        "history": result.history.summary(),
        "checkpoints": result.history.checkpoints,
        "finished_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    _write_json(out / "manifest.json", manifest)
    print(f"trained {tc.variant}: best epoch {result.best_epoch}, validation BER {result.best_ber:.4g} -> {out}")
    return EXIT_OK


def cmd_eval(args, cfg: dict) -> int:
    out = output_dir(args, cfg, "eval")
    K = int(cfg["code"]["K"])
    if args.oracle:
        scheme, variant = evalbench.OracleScheme(K), "oracle"
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint (or --oracle)")
        model = _load_model(args.checkpoint, cfg)
        scheme, variant = evalbench.NeuralScheme(model, K), model.kind
    spec = _sweep_spec(cfg, scheme.name, variant)
    _write_json(out / "config.json", cfg)
    evalbench.write_csv(evalbench.sweep(spec, scheme), out / "ber.csv", spec.stop)
    print(f"wrote {out / 'ber.csv'}")
    return EXIT_OK


def cmd_baseline(args, cfg: dict) -> int:
    if args.scheme not in BASELINES:
        raise ConfigError(f"unknown baseline scheme {args.scheme!r}; choose from {', '.join(BASELINES)}")
    out = output_dir(args, cfg, "baseline")
    K = int(cfg["code"]["K"])
    opts = cfg["baseline"]
    kwargs = {}
    if args.scheme in ("tin", "turbo_p2p", "td"):
        kwargs = {"iterations": opts["iterations"], "interleaver_seed": opts["interleaver_seed"]}
    if args.scheme == "td":
        kwargs["power_policy"] = opts["td_power_policy"]
    if args.scheme != "uncoded":
        kwargs["count_tail_energy"] = bool(opts["count_tail_energy"])
    try:
        scheme = make_baseline(args.scheme, K, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    spec = _sweep_spec(cfg, args.scheme, args.scheme)
    _write_json(out / "config.json", cfg)
    evalbench.write_csv(evalbench.sweep(spec, scheme), out / "ber.csv", spec.stop)
    print(f"wrote {out / 'ber.csv'}")
    return EXIT_OK


def cmd_perturb(args, cfg: dict) -> int:
    out = output_dir(args, cfg, "perturb")
    model = _load_model(args.checkpoint, cfg)
    K = int(args.K or cfg["code"]["K"])
    try:
        summary = evalbench.perturbation_report(model, K, user=args.user, tau=args.tau, out_dir=out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_json(out / "config.json", cfg)
    print(f"support per branch {summary['support']} -> {out}")
    return EXIT_OK


def cmd_blocklength(args, cfg: dict) -> int:
    out = output_dir(args, cfg, "blocklength")
    lengths = [int(k) for k in cfg["blocklength"]["lengths"]]
    common = dict(
        lengths=lengths,
        h_values=cfg["channel"]["h"],
        snr_db=cfg["channel"]["snr_db"],
        stop=_stopping(cfg),
        seed=int(cfg["seed"]),
    )
    try:
        if args.checkpoint:
            points = evalbench.blocklength_study(model=_load_model(args.checkpoint, cfg), **common)
        else:
            points = evalbench.blocklength_study(train_config=train_config(cfg), **common)
    except ValueError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise ConfigError(str(exc)) from exc
    _write_json(out / "config.json", cfg)
    evalbench.write_csv(points, out / "blocklength.csv", _stopping(cfg))
    _write_json(out / "report.json", {"lengths": lengths, "expectation": evalbench.BLOCKLENGTH_EXPECTATION})
    print(f"wrote {out / 'blocklength.csv'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load plot spec {args.config}: {exc}") from exc
        spec = plotting.PlotSpec.from_dict(doc)
    else:
        if not args.inputs:
            raise ConfigError("plot needs CSV inputs or --config")
        spec = plotting.PlotSpec(inputs=list(args.inputs))
    if args.out:
        spec.output = args.out
    if args.group:
        spec.group_by = args.group.split(",")
    if args.y:
        spec.y = args.y
    path = plotting.plot(spec)
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "perturb": cmd_perturb,
    "blocklength": cmd_blocklength,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepic", description="DeepIC interference-channel code laboratory")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_parser(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        return p

    run_parser("train", "train a neural code")
    p = run_parser("eval", "BER sweep of a trained checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--oracle", action="store_true", help="evaluate the genie decoder instead of a model")
    p = run_parser("baseline", "BER sweep of a classic scheme")
    p.add_argument("scheme", help=", ".join(BASELINES))
    p = run_parser("perturb", "single-bit perturbation report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--K", type=int)
    p.add_argument("--user", type=int, choices=(1, 2), default=1)
    p.add_argument("--tau", type=float, default=evalbench.DEFAULT_TAU)
    p = run_parser("blocklength", "BER across block lengths (trains per length unless --checkpoint)")
    p.add_argument("--checkpoint")

    p = sub.add_parser("plot", help="SVG plot of BER CSVs")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--config", help="plot spec JSON")
    p.add_argument("--out")
    p.add_argument("--group", help="comma-separated grouping columns")
    p.add_argument("--y", help="y column (default ber_avg)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            return cmd_plot(args)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, CheckpointError, plotting.PlotError) as exc:
        print(f"deepic: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, NonFiniteError) as exc:
        print(f"deepic: numeric failure: {exc}", file=sys.stderr)
        path = getattr(exc, "path", None)
        if path is not None:
            print(f"deepic: last good checkpoint: {path}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"deepic: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
