"""Config-driven command line for the whole pipeline.

Every command reads one JSON run configuration (path from --config or the
PIXATTR_CONFIG environment variable) and derives all randomness from its
single seed, so rerunning a command with the same config overwrites its
outputs with identical bytes.  Inputs are never modified; outputs land under
the configured data/model/report directories.
"""

import argparse
import dataclasses
import json
import os
import pathlib
import sys

import numpy as np

from .dataset import (
    dagger_augment,
    gen_delta_dataset,
    gen_prediction_dataset,
    load_dataset,
    save_dataset,
)
from .evalharness import (
    BASELINE_METRICS,
    EvalReport,
    load_reports,
    run_experiment,
    write_reports,
)
from .net.model import transfer_encoder_weights
from .net.train import TrainSpec, train
from .predictor import (
    PerturbationSpec,
    PredictorBundle,
    load_bundle,
    predict_config,
    prediction_arrays,
    save_bundle,
)
from .profiles import PROFILES, get_profile
from .refine import (
    DEFAULT_CLIP,
    PolicyBundle,
    RefineSpec,
    RefinementModels,
    delta_arrays,
    iteration_bound,
    load_policy_bundle,
    save_policy_bundle,
)
from .image import read_image, write_image
from .schema import KINDS, AttributeKind, is_color_kind

ENV_CONFIG = "PIXATTR_CONFIG"


class CliError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a command run depends on, in one reproducible document."""

    seed: int = 0
    profile: str = "desk"
    data_dir: str = "data"
    model_dir: str = "models"
    report_dir: str = "reports"
    kinds: tuple = tuple(k.value for k in KINDS)
    train_samples: int | None = None
    eval_samples: int | None = None
    delta_pairs: int | None = None
    subset_size: int = 3
    c: int = DEFAULT_CLIP
    epochs: int | None = None
    batch_size: int = 128
    lr: float = 0.01
    ensemble_k: int = 5
    ensemble_t: int = 5
    clip_threshold: float = 0.8
    refine_patience: int = 4
    refine_max_iters: int | None = None
    dagger_rounds: int = 1
    dagger_per_round: int = 50
    metrics: tuple = ("pixel", "structural", "wasserstein")

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise CliError(
                f"unknown profile {self.profile!r}; available: {sorted(PROFILES)}"
            )
        bad = [k for k in self.kinds if k not in {m.value for m in KINDS}]
        if bad:
            raise CliError(f"unknown attribute names in 'kinds': {bad}")
        bad = [m for m in self.metrics if m not in BASELINE_METRICS]
        if bad:
            raise CliError(f"unknown metrics: {bad}; pick from {sorted(BASELINE_METRICS)}")
        for name in ("subset_size", "c", "batch_size", "ensemble_k",
                     "refine_patience", "dagger_per_round"):
            if getattr(self, name) < 1:
                raise CliError(f"{name} must be at least 1")
        if self.lr <= 0:
            raise CliError("lr must be positive")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TUPLE_FIELDS = {"kinds", "metrics"}
_INT_FIELDS = {
    "seed", "train_samples", "eval_samples", "delta_pairs", "subset_size", "c",
    "epochs", "batch_size", "ensemble_k", "ensemble_t", "refine_patience",
    "refine_max_iters", "dagger_rounds", "dagger_per_round",
}
_FLOAT_FIELDS = {"lr", "clip_threshold"}


def _coerce(name: str, value):
    try:
        if name in _TUPLE_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v]
            return tuple(value)
        if value is None:
            return None
        if name in _INT_FIELDS:
            return int(value)
        if name in _FLOAT_FIELDS:
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise CliError(f"config key {name!r}: {exc}") from exc


def load_run_config(path=None, assignments=()) -> RunConfig:
    """Build a RunConfig from a JSON file plus key=value overrides.

    With no path, $PIXATTR_CONFIG is consulted; failing that, defaults apply.
    Unknown keys are an error rather than a warning: a typo in a run config
    must not silently fall back to a default.
    """
    values: dict = {}
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is not None:
        p = pathlib.Path(path)
        if not p.is_file():
            raise CliError(f"config file not found: {p}")
        try:
            values = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise CliError("config root must be a JSON object")
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep:
            raise CliError(f"override {item!r} is not KEY=VALUE")
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError:
            values[key] = raw
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise CliError(f"unknown config keys: {unknown}")
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


# ------------------------------------------------------------------ plumbing


def _paths(cfg: RunConfig, args) -> dict:
    data = pathlib.Path(cfg.data_dir)
    models = pathlib.Path(cfg.model_dir)
    reports = pathlib.Path(cfg.report_dir)
    delta_name = getattr(args, "delta_name", "delta")
    return {
        "train": data / "predict-train",
        "eval": data / "predict-eval",
        "delta": data / delta_name,
        "dagger_out": data / getattr(args, "out_name", "delta-dagger"),
        "predictor": models / "predictor",
        "policy": models / "policy",
        "reports": reports,
    }


def _predictor_loss(kind: AttributeKind):
    # color heads regress [0,1] RGB; everything else classifies its domain
    return ("mse", None) if is_color_kind(kind) else ("ce", None)


def _policy_loss(kind: AttributeKind):
    # color policies emit one clipped-delta distribution per channel
    return ("grouped_ce", 3) if is_color_kind(kind) else ("ce", None)


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _train_spec(cfg: RunConfig, profile, idx: int) -> TrainSpec:
    return TrainSpec(
        epochs=cfg.epochs or profile.default_epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        seed=_derived_seed(cfg.seed, 11, idx),
    )


def _refine_spec(cfg: RunConfig, profile) -> RefineSpec:
    bound = cfg.refine_max_iters
    if bound is None:
        bound = iteration_bound(c=cfg.c, schema=profile.schema) + 4
    return RefineSpec(patience=cfg.refine_patience, max_iters=bound, seed=cfg.seed)


def _split(samples, holdout: float = 0.1):
    cut = max(1, int(len(samples) * (1 - holdout)))
    if cut >= len(samples):
        cut = len(samples) - 1
    if cut < 1:
        raise CliError("need at least 2 samples to split off a validation set")
    return samples[:cut], samples[cut:]


# ------------------------------------------------------------------ commands


def cmd_render(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    samples = gen_prediction_dataset(
        1, schema=profile.schema, jitter=profile.jitter,
        background_mode=profile.background_mode, seed=cfg.seed,
        canvas=profile.canvas, labels=profile.labels,
    )
    out = pathlib.Path(args.out) if args.out else paths["reports"] / "render_demo.ppm"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_image(samples[0].image, out)
    back = read_image(out)
    if back.pixels.tobytes() != samples[0].image.pixels.tobytes():
        raise CliError(f"round-trip mismatch writing {out}")
    print(f"wrote {out} ({back.width}x{back.height})")


def cmd_gen_data(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    common = dict(
        schema=profile.schema, jitter=profile.jitter,
        background_mode=profile.background_mode, subset_size=cfg.subset_size,
        canvas=profile.canvas, labels=profile.labels,
    )
    n_train = cfg.train_samples or profile.train_samples
    n_eval = cfg.eval_samples or profile.eval_samples
    save_dataset(gen_prediction_dataset(n_train, seed=cfg.seed, **common), paths["train"])
    save_dataset(
        gen_prediction_dataset(n_eval, seed=_derived_seed(cfg.seed, 20), **common),
        paths["eval"],
    )
    print(f"wrote {n_train} train samples to {paths['train']}")
    print(f"wrote {n_eval} eval samples to {paths['eval']}")


def cmd_gen_delta_data(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    pairs = gen_delta_dataset(
        cfg.delta_pairs or profile.delta_pairs,
        schema=profile.schema, c=cfg.c, seed=cfg.seed, jitter=profile.jitter,
        canvas=profile.canvas, labels=profile.labels,
        background_modes=(profile.background_mode,),
    )
    save_dataset(pairs, paths["delta"])
    print(f"wrote {len(pairs)} image pairs to {paths['delta']}")


def cmd_train(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    train_ds = load_dataset(paths["train"])
    val_ds = load_dataset(paths["eval"])
    wanted = {AttributeKind(k) for k in cfg.kinds}
    models = {}
    for i, kind in enumerate(KINDS):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 10, i]))
        model = profile.predictor_model(kind, rng)
        if kind in wanted:
            loss, groups = _predictor_loss(kind)
            xt, yt = prediction_arrays(train_ds, kind, profile.input_width,
                                       profile.input_height, dtype=profile.dtype)
            xv, yv = prediction_arrays(val_ds, kind, profile.input_width,
                                       profile.input_height, dtype=profile.dtype)
            history = train(model, (xt, yt), (xv, yv), _train_spec(cfg, profile, i),
                            loss=loss, groups=groups)
            print(f"{kind.value}: {len(history)} epochs, "
                  f"val loss {history[-1].val_loss:.4f}")
        else:
            print(f"{kind.value}: skipped (not in 'kinds'), left at random init")
        models[kind] = model
    bundle = PredictorBundle(
        models, input_height=profile.input_height, input_width=profile.input_width,
        perturbation=PerturbationSpec(k=cfg.ensemble_k, t=cfg.ensemble_t, seed=cfg.seed),
        clip_threshold=cfg.clip_threshold,
    )
    save_bundle(bundle, paths["predictor"])
    print(f"saved predictor bundle to {paths['predictor']}")


def cmd_train_policy(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    pairs = load_dataset(paths["delta"])
    train_pairs, val_pairs = _split(pairs)
    source = None
    if not args.no_transfer and (paths["predictor"] / "bundle.json").is_file():
        source = load_bundle(paths["predictor"], dtype=profile.dtype)
        print(f"warm-starting encoders from {paths['predictor']}")
    wanted = {AttributeKind(k) for k in cfg.kinds}
    models = {}
    for i, kind in enumerate(KINDS):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 12, i]))
        model = profile.policy_model(kind, rng, c=cfg.c)
        if source is not None:
            transfer_encoder_weights(model, source.models[kind])
        if kind in wanted:
            loss, groups = _policy_loss(kind)
            xt, yt = delta_arrays(train_pairs, kind, profile.input_width,
                                  profile.input_height, dtype=profile.dtype)
            xv, yv = delta_arrays(val_pairs, kind, profile.input_width,
                                  profile.input_height, dtype=profile.dtype)
            history = train(model, (xt, yt), (xv, yv), _train_spec(cfg, profile, i),
                            loss=loss, groups=groups)
            print(f"{kind.value}: {len(history)} epochs, "
                  f"val loss {history[-1].val_loss:.4f}")
        else:
            print(f"{kind.value}: skipped (not in 'kinds'), left at warm start")
        models[kind] = model
    bundle = PolicyBundle(models, input_height=profile.input_height,
                          input_width=profile.input_width, c=cfg.c)
    save_policy_bundle(bundle, paths["policy"])
    print(f"saved policy bundle to {paths['policy']}")


def cmd_dagger(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    pairs = load_dataset(paths["delta"])
    policies = load_policy_bundle(paths["policy"], dtype=profile.dtype)
    predictors = None
    if (paths["predictor"] / "bundle.json").is_file():
        predictors = load_bundle(paths["predictor"], dtype=profile.dtype)
    grown = dagger_augment(
        RefinementModels(policies, predictors), pairs,
        rounds=cfg.dagger_rounds, per_round=cfg.dagger_per_round,
        seed=cfg.seed, refine_spec=_refine_spec(cfg, profile),
    )
    save_dataset(grown, paths["dagger_out"])
    print(f"grew {len(pairs)} pairs to {len(grown)}; wrote {paths['dagger_out']}")


def cmd_infer(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    bundle = load_bundle(paths["predictor"], dtype=profile.dtype)
    samples = load_dataset(paths["eval"])
    out = paths["reports"] / "predictions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    lines, failures = [], 0
    for i, sample in enumerate(samples):
        result = predict_config(bundle, sample.image)
        failures += bool(result.failures)
        lines.append(json.dumps({
            "index": i,
            "config": result.config.to_record(),
            "failures": result.failures,
        }, sort_keys=True))
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(samples)} predictions to {out} "
          f"({failures} with per-attribute failures)")


def cmd_eval(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    result = run_experiment("ablation", {
        "dataset": load_dataset(paths["eval"]),
        "predictor": load_bundle(paths["predictor"], dtype=profile.dtype),
    })
    out = paths["reports"] / "ablation.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_reports(result, out)
    print(result.table())
    print(f"\nwrote {out}")


def cmd_refine(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    result = run_experiment("refinement", {
        "dataset": load_dataset(paths["eval"]),
        "predictor": load_bundle(paths["predictor"], dtype=profile.dtype),
        "policies": load_policy_bundle(paths["policy"], dtype=profile.dtype),
        "refine_spec": _refine_spec(cfg, profile),
        "schema": profile.schema,
        "seed": cfg.seed,
    })
    out = paths["reports"] / "refinement.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_reports(result, out)
    print(result.table())
    print(f"\nwrote {out}")


def cmd_baselines(cfg: RunConfig, args, paths) -> None:
    profile = get_profile(cfg.profile)
    exp = {
        "dataset": load_dataset(paths["eval"]),
        "policies": load_policy_bundle(paths["policy"], dtype=profile.dtype),
        "refine_spec": _refine_spec(cfg, profile),
        "metrics": cfg.metrics,
        "schema": profile.schema,
        "seed": cfg.seed,
    }
    if (paths["predictor"] / "bundle.json").is_file():
        exp["predictor"] = load_bundle(paths["predictor"], dtype=profile.dtype)
    result = run_experiment("baselines", exp)
    out = paths["reports"] / "baselines.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_reports(result, out)
    print(result.table())
    print(f"\nwrote {out}")


def cmd_report(cfg: RunConfig, args, paths) -> None:
    targets = [pathlib.Path(p) for p in args.paths]
    if not targets:
        targets = sorted(paths["reports"].glob("*.jsonl"))
    if not targets:
        raise CliError(f"no report files under {paths['reports']}")
    for target in targets:
        if not target.is_file():
            raise CliError(f"no such report file: {target}")
        records = load_reports(target)
        print(f"== {target}")
        for rec in records:
            if "counts" not in rec:
                continue
            label = rec.get("row", "?")
            report = EvalReport.from_record(rec)
            print(f"[{rec.get('experiment', 'report')} / {label}] "
                  f"checksum {report.checksum()[:12]}")
            print(report.table())
            print()


_COMMANDS = {
    "render": cmd_render,
    "gen-data": cmd_gen_data,
    "gen-delta-data": cmd_gen_delta_data,
    "train": cmd_train,
    "train-policy": cmd_train_policy,
    "dagger": cmd_dagger,
    "infer": cmd_infer,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "baselines": cmd_baselines,
    "report": cmd_report,
}

# Input artifacts each command needs on disk before it starts, and the
# outputs it will (over)write.  Used for the --dry-run plan and for failing
# early with every missing path named at once.
_PLANS = {
    "render": ((), ("reports",)),
    "gen-data": ((), ("train", "eval")),
    "gen-delta-data": ((), ("delta",)),
    "train": (("train", "eval"), ("predictor",)),
    "train-policy": (("delta",), ("policy",)),
    "dagger": (("delta", "policy"), ("dagger_out",)),
    "infer": (("predictor", "eval"), ("reports",)),
    "eval": (("predictor", "eval"), ("reports",)),
    "refine": (("predictor", "policy", "eval"), ("reports",)),
    "baselines": (("policy", "eval"), ("reports",)),
    "report": ((), ()),
}


def _check_inputs(command: str, paths: dict) -> list:
    reads, _ = _PLANS[command]
    return [str(paths[name]) for name in reads if not paths[name].exists()]


def _print_plan(command: str, cfg: RunConfig, paths: dict, missing: list) -> None:
    reads, writes = _PLANS[command]
    print(f"plan: {command} (profile={cfg.profile}, seed={cfg.seed})")
    for name in reads:
        mark = "MISSING " if str(paths[name]) in missing else ""
        print(f"  reads  {mark}{paths[name]}")
    for name in writes:
        print(f"  writes {paths[name]}")
    for field in dataclasses.fields(cfg):
        print(f"  {field.name} = {getattr(cfg, field.name)!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixattr",
        description="Infer button attribute configurations from rendered images.",
    )
    parser.add_argument("--config", default=None,
                        help=f"run config JSON (default: ${ENV_CONFIG})")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override one config key (repeatable)")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved plan and exit without side effects")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker-count cap (the pipeline currently runs "
                             "single-process, so this is an upper bound)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "render": "render one seeded demo component to a PPM file",
        "gen-data": "generate the train and eval prediction corpora",
        "gen-delta-data": "generate the image-pair corpus with difference labels",
        "train": "fit one prediction network per attribute",
        "train-policy": "fit the pairwise comparison networks",
        "dagger": "grow the pair corpus with refinement-visited states",
        "infer": "predict configurations for the eval corpus",
        "refine": "evaluate prediction accuracy before and after refinement",
        "eval": "evaluate predictor accuracy across padding variants",
        "baselines": "compare learned-cost refinement with pixel-space costs",
        "report": "pretty-print saved report files",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        if name == "render":
            p.add_argument("--out", default=None, help="output PPM path")
        if name in ("train-policy", "dagger"):
            p.add_argument("--delta-name", default="delta",
                           help="pair-corpus subdirectory under data_dir")
        if name == "dagger":
            p.add_argument("--out-name", default="delta-dagger",
                           help="output subdirectory under data_dir")
        if name == "train-policy":
            p.add_argument("--no-transfer", action="store_true",
                           help="skip warm-starting encoders from the predictor")
        if name == "report":
            p.add_argument("paths", nargs="*", help="report files (default: all)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        if args.jobs < 1:
            raise CliError("--jobs must be at least 1")
        cfg = load_run_config(args.config, args.set)
        paths = _paths(cfg, args)
        missing = _check_inputs(args.command, paths)
        if args.dry_run:
            _print_plan(args.command, cfg, paths, missing)
            return 0
        if missing:
            raise CliError(f"missing inputs for {args.command}: {missing}")
        _COMMANDS[args.command](cfg, args, paths)
        return 0
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
