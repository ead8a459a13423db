"""Accuracy reports, baseline image metrics, and the experiment grid.

Accuracy is judged per attribute through the perceivable-difference classes:
a prediction counts as correct ("=") when a person could not tell it from the
truth.  The overall number is the macro-average of the per-attribute rates,
so rare-but-hard attributes are not drowned out by easy ones.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import pathlib

import numpy as np

from .image import Image, translate_to_center, write_image
from .predictor import predict_config
from .refine import (
    RandomProposalPolicy,
    RefineSpec,
    refine_loop,
    random_refinable_init,
)
from .render import RenderContext
from .schema import (
    KINDS,
    AttributeConfig,
    AttributeKind,
    PerceivableClass,
    domain_values,
    perceivable_class,
)

CLASS_NAMES = ("same", "similar", "different")


class EvalError(Exception):
    """Bad inputs to a metric or a misconfigured experiment."""


@dataclasses.dataclass
class EvalReport:
    """Per-attribute perceivable-difference counts over one evaluation set."""

    counts: dict  # AttributeKind -> {"same": int, "similar": int, "different": int}
    metadata: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if set(self.counts) != set(KINDS):
            raise EvalError("report must cover every attribute")
        sizes = {sum(row.values()) for row in self.counts.values()}
        if len(sizes) != 1:
            raise EvalError(f"per-attribute counts disagree on the eval size: {sizes}")

    @property
    def size(self) -> int:
        return sum(next(iter(self.counts.values())).values())

    def rate(self, kind) -> float:
        row = self.counts[kind]
        total = sum(row.values())
        return row["same"] / total if total else 0.0

    @property
    def overall(self) -> float:
        return float(np.mean([self.rate(kind) for kind in KINDS]))

    def to_record(self) -> dict:
        return {
            "counts": {kind.value: dict(self.counts[kind]) for kind in KINDS},
            "overall": self.overall,
            "metadata": self.metadata,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvalReport":
        counts = {
            kind: {name: int(rec["counts"][kind.value][name]) for name in CLASS_NAMES}
            for kind in KINDS
        }
        return cls(counts, metadata=rec.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def table(self) -> str:
        header = f"{'attribute':<14} {'same':>6} {'similar':>8} {'different':>10} {'=rate':>8}"
        lines = [header, "-" * len(header)]
        for kind in KINDS:
            row = self.counts[kind]
            lines.append(
                f"{kind.value:<14} {row['same']:>6} {row['similar']:>8} "
                f"{row['different']:>10} {self.rate(kind):>7.1%}"
            )
        lines.append("-" * len(header))
        lines.append(f"{'overall (macro)':<14}{'':>26} {self.overall:>11.1%}")
        return "\n".join(lines)


def accuracy(predictions, labels, metadata=None) -> EvalReport:
    """Score predicted configurations against ground truth, attribute by attribute."""
    if len(predictions) != len(labels):
        raise EvalError(
            f"got {len(predictions)} predictions for {len(labels)} labels"
        )
    counts = {kind: {name: 0 for name in CLASS_NAMES} for kind in KINDS}
    for pred, truth in zip(predictions, labels):
        for kind in KINDS:
            cls = perceivable_class(kind, pred.get(kind), truth.get(kind))
            counts[kind][CLASS_NAMES[int(cls)]] += 1
    return EvalReport(counts, metadata=metadata or {})


# ------------------------------------------------------------------ metrics


def _pair_arrays(a: Image, b: Image) -> tuple[np.ndarray, np.ndarray]:
    if (a.width, a.height) != (b.width, b.height):
        raise EvalError(
            f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return a.pixels.astype(np.float64), b.pixels.astype(np.float64)


def pixel_similarity(a: Image, b: Image) -> float:
    """Mean squared error over channels normalized to [0, 1]."""
    fa, fb = _pair_arrays(a, b)
    return float(np.mean(((fa - fb) / 255.0) ** 2))


_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2
_WIN = 8


def structural_similarity(a: Image, b: Image) -> float:
    """Mean SSIM over non-overlapping 8x8 windows and the three channels."""
    fa, fb = _pair_arrays(a, b)
    nh, nw = fa.shape[0] // _WIN, fa.shape[1] // _WIN
    if nh == 0 or nw == 0:
        raise EvalError(f"images must provide at least one {_WIN}x{_WIN} window")

    def windows(x):
        x = x[: nh * _WIN, : nw * _WIN]
        x = x.reshape(nh, _WIN, nw, _WIN, 3)
        return x.transpose(0, 2, 4, 1, 3).reshape(nh * nw, 3, _WIN * _WIN)

    wa, wb = windows(fa), windows(fb)
    mu_a, mu_b = wa.mean(axis=2), wb.mean(axis=2)
    var_a = wa.var(axis=2)
    var_b = wb.var(axis=2)
    cov = (wa * wb).mean(axis=2) - mu_a * mu_b
    ssim = ((2 * mu_a * mu_b + _SSIM_C1) * (2 * cov + _SSIM_C2)) / (
        (mu_a**2 + mu_b**2 + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    )
    return float(ssim.mean())


def structural_cost(a: Image, b: Image) -> float:
    return 1.0 - structural_similarity(a, b)


def wasserstein_distance(a: Image, b: Image) -> float:
    """Mean over channels of the 1-D earth-mover distance between intensity
    histograms, computed as the absolute area between the two CDFs."""
    _pair_arrays(a, b)
    total = 0.0
    for ch in range(3):
        ha = np.bincount(a.pixels[..., ch].ravel(), minlength=256) / a.pixels[..., ch].size
        hb = np.bincount(b.pixels[..., ch].ravel(), minlength=256) / b.pixels[..., ch].size
        total += float(np.abs(np.cumsum(ha) - np.cumsum(hb)).sum())
    return total / 3.0


BASELINE_METRICS = {
    "pixel": pixel_similarity,
    "structural": structural_cost,
    "wasserstein": wasserstein_distance,
}


def baseline_cost(metric_name: str, ctx: RenderContext, true_width: int,
                  true_height: int):
    """Image-pair cost for baseline refinement, with component centering.

    Both images are shifted so their component lands mid-canvas before the
    metric runs: the original by its known placement and true size, the
    candidate by its own configuration.  Centering uses the generator's
    placement data, keeping detector noise out of the comparison.
    """
    try:
        metric = BASELINE_METRICS[metric_name]
    except KeyError:
        raise EvalError(
            f"unknown baseline metric {metric_name!r}; pick from {sorted(BASELINE_METRICS)}"
        ) from None

    def fn(original, state) -> float:
        img = original if isinstance(original, Image) else original.image()
        centered_orig = translate_to_center(img, ctx.x_pos, ctx.y_pos, true_width, true_height)
        cfg = state.config
        centered_cand = translate_to_center(
            state.image(), ctx.x_pos, ctx.y_pos, cfg.width, cfg.height
        )
        return metric(centered_orig, centered_cand)

    return fn


# ------------------------------------------------------------------ experiments


@dataclasses.dataclass
class ExperimentResult:
    name: str
    rows: list  # (label, EvalReport) pairs

    def report(self, label: str) -> EvalReport:
        for row_label, rep in self.rows:
            if row_label == label:
                return rep
        raise EvalError(f"experiment {self.name!r} has no row {label!r}")

    def to_records(self) -> list[dict]:
        return [
            {"experiment": self.name, "row": label, **rep.to_record()}
            for label, rep in self.rows
        ]

    def table(self) -> str:
        width = max(len(label) for label, _ in self.rows) + 2
        lines = [f"experiment: {self.name}", f"{'variant':<{width}} {'overall':>8}"]
        for label, rep in self.rows:
            lines.append(f"{label:<{width}} {rep.overall:>7.1%}")
        per_variant = [f"\n[{label}]\n{rep.table()}" for label, rep in self.rows]
        return "\n".join(lines) + "\n" + "\n".join(per_variant)


def _require(cfg: dict, keys, name: str):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise EvalError(f"experiment {name!r} is missing artifacts: {missing}")


def _eval_predictions(bundle, samples) -> list[AttributeConfig]:
    return [predict_config(bundle, s.image).config for s in samples]


def run_ablation(cfg: dict) -> ExperimentResult:
    """Prediction accuracy across preprocessing variants of one trained bundle."""
    _require(cfg, ("dataset", "predictor"), "ablation")
    samples = cfg["dataset"]
    base = cfg["predictor"]
    variants = cfg.get("variants") or [
        {"name": "pad-edge", "pad_mode": "edge"},
        {"name": "pad-none", "pad_mode": "zero"},
    ]
    truths = [s.label for s in samples]
    rows = []
    for variant in variants:
        overrides = {k: v for k, v in variant.items() if k != "name"}
        if "k" in overrides or "t" in overrides:
            pert = dataclasses.replace(
                base.perturbation,
                k=overrides.pop("k", base.perturbation.k),
                t=overrides.pop("t", base.perturbation.t),
            )
            overrides["perturbation"] = pert
        bundle = dataclasses.replace(base, **overrides) if overrides else base
        report = accuracy(
            _eval_predictions(bundle, samples), truths,
            metadata={"experiment": "ablation", "variant": variant["name"]},
        )
        rows.append((variant["name"], report))
    return ExperimentResult("ablation", rows)


def _random_start(label, ctx, rng, refinable, schema):
    # Re-sampled dimensions must still fit the canvas at the sample's
    # position, otherwise the start state itself cannot be rendered.
    for _ in range(100):
        start = random_refinable_init(label, rng, refinable=refinable, schema=schema)
        if (
            ctx.x_pos + start.width <= ctx.canvas_width
            and ctx.y_pos + start.height <= ctx.canvas_height
        ):
            return start
    raise EvalError(
        "could not draw a random start that fits the canvas; "
        "check the schema dimension pools against the render context"
    )


def _fit_to_canvas(config: AttributeConfig, ctx, schema=None) -> AttributeConfig:
    """Snap oversized dimensions down to the largest value that still renders.

    A predicted width or height can exceed what fits at the sample's position;
    such a config cannot even be drawn, so it cannot start a refinement run.
    """
    out = config
    spans = (
        (AttributeKind.WIDTH, ctx.canvas_width - ctx.x_pos),
        (AttributeKind.HEIGHT, ctx.canvas_height - ctx.y_pos),
    )
    for kind, span in spans:
        if out.get(kind) <= span:
            continue
        pool = (schema or {}).get(kind) or domain_values(kind)
        fitting = [v for v in pool if v <= span]
        if not fitting:
            raise EvalError(
                f"no {kind.value} value fits a {span}px span at this position"
            )
        out = out.with_value(kind, max(fitting))
    return out


def _start_config(sample, cfg, rng):
    if cfg.get("init", "predicted") != "random":
        predicted = predict_config(cfg["predictor"], sample.image).config
        return _fit_to_canvas(predicted, sample.ctx, cfg.get("schema"))
    return _random_start(
        sample.label, sample.ctx, rng,
        cfg.get("refine_spec", RefineSpec()).refinable, cfg.get("schema"),
    )


def run_refinement(cfg: dict) -> ExperimentResult:
    """Accuracy before and after learned-cost refinement."""
    _require(cfg, ("dataset", "predictor", "policies"), "refinement")
    samples = cfg["dataset"]
    spec = cfg.get("refine_spec", RefineSpec())
    rng = np.random.default_rng(np.random.SeedSequence([cfg.get("seed", 0), 40]))
    starts, finals = [], []
    for i, sample in enumerate(samples):
        y0 = _start_config(sample, cfg, rng)
        run_spec = dataclasses.replace(spec, seed=cfg.get("seed", 0) * 100003 + i)
        final, _ = refine_loop(
            cfg["policies"], cfg["predictor"], sample.image, y0, sample.ctx, run_spec
        )
        starts.append(y0)
        finals.append(final)
    truths = [s.label for s in samples]
    meta = {"experiment": "refinement", "init": cfg.get("init", "predicted")}
    before = accuracy(starts, truths, metadata={**meta, "stage": "initial"})
    after = accuracy(finals, truths, metadata={**meta, "stage": "refined"})
    after.metadata["delta_overall"] = after.overall - before.overall
    return ExperimentResult("refinement", [("initial", before), ("refined", after)])


def run_baselines(cfg: dict) -> ExperimentResult:
    """Refinement with the learned cost against the pixel-space costs.

    Every variant starts from the same randomized configurations, so the rows
    differ only in the similarity signal steering the loop.
    """
    _require(cfg, ("dataset", "policies"), "baselines")
    samples = cfg["dataset"]
    spec = cfg.get("refine_spec", RefineSpec(max_iters=100))
    metrics = cfg.get("metrics", ("pixel", "structural", "wasserstein"))
    rng = np.random.default_rng(np.random.SeedSequence([cfg.get("seed", 0), 41]))
    starts = [
        _random_start(s.label, s.ctx, rng, spec.refinable, cfg.get("schema"))
        for s in samples
    ]
    truths = [s.label for s in samples]
    rows = [("start", accuracy(starts, truths, metadata={"stage": "start"}))]

    def refine_all(policy_for, predictor):
        finals = []
        for i, (sample, y0) in enumerate(zip(samples, starts)):
            run_spec = dataclasses.replace(spec, seed=cfg.get("seed", 0) * 100003 + i)
            policy = policy_for(sample)
            final, _ = refine_loop(
                policy, predictor, sample.image, y0, sample.ctx, run_spec
            )
            finals.append(final)
        return finals

    learned = refine_all(lambda s: cfg["policies"], cfg.get("predictor"))
    rows.append(
        ("learned", accuracy(learned, truths, metadata={"cost": "learned"}))
    )
    for name in metrics:
        finals = refine_all(
            lambda s, name=name: RandomProposalPolicy(
                baseline_cost(name, s.ctx, s.label.width, s.label.height)
            ),
            None,
        )
        rows.append((name, accuracy(finals, truths, metadata={"cost": name})))
    return ExperimentResult("baselines", rows)


_EXPERIMENTS = {
    "ablation": run_ablation,
    "refinement": run_refinement,
    "baselines": run_baselines,
}


def run_experiment(name: str, cfg: dict) -> ExperimentResult:
    try:
        runner = _EXPERIMENTS[name]
    except KeyError:
        raise EvalError(
            f"unknown experiment {name!r}; pick from {sorted(_EXPERIMENTS)}"
        ) from None
    return runner(cfg)


# ------------------------------------------------------------------ output


def write_reports(results, path) -> None:
    """Line-delimited experiment records, one JSON object per row."""
    if isinstance(results, ExperimentResult):
        results = [results]
    lines = []
    for result in results:
        lines.extend(json.dumps(rec, sort_keys=True) for rec in result.to_records())
    pathlib.Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_reports(path) -> list[dict]:
    out = []
    for line in pathlib.Path(path).read_text().splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def write_contact_sheet(rows, path, gutter: int = 2) -> None:
    """Grid of images as one PPM: one row per sample, one column per stage."""
    if not rows or not all(rows):
        raise EvalError("contact sheet needs at least one image per row")
    cell_w = max(img.width for row in rows for img in row)
    cell_h = max(img.height for row in rows for img in row)
    cols = max(len(row) for row in rows)
    sheet_w = cols * cell_w + (cols + 1) * gutter
    sheet_h = len(rows) * cell_h + (len(rows) + 1) * gutter
    buf = np.full((sheet_h, sheet_w, 3), 255, dtype=np.uint8)
    for r, row in enumerate(rows):
        for c, img in enumerate(row):
            y = gutter + r * (cell_h + gutter)
            x = gutter + c * (cell_w + gutter)
            buf[y : y + img.height, x : x + img.width] = img.pixels
    write_image(Image(sheet_w, sheet_h, buf), path)
