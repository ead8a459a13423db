"""Iterative attribute refinement.

Given an original image and a starting configuration, the loop repeatedly
picks a likely-wrong attribute, proposes a value change, renders the
candidate, and keeps it only when the attribute-space cost drops (with one
exception: changes whose sampled magnitude saturates the clip bound are
applied unconditionally, since they claim "at least c away" and must be able
to march across large gaps in several hops).

Policies are duck-typed.  A learned PolicyBundle answers from per-attribute
siamese networks; OraclePolicy answers from the ground-truth configuration
and never touches pixels (candidate images are lazy, so oracle runs skip
rendering entirely); RandomProposalPolicy turns any image-pair cost function
into a policy with uniform proposals, which is how the pixel-metric baselines
ride the same loop.
"""

from __future__ import annotations

import dataclasses
import json
import math
import pathlib

import numpy as np

from .image import Image, pad_image
from .net.checkpoint import load_checkpoint, save_checkpoint
from .net.model import model_dtype
from .render import GeometryError, RenderContext, render
from .schema import (
    COMPARABLE_KINDS,
    KINDS,
    AttributeConfig,
    AttributeKind,
    PerceivableClass,
    domain_values,
    is_color_kind,
    is_comparable,
    perceivable_class,
    sample_value,
    validate,
)

DEFAULT_CLIP = 5
DEFAULT_REFINABLE = frozenset(
    {
        AttributeKind.TEXT_SIZE,
        AttributeKind.TEXT_GRAVITY,
        AttributeKind.TEXT_FONT,
        AttributeKind.SHADOW,
        AttributeKind.WIDTH,
        AttributeKind.HEIGHT,
    }
)

# numeric pixel-valued kinds eligible for the equal-value probe
_NUMERIC_KINDS = tuple(k for k in COMPARABLE_KINDS if not is_color_kind(k))


class RefineError(Exception):
    """Misuse of the refinement interfaces."""


def delta_values(c: int) -> list[int]:
    return list(range(-c, c + 1))


@dataclasses.dataclass
class RenderedState:
    """A configuration plus its lazily rendered image.

    Policies that work in attribute space read `.config` and never force the
    render; image-based policies call `.image()` and pay for rasterization
    once.
    """

    config: AttributeConfig
    image_fn: object = None
    _image: Image = None

    def image(self) -> Image:
        if self._image is None:
            if self.image_fn is None:
                raise RefineError("state has neither an image nor a way to render one")
            self._image = self.image_fn()
        return self._image


def _state_image(state) -> Image:
    return state.image() if isinstance(state, RenderedState) else state


def _state_config(state) -> AttributeConfig:
    if isinstance(state, RenderedState):
        return state.config
    raise RefineError("this policy needs the candidate's configuration, not raw pixels")


@dataclasses.dataclass(frozen=True)
class RefineSpec:
    """Loop controls: stopping rules, the adjustable attribute subset, seed."""

    patience: int = 4
    max_iters: int = 8
    same_value_heuristic: bool = False
    refinable: frozenset = DEFAULT_REFINABLE
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        extra = set(self.refinable) - set(KINDS)
        if extra or not self.refinable:
            raise ValueError(f"bad refinable subset {self.refinable!r}")


@dataclasses.dataclass
class TrajectoryStep:
    iteration: int
    kind: AttributeKind
    proposed_value: object
    delta: object  # int for scalars, tuple for colors, None for uncomparable
    cost_before: float
    cost_after: float
    accepted: bool
    note: str = ""
    config_after: AttributeConfig = None

    def to_record(self) -> dict:
        value = self.proposed_value
        if isinstance(value, tuple):
            value = list(value)
        elif value == math.inf:
            value = "inf"
        return {
            "iteration": self.iteration,
            "kind": self.kind.value,
            "proposed_value": value,
            "delta": list(self.delta) if isinstance(self.delta, tuple) else self.delta,
            "cost_before": self.cost_before,
            "cost_after": self.cost_after,
            "accepted": self.accepted,
            "note": self.note,
        }


@dataclasses.dataclass
class Proposal:
    kind: AttributeKind
    value: object
    delta: object
    noop: bool = False


@dataclasses.dataclass
class Decision:
    config: AttributeConfig
    accepted: bool
    cost_before: float
    cost_after: float
    note: str = ""


class PolicyBundle:
    """One trained pairwise-comparison network per attribute.

    Each network maps (original, candidate render) to a distribution over the
    clipped value difference: 2c+1 classes for comparable scalars, three
    channel groups of 2c+1 for colors, and equal/unequal for font and gravity.
    """

    def __init__(self, models: dict, input_height: int, input_width: int,
                 c: int = DEFAULT_CLIP, pad_mode: str = "edge"):
        if set(models) != set(KINDS):
            missing = sorted(k.value for k in set(KINDS) - set(models))
            raise ValueError(f"policy bundle must cover every attribute; missing {missing}")
        if c < 1:
            raise ValueError("clip bound must be >= 1")
        self.models = models
        self.input_height = input_height
        self.input_width = input_width
        self.c = c
        self.pad_mode = pad_mode
        self._cache: dict = {}
        self._emb_cache: tuple = (None, None)

    def _prepare(self, image: Image) -> np.ndarray:
        padded = pad_image(image, self.input_width, self.input_height, mode=self.pad_mode)
        dtype = model_dtype(next(iter(self.models.values())))
        return padded.to_float_chw(dtype)[None]

    def _original_embeddings(self, original) -> dict:
        # The target image is fixed for a whole refinement run, so its tower
        # pass is paid once per model and reused for every candidate.
        cached_ref, cached = self._emb_cache
        if cached_ref is original:
            return cached
        xa = self._prepare(_state_image(original) if isinstance(original, RenderedState) else original)
        embs = {kind: model.embed(xa, train=False) for kind, model in self.models.items()}
        self._emb_cache = (original, embs)
        return embs

    def _pair_outputs(self, original, state) -> dict:
        key = (id(original), id(state))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is original and hit[1] is state:
            return hit[2]
        ha = self._original_embeddings(original)
        xb = self._prepare(_state_image(state))
        outs = {}
        for kind, model in self.models.items():
            hr = model.embed(xb, train=False)
            outs[kind] = model.forward_from_embeddings(ha[kind], hr, train=False)[0]
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = (original, state, outs)
        return outs

    def zero_probabilities(self, original, state) -> dict:
        outs = self._pair_outputs(original, state)
        zero = {}
        for kind, out in outs.items():
            if is_color_kind(kind):
                per_channel = out.reshape(3, 2 * self.c + 1)
                zero[kind] = float(np.prod(per_channel[:, self.c]))
            elif is_comparable(kind):
                zero[kind] = float(out[self.c])
            else:
                zero[kind] = float(out[0])
        return zero

    def delta_distribution(self, kind: AttributeKind, original, state) -> np.ndarray:
        out = self._pair_outputs(original, state)[kind]
        if is_color_kind(kind):
            return out.reshape(3, 2 * self.c + 1)
        return out

    def cost(self, original, state) -> float:
        product = 1.0
        for p in self.zero_probabilities(original, state).values():
            product *= p
        return 1.0 - product


def cost(policies, original, rendered) -> float:
    """Attribute-space distance between an original and a rendered candidate."""
    return policies.cost(original, rendered)


def _finite_radius_max() -> int:
    return max(v for v in domain_values(AttributeKind.BORDER_RADIUS) if v != math.inf)


def steps_to_cover(kind: AttributeKind, c: int = DEFAULT_CLIP, pool=None) -> int:
    """Worst-case accepted changes to cross the kind's whole domain."""
    if not is_comparable(kind):
        return 1
    if is_color_kind(kind):
        return math.ceil(255 / c)
    values = list(pool) if pool is not None else domain_values(kind)
    finite = [v for v in values if v != math.inf]
    steps = math.ceil((max(finite) - min(finite)) / c)
    if math.inf in values:
        steps += 1  # the final hop onto the pill value
    return steps


def iteration_bound(refinable=DEFAULT_REFINABLE, c: int = DEFAULT_CLIP, schema=None) -> int:
    """Accepted-step budget for exact-oracle refinement over a kind subset."""
    total = 0
    for kind in refinable:
        pool = schema.get(kind) if schema else None
        total += steps_to_cover(kind, c, pool)
    return total


def _distance_steps(kind: AttributeKind, a, b, c: int) -> int:
    """How many clipped moves separate two values of one attribute."""
    if a == b:
        return 0
    if not is_comparable(kind):
        return 1
    if is_color_kind(kind):
        return max(math.ceil(abs(x - y) / c) for x, y in zip(a, b))
    if a == math.inf or b == math.inf:
        finite = a if b == math.inf else b
        return math.ceil((_finite_radius_max() - finite) / c) + 1 if finite != math.inf else 0
    return math.ceil(abs(a - b) / c)


class OraclePolicy:
    """Ground-truth policy: exact clipped deltas and an attribute-space cost.

    The graded cost counts, over the refinable subset, how many clipped moves
    remain until every attribute matches (normalized to [0, 1]), so each
    useful accepted change strictly improves it.  binary=True switches to the
    coarse any-perceivable-difference indicator.
    """

    def __init__(self, target: AttributeConfig, c: int = DEFAULT_CLIP,
                 refinable=DEFAULT_REFINABLE, binary: bool = False):
        self.target = target
        self.c = c
        self.refinable = frozenset(refinable)
        self.binary = binary
        self._norm = sum(steps_to_cover(k, c) for k in self.refinable)

    def zero_probabilities(self, original, state) -> dict:
        current = _state_config(state)
        return {
            kind: 1.0 if current.get(kind) == self.target.get(kind) else 0.0
            for kind in KINDS
        }

    def delta_distribution(self, kind: AttributeKind, original, state) -> np.ndarray:
        current = _state_config(state)
        n = 2 * self.c + 1
        if is_color_kind(kind):
            out = np.zeros((3, n))
            for ch, (t, v) in enumerate(zip(self.target.get(kind), current.get(kind))):
                out[ch, int(np.clip(t - v, -self.c, self.c)) + self.c] = 1.0
            return out
        if not is_comparable(kind):
            out = np.zeros(2)
            out[0 if current.get(kind) == self.target.get(kind) else 1] = 1.0
            return out
        t, v = self.target.get(kind), current.get(kind)
        if t == v:
            delta = 0
        elif t == math.inf:
            delta = self.c
        elif v == math.inf:
            delta = -self.c
        else:
            delta = int(np.clip(t - v, -self.c, self.c))
        out = np.zeros(n)
        out[delta + self.c] = 1.0
        return out

    def cost(self, original, state) -> float:
        current = _state_config(state)
        if self.binary:
            for kind in self.refinable:
                cls = perceivable_class(kind, current.get(kind), self.target.get(kind))
                if cls != PerceivableClass.SAME:
                    return 1.0
            return 0.0
        remaining = sum(
            _distance_steps(kind, current.get(kind), self.target.get(kind), self.c)
            for kind in self.refinable
        )
        return remaining / self._norm


class OraclePredictor:
    """Ground-truth stand-in for the prediction networks (categorical kinds)."""

    def __init__(self, target: AttributeConfig):
        self.target = target

    def distribution(self, kind: AttributeKind, image) -> tuple:
        values = domain_values(kind)
        probs = np.zeros(len(values))
        probs[values.index(self.target.get(kind))] = 1.0
        return list(values), probs


class RandomProposalPolicy:
    """Uniform selection and proposals around a pluggable image-pair cost.

    This is the harness for pixel-space baseline costs, which carry no
    per-attribute signal: every refinable attribute looks equally suspicious
    and every legal move is equally likely.
    """

    def __init__(self, cost_fn, c: int = DEFAULT_CLIP):
        self.cost_fn = cost_fn
        self.c = c

    def zero_probabilities(self, original, state) -> dict:
        return {kind: 0.5 for kind in KINDS}

    def delta_distribution(self, kind: AttributeKind, original, state) -> np.ndarray:
        n = 2 * self.c + 1
        if is_color_kind(kind):
            return np.full((3, n), 1.0 / n)
        return np.full(n, 1.0 / n)

    def cost(self, original, state) -> float:
        return float(self.cost_fn(original, state))


def select_attribute(policies, original, rendered, rng, refinable=DEFAULT_REFINABLE):
    """Sample which attribute to adjust, weighted by 1 - P(no change needed).

    Returns None when every refinable attribute is judged already correct,
    which is the loop's convergence signal.
    """
    zero = policies.zero_probabilities(original, rendered)
    kinds = [k for k in KINDS if k in refinable]
    weights = np.array([1.0 - zero[k] for k in kinds], dtype=np.float64)
    weights = np.clip(weights, 0.0, None)
    total = weights.sum()
    if total <= 0.0:
        return None
    return kinds[int(rng.choice(len(kinds), p=weights / total))]


def apply_delta(kind: AttributeKind, current, delta):
    """Move a comparable value by a signed amount, staying inside the domain.

    Out-of-domain results clamp to the nearest bound; results landing in a
    domain gap snap to the nearest valid value, ties resolved away from the
    current value so a move never silently reverses.  The infinite radius is
    reachable only from the largest finite radius (one extra hop) and steps
    back down to it.
    """
    if is_color_kind(kind):
        return tuple(
            int(np.clip(ch + d, 0, 255)) for ch, d in zip(current, delta)
        )
    if kind == AttributeKind.BORDER_RADIUS:
        top = _finite_radius_max()
        if current == math.inf:
            return top if delta < 0 else math.inf
        moved = current + delta
        if moved > top:
            return math.inf if current == top else top
        return int(max(moved, 0))
    values = domain_values(kind)
    moved = min(max(current + delta, values[0]), values[-1])
    if moved in values:
        return int(moved)
    sign = 1 if delta > 0 else -1
    best = min(values, key=lambda v: (abs(v - moved), -sign * v))
    return int(best)


def _sample_nonzero_delta(dist: np.ndarray, c: int, rng) -> int | None:
    probs = np.asarray(dist, dtype=np.float64).copy()
    probs[c] = 0.0
    total = probs.sum()
    if total <= 0.0:
        return None
    return int(rng.choice(2 * c + 1, p=probs / total)) - c


def _categorical_distribution(predictor_bundle, kind, image):
    if predictor_bundle is None:
        values = domain_values(kind)
        return list(values), np.full(len(values), 1.0 / len(values))
    if hasattr(predictor_bundle, "distribution"):
        return predictor_bundle.distribution(kind, image)
    from .predictor import decode_output, ensemble_predict

    out = ensemble_predict(
        predictor_bundle.models[kind],
        image,
        predictor_bundle.perturbation,
        pad_mode=predictor_bundle.pad_mode,
    )
    _, _, values, probs = decode_output(kind, out)
    return values, probs


def propose_change(policies, predictor_bundle, kind, original, rendered, rng) -> Proposal:
    """Draw a candidate value for one attribute.

    Comparable kinds sample a nonzero clipped delta from the policy and apply
    it; font and gravity sample a different value from the prediction
    network's distribution over the categorical domain.  If domain clamping
    throws the move away we resample once, then admit a no-op.
    """
    current = _state_config(rendered).get(kind)
    if not is_comparable(kind):
        values, probs = _categorical_distribution(predictor_bundle, kind, original)
        probs = np.asarray(probs, dtype=np.float64).copy()
        idx = values.index(current) if current in values else None
        if idx is not None:
            probs[idx] = 0.0
        total = probs.sum()
        if total <= 0.0:
            probs = np.ones(len(values))
            if idx is not None:
                probs[idx] = 0.0
            total = probs.sum()
        choice = int(rng.choice(len(values), p=probs / total))
        return Proposal(kind, values[choice], None)

    dist = policies.delta_distribution(kind, original, rendered)
    c = policies.c
    if is_color_kind(kind):
        for _ in range(2):
            drawn = (_sample_nonzero_delta(dist[ch], c, rng) for ch in range(3))
            delta = tuple(d if d is not None else 0 for d in drawn)
            value = apply_delta(kind, current, delta)
            if value != current:
                return Proposal(kind, value, delta)
        return Proposal(kind, current, (0, 0, 0), noop=True)
    for _ in range(2):
        delta = _sample_nonzero_delta(dist, c, rng)
        if delta is None:
            return Proposal(kind, current, 0, noop=True)
        value = apply_delta(kind, current, delta)
        if value != current:
            return Proposal(kind, value, delta)
    return Proposal(kind, current, 0, noop=True)


def _saturated(delta, c: int) -> bool:
    if delta is None:
        return False
    if isinstance(delta, tuple):
        return max(abs(d) for d in delta) == c
    return abs(delta) == c


def _decide(policies, original, y_current, y_proposed, cand_state: RenderedState,
            delta_magnitude, cost_before: float) -> Decision:
    if y_proposed == y_current:
        return Decision(y_current, False, cost_before, cost_before, note="no-op proposal")
    saturated = delta_magnitude is not None and abs(delta_magnitude) == policies.c
    try:
        cost_after = policies.cost(original, cand_state)
    except GeometryError as exc:
        return Decision(
            y_current, False, cost_before, cost_before,
            note=f"render failed: {exc}",
        )
    if saturated:
        return Decision(y_proposed, True, cost_before, cost_after, note="saturated")
    if cost_after < cost_before:
        return Decision(y_proposed, True, cost_before, cost_after)
    return Decision(y_current, False, cost_before, cost_after)


def accept_or_reject(policies, original, y_current, y_proposed, ctx: RenderContext,
                     delta_magnitude, cost_before: float | None = None) -> Decision:
    """Render the proposal and keep it only if the cost strictly drops.

    A proposal whose sampled magnitude equals the clip bound is accepted
    without the comparison: the policy is claiming "at least this far away",
    and a sequence of such hops is the only way across distances beyond the
    bound.  Geometry failures reject the proposal instead of aborting the
    loop.
    """
    for cfg, name in ((y_current, "current"), (y_proposed, "proposed")):
        problems = validate(cfg)
        if problems:
            raise RefineError(f"{name} config does not validate: {problems}")
    if cost_before is None:
        cur_state = RenderedState(y_current, lambda: render(y_current, ctx))
        cost_before = policies.cost(original, cur_state)
    cand_state = RenderedState(y_proposed, lambda: render(y_proposed, ctx))
    return _decide(
        policies, original, y_current, y_proposed, cand_state,
        delta_magnitude, cost_before,
    )


def _probe_config(config: AttributeConfig, rng) -> AttributeConfig:
    """Nudge one member of an equal-valued numeric pair by one unit.

    Used only while scoring attributes within an iteration, never persisted;
    it breaks the symmetry that makes two identical values (say width ==
    height) look interchangeable to the policy.
    """
    current = {k: config.get(k) for k in _NUMERIC_KINDS}
    pairs = [
        (a, b)
        for i, a in enumerate(_NUMERIC_KINDS)
        for b in _NUMERIC_KINDS[i + 1 :]
        if current[a] == current[b] and current[a] != math.inf
    ]
    if not pairs:
        return config
    a, b = pairs[int(rng.integers(len(pairs)))]
    kind = (a, b)[int(rng.integers(2))]
    offset = 1 if int(rng.integers(2)) else -1
    for candidate in (offset, -offset):
        value = apply_delta(kind, config.get(kind), candidate)
        if value != config.get(kind) and value != math.inf:
            return config.with_value(kind, value)
    return config


def refine_loop(policies, predictor_bundle, original, y0: AttributeConfig,
                ctx: RenderContext, spec: RefineSpec = RefineSpec()):
    """Run select / propose / accept until converged, stalled, or out of turns.

    Returns (best configuration seen by cost, full trajectory).  Candidates
    are rendered at the original's position on a plain white background; the
    policies were trained to tolerate that asymmetry.
    """
    problems = validate(y0)
    if problems:
        raise RefineError(f"starting config does not validate: {problems}")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    white_ctx = dataclasses.replace(ctx, background="white")

    def state_for(cfg: AttributeConfig) -> RenderedState:
        return RenderedState(cfg, lambda cfg=cfg: render(cfg, white_ctx))

    current = y0
    cur_state = state_for(current)
    cur_cost = policies.cost(original, cur_state)
    best_cfg, best_cost = current, cur_cost
    trajectory: list[TrajectoryStep] = []
    stale = 0
    for iteration in range(spec.max_iters):
        select_state = cur_state
        if spec.same_value_heuristic:
            probed = _probe_config(current, rng)
            if probed is not current:
                select_state = state_for(probed)
        kind = select_attribute(policies, original, select_state, rng, spec.refinable)
        if kind is None:
            break
        proposal = propose_change(policies, predictor_bundle, kind, original, cur_state, rng)
        if proposal.noop:
            trajectory.append(
                TrajectoryStep(
                    iteration, kind, proposal.value, proposal.delta,
                    cur_cost, cur_cost, False, note="no-op after resample",
                    config_after=current,
                )
            )
            stale += 1
            if stale >= spec.patience:
                break
            continue
        y_prop = current.with_value(kind, proposal.value)
        magnitude = (
            max(proposal.delta, key=abs)
            if isinstance(proposal.delta, tuple)
            else proposal.delta
        )
        cand_state = state_for(y_prop)
        decision = _decide(
            policies, original, current, y_prop, cand_state, magnitude,
            cost_before=cur_cost,
        )
        if decision.accepted:
            current = decision.config
            cur_state = cand_state
            cur_cost = decision.cost_after
        trajectory.append(
            TrajectoryStep(
                iteration, kind, proposal.value, proposal.delta,
                decision.cost_before, decision.cost_after, decision.accepted,
                note=decision.note, config_after=current,
            )
        )
        if decision.accepted and decision.cost_after < best_cost:
            best_cfg, best_cost = current, decision.cost_after
            stale = 0
        else:
            stale += 1
            if stale >= spec.patience:
                break
    return best_cfg, trajectory


def write_trajectory(trajectory, path) -> None:
    """Line-delimited trajectory log for audits and replay."""
    lines = [json.dumps(step.to_record()) for step in trajectory]
    pathlib.Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


@dataclasses.dataclass
class RefinementModels:
    """The two model groups a refinement run needs."""

    policies: object
    predictors: object = None


def collect_states(policy_models, original, ctx: RenderContext,
                   start_config: AttributeConfig, spec: RefineSpec | None = None,
                   seed: int = 0, target_config: AttributeConfig | None = None):
    """Configurations a refinement run passes through, starting one.

    `policy_models` is either a RefinementModels or a callable mapping the
    (supervision-only) target configuration to one, which is how oracle
    policies get built per sample during data augmentation.
    """
    models = policy_models(target_config) if callable(policy_models) else policy_models
    base = spec if spec is not None else RefineSpec()
    run_spec = dataclasses.replace(base, seed=seed)
    _, trajectory = refine_loop(
        models.policies, models.predictors, original, start_config, ctx, run_spec
    )
    states = [start_config]
    for step in trajectory:
        if step.accepted:
            states.append(step.config_after)
    return states


def random_refinable_init(truth: AttributeConfig, rng, refinable=DEFAULT_REFINABLE,
                          schema=None) -> AttributeConfig:
    """Ground truth with the refinable attributes re-drawn uniformly."""
    cfg = truth
    for kind in KINDS:
        if kind in refinable:
            cfg = cfg.with_value(kind, sample_value(kind, rng, schema))
    return cfg


def save_policy_bundle(bundle: PolicyBundle, directory) -> None:
    root = pathlib.Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "input_height": bundle.input_height,
        "input_width": bundle.input_width,
        "c": bundle.c,
        "pad_mode": bundle.pad_mode,
    }
    (root / "policy.json").write_text(json.dumps(meta, indent=2) + "\n")
    for kind, model in bundle.models.items():
        save_checkpoint(model, root / f"{kind.value}.ckpt", meta={"attribute": kind.value})


def load_policy_bundle(directory, dtype=np.float64) -> PolicyBundle:
    root = pathlib.Path(directory)
    meta_path = root / "policy.json"
    if not meta_path.is_file():
        raise RefineError(f"no policy.json under {root}")
    meta = json.loads(meta_path.read_text())
    models = {}
    for kind in KINDS:
        path = root / f"{kind.value}.ckpt"
        if not path.is_file():
            raise RefineError(f"policy bundle is missing the {kind.value} checkpoint")
        models[kind], _ = load_checkpoint(path, dtype=dtype)
    return PolicyBundle(
        models,
        input_height=int(meta["input_height"]),
        input_width=int(meta["input_width"]),
        c=int(meta["c"]),
        pad_mode=meta["pad_mode"],
    )


def policy_head(kind: AttributeKind, c: int = DEFAULT_CLIP) -> tuple:
    """Classifier head shape for one attribute's comparison network."""
    if is_color_kind(kind):
        return ("grouped", 3, 2 * c + 1)
    if is_comparable(kind):
        return ("classification", 2 * c + 1)
    return ("classification", 2)


def encode_delta(kind: AttributeKind, entry, c: int = DEFAULT_CLIP):
    """Training target from one DeltaVector entry."""
    if is_color_kind(kind):
        return np.asarray([d + c for d in entry], dtype=np.int64)
    if is_comparable(kind):
        return entry + c
    return entry  # already 0 (equal) or 1 (unequal)


def delta_arrays(samples, kind: AttributeKind, input_w: int, input_h: int,
                 pad_mode="edge", dtype=np.float64):
    """Stack a delta corpus into siamese inputs and per-kind targets."""
    xa = np.stack(
        [pad_image(s.image_a, input_w, input_h, mode=pad_mode).to_float_chw(dtype)
         for s in samples]
    )
    xb = np.stack(
        [pad_image(s.image_b, input_w, input_h, mode=pad_mode).to_float_chw(dtype)
         for s in samples]
    )
    if is_color_kind(kind):
        y = np.stack([encode_delta(kind, s.labels.get(kind)) for s in samples])
    else:
        y = np.array([encode_delta(kind, s.labels.get(kind)) for s in samples], dtype=np.int64)
    return (xa, xb), y
