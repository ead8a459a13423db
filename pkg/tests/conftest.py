"""Shared trained artifacts for the acceptance tests.

The desk-scale models take tens of minutes to train on one CPU, so they are
built once and cached under build/acceptance_cache keyed by a hash of every
parameter that influences them.  Unit test files never request these
fixtures; only the acceptance suite pays for (or reuses) the build.
"""

import dataclasses
import hashlib
import json
import pathlib
import sys
import time

import numpy as np
import pytest

from pixattr.dataset import (
    JitterSpec,
    dagger_augment,
    gen_delta_dataset,
    gen_prediction_dataset,
)
from pixattr.net.model import transfer_encoder_weights
from pixattr.net.train import TrainSpec, train
from pixattr.predictor import (
    PerturbationSpec,
    PredictorBundle,
    load_bundle,
    prediction_arrays,
    save_bundle,
)
from pixattr.profiles import DESK
from pixattr.refine import (
    DEFAULT_REFINABLE,
    PolicyBundle,
    RefinementModels,
    RefineSpec,
    delta_arrays,
    iteration_bound,
    load_policy_bundle,
    save_policy_bundle,
)
from pixattr.schema import KINDS, AttributeKind, is_color_kind

CACHE_ROOT = pathlib.Path(__file__).resolve().parent.parent / "build" / "acceptance_cache"

TRIO = (AttributeKind.BORDER_WIDTH, AttributeKind.TEXT_GRAVITY, AttributeKind.MAIN_COLOR)

PARAMS = {
    "profile": "desk",
    "train_samples": 2000,
    "eval_samples": 500,
    "offcenter_samples": 400,
    "delta_pairs": 1500,
    "seeds": {"train": 101, "eval": 102, "offcenter": 103, "delta": 104},
    "epochs": {"trio": 8, "refinable": 4, "other": 2},
    "policy_epochs": {"refinable": 5, "other": 2},
    "dagger": {"rounds": 1, "per_round": 120, "extra_epochs": 2},
    "batch_size": 128,
    "lr": 0.01,
    "c": 5,
    "version": 1,
}

OFFCENTER_JITTER = JitterSpec(mode="tr1", margin=0)


def _cache_key() -> str:
    blob = json.dumps(PARAMS, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _log(msg: str) -> None:
    print(f"[artifacts] {msg}", file=sys.stderr, flush=True)


def _gen_common() -> dict:
    return dict(
        schema=DESK.schema, jitter=DESK.jitter,
        background_mode=DESK.background_mode, canvas=DESK.canvas,
        labels=DESK.labels,
    )


def desk_eval_dataset():
    return gen_prediction_dataset(
        PARAMS["eval_samples"], seed=PARAMS["seeds"]["eval"], **_gen_common()
    )


def desk_offcenter_dataset():
    common = _gen_common()
    common["jitter"] = OFFCENTER_JITTER
    return gen_prediction_dataset(
        PARAMS["offcenter_samples"], seed=PARAMS["seeds"]["offcenter"], **common
    )


def _predictor_epochs(kind: AttributeKind) -> int:
    if kind in TRIO:
        return PARAMS["epochs"]["trio"]
    if kind in DEFAULT_REFINABLE:
        return PARAMS["epochs"]["refinable"]
    return PARAMS["epochs"]["other"]


def _policy_epochs(kind: AttributeKind) -> int:
    name = "refinable" if kind in DEFAULT_REFINABLE else "other"
    return PARAMS["policy_epochs"][name]


def _predictor_loss(kind: AttributeKind):
    return ("mse", None) if is_color_kind(kind) else ("ce", None)


def _policy_loss(kind: AttributeKind):
    return ("grouped_ce", 3) if is_color_kind(kind) else ("ce", None)


def _spec(epochs: int, seed: int) -> TrainSpec:
    return TrainSpec(epochs=epochs, batch_size=PARAMS["batch_size"],
                     lr=PARAMS["lr"], seed=seed)


def _split_pairs(pairs):
    cut = max(1, int(len(pairs) * 0.9))
    if cut >= len(pairs):
        cut = len(pairs) - 1
    return pairs[:cut], pairs[cut:]


def _build(root: pathlib.Path) -> dict:
    durations: dict = {"predictor": {}, "policy": {}}
    t0 = time.time()
    common = _gen_common()
    train_ds = gen_prediction_dataset(
        PARAMS["train_samples"], seed=PARAMS["seeds"]["train"], **common
    )
    eval_ds = desk_eval_dataset()
    delta_ds = gen_delta_dataset(
        PARAMS["delta_pairs"], schema=DESK.schema, c=PARAMS["c"],
        seed=PARAMS["seeds"]["delta"], jitter=DESK.jitter, canvas=DESK.canvas,
        labels=DESK.labels, background_modes=(DESK.background_mode,),
    )
    durations["data"] = time.time() - t0
    _log(f"generated corpora in {durations['data']:.0f}s")

    predictors = {}
    for i, kind in enumerate(KINDS):
        tk = time.time()
        rng = np.random.default_rng(np.random.SeedSequence([7, 10, i]))
        model = DESK.predictor_model(kind, rng)
        loss, groups = _predictor_loss(kind)
        xt, yt = prediction_arrays(train_ds, kind, DESK.input_width,
                                   DESK.input_height, dtype=DESK.dtype)
        xv, yv = prediction_arrays(eval_ds, kind, DESK.input_width,
                                   DESK.input_height, dtype=DESK.dtype)
        history = train(model, (xt, yt), (xv, yv),
                        _spec(_predictor_epochs(kind), seed=1000 + i),
                        loss=loss, groups=groups)
        del xt, xv
        predictors[kind] = model
        durations["predictor"][kind.value] = time.time() - tk
        _log(f"predictor {kind.value}: {len(history)} epochs, "
             f"val {history[-1].val_loss:.4f}, {durations['predictor'][kind.value]:.0f}s")
    predictor_bundle = PredictorBundle(
        predictors, input_height=DESK.input_height, input_width=DESK.input_width,
        perturbation=PerturbationSpec(k=5, t=5, seed=0),
    )
    save_bundle(predictor_bundle, root / "predictor")

    policies = {}
    train_pairs, val_pairs = _split_pairs(delta_ds)
    for i, kind in enumerate(KINDS):
        tk = time.time()
        rng = np.random.default_rng(np.random.SeedSequence([7, 12, i]))
        model = DESK.policy_model(kind, rng, c=PARAMS["c"])
        transfer_encoder_weights(model, predictors[kind])
        loss, groups = _policy_loss(kind)
        xt, yt = delta_arrays(train_pairs, kind, DESK.input_width,
                              DESK.input_height, dtype=DESK.dtype)
        xv, yv = delta_arrays(val_pairs, kind, DESK.input_width,
                              DESK.input_height, dtype=DESK.dtype)
        history = train(model, (xt, yt), (xv, yv),
                        _spec(_policy_epochs(kind), seed=2000 + i),
                        loss=loss, groups=groups)
        del xt, xv
        policies[kind] = model
        durations["policy"][kind.value] = time.time() - tk
        _log(f"policy {kind.value}: {len(history)} epochs, "
             f"val {history[-1].val_loss:.4f}, {durations['policy'][kind.value]:.0f}s")
    policy_bundle = PolicyBundle(
        policies, input_height=DESK.input_height, input_width=DESK.input_width,
        c=PARAMS["c"],
    )

    dag = PARAMS["dagger"]
    if dag["rounds"] > 0:
        t_dag = time.time()
        bound = iteration_bound(c=PARAMS["c"], schema=DESK.schema) + 4
        grown = dagger_augment(
            RefinementModels(policy_bundle, predictor_bundle), delta_ds,
            rounds=dag["rounds"], per_round=dag["per_round"], seed=105,
            refine_spec=RefineSpec(patience=4, max_iters=bound),
        )
        added = grown[len(delta_ds):]
        _log(f"dagger: +{len(added)} visited-state pairs in {time.time() - t_dag:.0f}s")
        train_pairs2, val_pairs2 = _split_pairs(grown)
        for i, kind in enumerate(KINDS):
            if kind not in DEFAULT_REFINABLE:
                continue
            tk = time.time()
            loss, groups = _policy_loss(kind)
            xt, yt = delta_arrays(train_pairs2, kind, DESK.input_width,
                                  DESK.input_height, dtype=DESK.dtype)
            xv, yv = delta_arrays(val_pairs2, kind, DESK.input_width,
                                  DESK.input_height, dtype=DESK.dtype)
            history = train(policies[kind], (xt, yt), (xv, yv),
                            _spec(dag["extra_epochs"], seed=3000 + i),
                            loss=loss, groups=groups)
            del xt, xv
            durations["policy"][kind.value] += time.time() - tk
            _log(f"policy {kind.value} (+dagger): val {history[-1].val_loss:.4f}")
        durations["dagger"] = time.time() - t_dag

    save_policy_bundle(policy_bundle, root / "policy")
    durations["total"] = time.time() - t0
    (root / "meta.json").write_text(json.dumps(
        {"params": PARAMS, "durations": durations}, indent=2) + "\n")
    _log(f"artifact build finished in {durations['total']:.0f}s")
    return durations


@dataclasses.dataclass
class DeskArtifacts:
    predictor: PredictorBundle
    policies: PolicyBundle
    eval_ds: list
    offcenter_ds: list
    durations: dict
    cache_dir: pathlib.Path


@pytest.fixture(scope="session")
def desk_artifacts() -> DeskArtifacts:
    root = CACHE_ROOT / f"desk-{_cache_key()}"
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        root.mkdir(parents=True, exist_ok=True)
        _log(f"training desk artifacts into {root} (first run takes ~30-45 min)")
        _build(root)
    meta = json.loads(meta_path.read_text())
    return DeskArtifacts(
        predictor=load_bundle(root / "predictor", dtype=DESK.dtype),
        policies=load_policy_bundle(root / "policy", dtype=DESK.dtype),
        eval_ds=desk_eval_dataset(),
        offcenter_ds=desk_offcenter_dataset(),
        durations=meta["durations"],
        cache_dir=root,
    )
