"""Shift-ensemble inference, saliency maps, and color snapping."""

import math

import numpy as np
import pytest

from pixattr.image import Image, pad_image
from pixattr.net import NeuralModel, predictor_spec
from pixattr.predictor import (
    PerturbationSpec,
    PredictorBundle,
    PredictorError,
    color_clip,
    decode_output,
    encode_label,
    ensemble_predict,
    kind_head,
    load_bundle,
    predict_config,
    prediction_arrays,
    saliency_map,
    save_bundle,
)
from pixattr.schema import KINDS, AttributeKind, domain_values, is_color_kind, validate

INPUT_H, INPUT_W = 24, 48


def tiny_model(kind, seed=0, hidden=8):
    spec = predictor_spec((3, INPUT_H, INPUT_W), [4], [1], kind_head(kind), hidden=hidden)
    return NeuralModel(spec, np.random.default_rng(seed))


def tiny_bundle(**kw):
    models = {kind: tiny_model(kind, seed=i) for i, kind in enumerate(KINDS)}
    return PredictorBundle(models, INPUT_H, INPUT_W, **kw)


def noise_image(w=INPUT_W, h=INPUT_H, seed=0):
    rng = np.random.default_rng(seed)
    return Image(w, h, rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def test_k1_t0_is_plain_forward():
    model = tiny_model(AttributeKind.BORDER_WIDTH)
    img = noise_image()
    out = ensemble_predict(model, img, PerturbationSpec(k=1, t=0))
    direct = model.forward(img.to_float_chw()[None], train=False)[0]
    assert np.array_equal(out, direct)


def test_ensemble_distribution_sums_to_one():
    model = tiny_model(AttributeKind.SHADOW)
    out = ensemble_predict(model, noise_image(seed=1), PerturbationSpec(k=6, t=4))
    assert out.shape == (len(domain_values(AttributeKind.SHADOW)),)
    assert abs(out.sum() - 1.0) < 1e-12
    assert (out >= 0).all()


def test_ensemble_deterministic_and_seed_sensitive():
    model = tiny_model(AttributeKind.PADDING)
    img = noise_image(seed=2)
    a = ensemble_predict(model, img, PerturbationSpec(k=5, t=5, seed=3))
    b = ensemble_predict(model, img, PerturbationSpec(k=5, t=5, seed=3))
    c = ensemble_predict(model, img, PerturbationSpec(k=5, t=5, seed=4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_full_frame_content_box_leaves_only_identity_shift():
    model = tiny_model(AttributeKind.HEIGHT)
    img = noise_image(seed=3)
    box = (0, 0, img.width, img.height)  # any shift pushes it off canvas
    out = ensemble_predict(model, img, PerturbationSpec(k=8, t=6), content_box=box)
    single = ensemble_predict(model, img, PerturbationSpec(k=1, t=0))
    assert np.array_equal(out, single)


def test_dead_ensemble_raises():
    model = tiny_model(AttributeKind.WIDTH)
    img = noise_image(seed=4)
    box = (-1, 0, img.width, img.height)  # already outside before any shift
    with pytest.raises(PredictorError, match="perturbation"):
        ensemble_predict(model, img, PerturbationSpec(k=3, t=2), content_box=box)


def test_oversized_image_rejected():
    model = tiny_model(AttributeKind.WIDTH)
    with pytest.raises(PredictorError, match="exceeds"):
        ensemble_predict(model, noise_image(w=INPUT_W + 1))


def test_edge_padding_idempotence():
    model = tiny_model(AttributeKind.BORDER_RADIUS)
    small = noise_image(w=30, h=16, seed=5)
    pre_padded = pad_image(small, INPUT_W, INPUT_H, mode="edge")
    spec = PerturbationSpec(k=4, t=3, seed=1)
    assert np.array_equal(
        ensemble_predict(model, small, spec), ensemble_predict(model, pre_padded, spec)
    )


def test_saliency_range_and_shape():
    model = tiny_model(AttributeKind.MAIN_COLOR)
    img = noise_image(w=30, h=16, seed=6)
    sal, degenerate = saliency_map(model, img)
    assert sal.shape == (16, 30)
    assert not degenerate
    assert sal.min() >= 0.0 and sal.max() == pytest.approx(1.0)


def test_saliency_on_constant_image():
    model = tiny_model(AttributeKind.TEXT_COLOR, seed=7)
    img = Image(INPUT_W, INPUT_H, np.full((INPUT_H, INPUT_W, 3), 120, dtype=np.uint8))
    sal, _ = saliency_map(model, img)
    assert sal.shape == (INPUT_H, INPUT_W)
    assert (sal >= 0.0).all() and (sal <= 1.0).all()


def test_saliency_degenerate_flag():
    model = tiny_model(AttributeKind.BORDER_WIDTH, seed=8)
    conv = model.layers[0]
    for p in conv.params():
        p.value[...] = 0.0  # nothing reaches the input, the map is all-equal
    sal, degenerate = saliency_map(model, noise_image(seed=9))
    assert degenerate
    assert np.array_equal(sal, np.zeros_like(sal))


def test_saliency_classification_model():
    model = tiny_model(AttributeKind.TEXT_GRAVITY, seed=10)
    sal, degenerate = saliency_map(model, noise_image(seed=11))
    assert not degenerate and sal.max() == pytest.approx(1.0)


def three_color_image():
    # 8 dark pixels, 5 red, 3 blue on a 4x4 canvas
    px = np.zeros((4, 4, 3), dtype=np.uint8)
    px[:, :] = (10, 10, 10)
    px[0, :3] = (200, 0, 0)
    px[1, :2] = (200, 0, 0)
    px[2, :2] = (0, 0, 200)
    px[3, 0] = (0, 0, 200)
    return Image(4, 4, px)


def test_color_clip_single_candidate_wins():
    img = three_color_image()
    sal = np.zeros((4, 4))
    sal[0, 0] = 1.0  # only one red pixel clears the threshold
    assert color_clip((255, 255, 255), img, sal) == (200, 0, 0)


def test_color_clip_exact_match_unchanged():
    img = three_color_image()
    sal = np.ones((4, 4))
    assert color_clip((10, 10, 10), img, sal) == (10, 10, 10)


def test_color_clip_empty_mask_falls_back():
    img = three_color_image()
    sal = np.zeros((4, 4))
    assert color_clip((77, 88, 99), img, sal) == (77, 88, 99)


def test_color_clip_masked_candidates_only():
    img = three_color_image()
    sal = np.zeros((4, 4))
    sal[img.pixels[:, :, 0] != 10] = 1.0  # mask covers red and blue, not the dark fill
    sal[img.pixels[:, :, 2] == 200] = 1.0
    got = color_clip((12, 12, 12), img, sal)
    assert got in ((200, 0, 0), (0, 0, 200))
    from pixattr.colorspace import cie76

    assert cie76(got, (12, 12, 12)) == min(
        cie76((200, 0, 0), (12, 12, 12)), cie76((0, 0, 200), (12, 12, 12))
    )


def test_color_clip_image_modes_differ_on_rare_colors():
    # six distinct colors; the rarest one occurs once and misses the top five
    px = np.zeros((4, 4, 3), dtype=np.uint8)
    common = [(0, 0, 0), (50, 50, 50), (100, 100, 100), (150, 150, 150), (200, 200, 200)]
    cells = [c for c in common for _ in range(3)] + [(254, 0, 0)]
    for i, c in enumerate(cells):
        px[divmod(i, 4)] = c
    img = Image(4, 4, px)
    sal = np.zeros((4, 4))
    predicted = (255, 0, 0)
    assert color_clip(predicted, img, sal, mode="image_all") == (254, 0, 0)
    top5 = color_clip(predicted, img, sal, mode="image_top5")
    assert top5 in [tuple(c) for c in common]


def test_color_clip_result_is_nearest_candidate():
    from pixattr.colorspace import cie76

    rng = np.random.default_rng(13)
    for _ in range(20):
        img = Image(8, 6, rng.integers(0, 4, size=(6, 8, 3), dtype=np.uint8) * 80)
        sal = rng.random((6, 8))
        predicted = tuple(int(v) for v in rng.integers(0, 256, size=3))
        got = color_clip(predicted, img, sal, threshold=0.5)
        mask = sal >= 0.5
        pool = img.pixels[mask].reshape(-1, 3)
        if pool.size == 0:
            assert got == predicted
            continue
        colors, counts = np.unique(pool, axis=0, return_counts=True)
        order = np.lexsort((colors[:, 2], colors[:, 1], colors[:, 0], -counts))
        cands = [tuple(int(v) for v in c) for c in colors[order[:5]]]
        assert got in cands
        assert cie76(got, predicted) == min(cie76(c, predicted) for c in cands)


def test_color_clip_mode_validation():
    with pytest.raises(ValueError):
        color_clip((0, 0, 0), three_color_image(), np.zeros((4, 4)), mode="nope")
    with pytest.raises(ValueError):
        color_clip((0, 0, 0), three_color_image(), np.zeros((3, 3)))


def test_encode_decode_round_trip():
    for kind in KINDS:
        if is_color_kind(kind):
            assert np.allclose(encode_label(kind, (0, 128, 255)), [0, 128 / 255, 1.0])
            continue
        for value in domain_values(kind):
            idx = encode_label(kind, value)
            onehot = np.zeros(len(domain_values(kind)))
            onehot[idx] = 1.0
            got, conf, _, _ = decode_output(kind, onehot)
            assert got == value and conf == 1.0
    assert encode_label(AttributeKind.BORDER_RADIUS, math.inf) == len(
        domain_values(AttributeKind.BORDER_RADIUS)
    ) - 1


def test_decode_regression_clips_out_of_range():
    rgb, conf, cand, probs = decode_output(
        AttributeKind.MAIN_COLOR, np.array([-0.5, 0.5, 1.7])
    )
    assert rgb == (0, 128, 255) and conf == 1.0
    assert cand == [rgb] and probs.tolist() == [1.0]


def test_decode_rejects_wrong_width():
    with pytest.raises(PredictorError):
        decode_output(AttributeKind.SHADOW, np.zeros(7))


def test_prediction_arrays_shapes_and_labels():
    from pixattr.dataset import gen_prediction_dataset
    from pixattr.schema import AttributeKind as K

    schema = {K.WIDTH: [30], K.HEIGHT: [20]}
    ds = gen_prediction_dataset(4, schema=schema, canvas=(INPUT_W, INPUT_H), seed=0)
    x, y = prediction_arrays(ds, K.BORDER_WIDTH, INPUT_W, INPUT_H)
    assert x.shape == (4, 3, INPUT_H, INPUT_W) and x.dtype == np.float64
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert y.shape == (4,) and y.dtype == np.int64
    assert all(0 <= v < len(domain_values(K.BORDER_WIDTH)) for v in y)
    xc, yc = prediction_arrays(ds, K.MAIN_COLOR, INPUT_W, INPUT_H)
    assert yc.shape == (4, 3) and (yc >= 0).all() and (yc <= 1).all()
    assert np.allclose(yc[0] * 255, ds[0].label.main_color)


def test_predict_config_validates_and_is_deterministic():
    bundle = tiny_bundle()
    img = noise_image(seed=20)
    first = predict_config(bundle, img)
    second = predict_config(bundle, img)
    assert validate(first.config) == []
    assert first.config == second.config
    assert first.failures == {}
    assert all(0.0 <= p.confidence <= 1.0 for p in first.predictions.values())


class _Boom:
    def __init__(self):
        self.spec = type("S", (), {"input_shape": (3, INPUT_H, INPUT_W)})()

    def forward(self, x, train=False):
        raise RuntimeError("synthetic model failure")


def test_predict_config_isolates_per_kind_failure():
    bundle = tiny_bundle()
    bundle.models[AttributeKind.BORDER_WIDTH] = _Boom()
    result = predict_config(bundle, noise_image(seed=21))
    assert set(result.failures) == {AttributeKind.BORDER_WIDTH}
    assert "synthetic model failure" in result.failures[AttributeKind.BORDER_WIDTH]
    assert validate(result.config) == []
    assert result.predictions[AttributeKind.BORDER_WIDTH].confidence == 0.0
    # an unrelated attribute still got a real prediction
    assert result.predictions[AttributeKind.SHADOW].probs.shape == (
        len(domain_values(AttributeKind.SHADOW)),
    )


def test_bundle_must_cover_every_kind():
    models = {kind: tiny_model(kind) for kind in KINDS if kind != AttributeKind.PADDING}
    with pytest.raises(ValueError, match="padding"):
        PredictorBundle(models, INPUT_H, INPUT_W)


def test_bundle_checks_input_shapes():
    models = {kind: tiny_model(kind) for kind in KINDS}
    with pytest.raises(ValueError, match="input"):
        PredictorBundle(models, INPUT_H + 2, INPUT_W)


def test_bundle_save_load_round_trip(tmp_path):
    bundle = tiny_bundle(perturbation=PerturbationSpec(k=3, t=2, seed=5))
    save_bundle(bundle, tmp_path)
    back = load_bundle(tmp_path)
    img = noise_image(seed=22)
    assert predict_config(bundle, img).config == predict_config(back, img).config
    assert back.perturbation == bundle.perturbation


def test_load_bundle_missing_checkpoint(tmp_path):
    bundle = tiny_bundle()
    save_bundle(bundle, tmp_path)
    (tmp_path / "shadow.ckpt").unlink()
    with pytest.raises(PredictorError, match="shadow"):
        load_bundle(tmp_path)
