"""Attribute schema: domains, distances, perceivable classes, sampling."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixattr import schema
from pixattr.schema import (
    INF_RADIUS,
    KINDS,
    AttributeConfig,
    AttributeKind,
    DomainError,
    PerceivableClass,
    distance,
    domain_values,
    perceivable_class,
    sample_config,
    validate,
)

K = AttributeKind


def baseline_config(**overrides) -> AttributeConfig:
    vals = dict(
        border_color=(0, 0, 0),
        border_radius=4,
        border_width=2,
        main_color=(66, 133, 244),
        padding=4,
        shadow=2,
        text_color=(255, 255, 255),
        text_font="regular",
        text_gravity="center",
        text_size=14,
        height=28,
        width=64,
    )
    vals.update(overrides)
    return AttributeConfig(**vals)


def test_twelve_kinds_and_comparability_split():
    assert len(KINDS) == 12
    assert set(schema.UNCOMPARABLE_KINDS) == {K.TEXT_FONT, K.TEXT_GRAVITY}
    assert len(schema.COMPARABLE_KINDS) == 10


def test_domain_extents():
    assert domain_values(K.BORDER_WIDTH) == tuple(range(13))
    assert domain_values(K.PADDING) == tuple(range(44))
    assert domain_values(K.SHADOW) == tuple(range(13))
    assert domain_values(K.HEIGHT) == tuple(range(20, 61))
    assert domain_values(K.WIDTH) == tuple(range(25, 276))
    assert domain_values(K.BORDER_RADIUS)[:3] == (0, 1, 2)
    assert domain_values(K.BORDER_RADIUS)[-1] == INF_RADIUS
    assert domain_values(K.TEXT_SIZE)[0] == 0
    assert domain_values(K.TEXT_SIZE)[1:] == tuple(range(10, 31))
    assert domain_values(K.TEXT_FONT) == ("thin", "light", "regular", "medium", "bolt")
    assert domain_values(K.TEXT_GRAVITY) == ("top", "left", "center", "right", "bottom")


def test_validate_ok_at_domain_minima():
    cfg = AttributeConfig(
        border_color=(0, 0, 0),
        border_radius=0,
        border_width=0,
        main_color=(0, 0, 0),
        padding=0,
        shadow=0,
        text_color=(0, 0, 0),
        text_font="thin",
        text_gravity="top",
        text_size=0,
        height=20,
        width=25,
    )
    assert validate(cfg) == []


def test_validate_flags_out_of_domain_values():
    bad = baseline_config(border_width=13)
    violations = validate(bad)
    assert [v.kind for v in violations] == [K.BORDER_WIDTH]

    bad = baseline_config(text_size=5)
    assert [v.kind for v in validate(bad)] == [K.TEXT_SIZE]

    bad = baseline_config(main_color=(0, 0, 300), text_gravity="middle")
    kinds = {v.kind for v in validate(bad)}
    assert kinds == {K.MAIN_COLOR, K.TEXT_GRAVITY}


def test_distance_examples():
    assert distance(K.BORDER_WIDTH, 3, 3) == 0.0
    assert distance(K.TEXT_GRAVITY, "left", "right") == 1.0
    assert distance(K.MAIN_COLOR, (255, 255, 255), (0, 0, 0)) == pytest.approx(
        100.0, abs=1e-9
    )


def test_distance_infinite_radius():
    assert distance(K.BORDER_RADIUS, INF_RADIUS, INF_RADIUS) == 0.0
    assert distance(K.BORDER_RADIUS, INF_RADIUS, 20) == math.inf
    assert distance(K.BORDER_RADIUS, 0, INF_RADIUS) == math.inf


def test_distance_rejects_out_of_domain():
    with pytest.raises(DomainError):
        distance(K.BORDER_WIDTH, 3, 13)
    with pytest.raises(DomainError):
        distance(K.TEXT_FONT, "regular", "bold")


def test_perceivable_class_examples():
    assert perceivable_class(K.TEXT_SIZE, 12, 13) is PerceivableClass.SAME
    assert perceivable_class(K.SHADOW, 2, 4) is PerceivableClass.SIMILAR
    assert perceivable_class(K.TEXT_FONT, "regular", "bolt") is PerceivableClass.DIFFERENT
    assert perceivable_class(K.BORDER_RADIUS, 5, INF_RADIUS) is PerceivableClass.DIFFERENT


def test_perceivable_same_on_equal_values_all_kinds():
    cfg = baseline_config()
    for kind in KINDS:
        v = cfg.get(kind)
        assert perceivable_class(kind, v, v) is PerceivableClass.SAME


def test_border_width_classification_matches_brute_force():
    # Thresholds: same iff eps = 0, similar iff eps <= 1, else different.
    for a in range(13):
        for b in range(13):
            eps = abs(a - b)
            if eps == 0:
                expected = PerceivableClass.SAME
            elif eps <= 1:
                expected = PerceivableClass.SIMILAR
            else:
                expected = PerceivableClass.DIFFERENT
            assert perceivable_class(K.BORDER_WIDTH, a, b) is expected


THRESHOLD_TABLE = {
    K.BORDER_COLOR: (5.0, 10.0),
    K.BORDER_RADIUS: (1.0, 3.0),
    K.BORDER_WIDTH: (0.0, 1.0),
    K.MAIN_COLOR: (5.0, 10.0),
    K.PADDING: (1.0, 3.0),
    K.SHADOW: (0.0, 2.0),
    K.TEXT_COLOR: (5.0, 10.0),
    K.TEXT_SIZE: (1.0, 2.0),
    K.HEIGHT: (1.0, 3.0),
    K.WIDTH: (2.0, 4.0),
}


def test_every_integer_kind_against_threshold_brute_force():
    for kind in (
        K.BORDER_RADIUS,
        K.BORDER_WIDTH,
        K.PADDING,
        K.SHADOW,
        K.TEXT_SIZE,
        K.HEIGHT,
        K.WIDTH,
    ):
        same_max, similar_max = THRESHOLD_TABLE[kind]
        values = domain_values(kind)
        for a in values:
            for b in values:
                eps = distance(kind, a, b)
                if eps <= same_max:
                    expected = PerceivableClass.SAME
                elif eps <= similar_max:
                    expected = PerceivableClass.SIMILAR
                else:
                    expected = PerceivableClass.DIFFERENT
                assert perceivable_class(kind, a, b) is expected


def test_metric_axioms_exhaustive_small_domains():
    for kind in (K.BORDER_WIDTH, K.SHADOW, K.BORDER_RADIUS):
        values = domain_values(kind)
        for a in values:
            assert distance(kind, a, a) == 0.0
            for b in values:
                assert distance(kind, a, b) == distance(kind, b, a)
                for c in values:
                    assert distance(kind, a, c) <= distance(kind, a, b) + distance(
                        kind, b, c
                    )


color_st = st.tuples(
    st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)
)


@settings(max_examples=200, deadline=None)
@given(a=color_st, b=color_st, c=color_st)
def test_color_metric_axioms(a, b, c):
    kind = K.MAIN_COLOR
    assert distance(kind, a, a) == 0.0
    assert distance(kind, a, b) == pytest.approx(distance(kind, b, a), abs=1e-12)
    assert distance(kind, a, c) <= distance(kind, a, b) + distance(kind, b, c) + 1e-9


@settings(max_examples=200, deadline=None)
@given(a=color_st, b=color_st, c=color_st)
def test_color_class_monotone_in_distance(a, b, c):
    kind = K.TEXT_COLOR
    if distance(kind, a, b) <= distance(kind, a, c):
        assert perceivable_class(kind, a, b) <= perceivable_class(kind, a, c)


@settings(max_examples=300, deadline=None)
@given(
    kind=st.sampled_from(
        [K.BORDER_RADIUS, K.BORDER_WIDTH, K.PADDING, K.SHADOW, K.TEXT_SIZE, K.HEIGHT, K.WIDTH]
    ),
    data=st.data(),
)
def test_integer_class_monotone_in_distance(kind, data):
    values = domain_values(kind)
    a = data.draw(st.sampled_from(values))
    b = data.draw(st.sampled_from(values))
    c = data.draw(st.sampled_from(values))
    if distance(kind, a, b) <= distance(kind, a, c):
        assert perceivable_class(kind, a, b) <= perceivable_class(kind, a, c)


def test_sample_config_full_resample_is_valid():
    rng = np.random.default_rng(3)
    for _ in range(50):
        cfg = sample_config(rng)
        assert validate(cfg) == []


def test_sample_config_subset_copies_rest():
    rng = np.random.default_rng(4)
    prev = sample_config(rng)
    out = sample_config(rng, resample_kinds={K.BORDER_WIDTH}, previous=prev)
    for kind in KINDS:
        if kind is not K.BORDER_WIDTH:
            assert out.get(kind) == prev.get(kind)


def test_sample_config_requires_previous_for_subsets():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        sample_config(rng, resample_kinds={K.WIDTH}, previous=None)


def test_consecutive_subset_samples_share_at_least_nine_values():
    rng = np.random.default_rng(6)
    prev = sample_config(rng)
    for _ in range(40):
        pick = [KINDS[i] for i in rng.choice(12, size=3, replace=False)]
        nxt = sample_config(rng, resample_kinds=set(pick), previous=prev)
        shared = sum(1 for kind in KINDS if nxt.get(kind) == prev.get(kind))
        assert shared >= 9
        prev = nxt


def test_sample_config_respects_schema_pools():
    rng = np.random.default_rng(7)
    pools = {K.WIDTH: tuple(range(25, 73)), K.HEIGHT: tuple(range(20, 35))}
    for _ in range(30):
        cfg = sample_config(rng, schema=pools)
        assert 25 <= cfg.width <= 72
        assert 20 <= cfg.height <= 34
        assert validate(cfg) == []


def test_record_round_trip_including_inf_radius():
    cfg = baseline_config(border_radius=INF_RADIUS)
    rec = cfg.to_record()
    assert rec["border_radius"] == "inf"
    assert rec["main_color"] == [66, 133, 244]
    back = AttributeConfig.from_record(json.loads(json.dumps(rec)))
    assert back == cfg


def test_json_round_trip_plain():
    cfg = baseline_config()
    assert AttributeConfig.from_json(cfg.to_json()) == cfg


def test_from_record_rejects_unknown_and_missing_keys():
    rec = baseline_config().to_record()
    rec["bogus"] = 1
    with pytest.raises(ValueError, match="unknown"):
        AttributeConfig.from_record(rec)
    rec2 = baseline_config().to_record()
    del rec2["width"]
    with pytest.raises(ValueError, match="missing"):
        AttributeConfig.from_record(rec2)


def test_with_value_returns_modified_copy():
    cfg = baseline_config()
    out = cfg.with_value(K.SHADOW, 9)
    assert out.shadow == 9
    assert cfg.shadow == 2
    assert out.with_value(K.SHADOW, 2) == cfg
