import math
import random
from fractions import Fraction
from statistics import NormalDist

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_nids.classifier import (
    ANOMALOUS,
    CATEGORICAL,
    NORMAL,
    NUMERIC,
    ConnectionRecord,
    FeatureSchema,
    NaiveBayesModel,
    TrainingError,
    local_posterior,
    log_likelihood,
    log_likelihoods,
    log_normalize,
    train,
)

TOY_SCHEMA = FeatureSchema.of(("proto", CATEGORICAL), ("flag", CATEGORICAL))
TOY_ROWS = [
    (("tcp", "S0"), ANOMALOUS),
    (("tcp", "S0"), ANOMALOUS),
    (("udp", "REJ"), ANOMALOUS),
    (("tcp", "SF"), ANOMALOUS),
    (("tcp", "SF"), NORMAL),
    (("udp", "SF"), NORMAL),
    (("udp", "SF"), NORMAL),
    (("tcp", "SF"), NORMAL),
    (("udp", "REJ"), NORMAL),
    (("tcp", "SF"), NORMAL),
]

# add-one smoothing, alphabets {tcp, udp} and {REJ, S0, SF}, by hand
TOY_PRIOR = {ANOMALOUS: Fraction(4, 10), NORMAL: Fraction(6, 10)}
TOY_TABLES = {
    ANOMALOUS: [
        {"tcp": Fraction(4, 6), "udp": Fraction(2, 6)},
        {"S0": Fraction(3, 7), "REJ": Fraction(2, 7), "SF": Fraction(2, 7)},
    ],
    NORMAL: [
        {"tcp": Fraction(4, 8), "udp": Fraction(4, 8)},
        {"S0": Fraction(1, 9), "REJ": Fraction(2, 9), "SF": Fraction(6, 9)},
    ],
}


def toy_records():
    return [ConnectionRecord(v, h) for v, h in TOY_ROWS]


@pytest.fixture
def toy_model():
    return train(TOY_SCHEMA, toy_records())


def test_priors_are_class_frequencies(toy_model):
    assert math.exp(toy_model.log_priors[ANOMALOUS]) == pytest.approx(0.4, abs=1e-15)
    assert math.exp(toy_model.log_priors[NORMAL]) == pytest.approx(0.6, abs=1e-15)


def test_add_one_smoothing_binary_feature():
    schema = FeatureSchema.of(("bit", CATEGORICAL))
    records = [ConnectionRecord(("1",), ANOMALOUS)] * 4 + [ConnectionRecord(("0",), NORMAL)] * 3
    model = train(schema, records)
    assert math.exp(model.categorical[ANOMALOUS][0]["1"]) == pytest.approx(5 / 6, abs=1e-15)
    assert math.exp(model.categorical[ANOMALOUS][0]["0"]) == pytest.approx(1 / 6, abs=1e-15)


def test_gaussian_population_variance():
    schema = FeatureSchema.of(("x", NUMERIC))
    records = [
        ConnectionRecord((1.0,), NORMAL),
        ConnectionRecord((3.0,), NORMAL),
        ConnectionRecord((0.0,), ANOMALOUS),
    ]
    model = train(schema, records)
    assert model.gaussian[NORMAL][0] == (2.0, 1.0)
    assert model.gaussian[ANOMALOUS][0] == (0.0, 1e-9)


def test_gaussian_log_density_matches_stdlib():
    schema = FeatureSchema.of(("x", NUMERIC))
    records = [ConnectionRecord((v,), NORMAL) for v in (1.0, 2.5, 4.0)]
    records += [ConnectionRecord((v,), ANOMALOUS) for v in (-1.0, 0.5)]
    model = train(schema, records)
    mean, var = model.gaussian[NORMAL][0]
    oracle = math.log(NormalDist(mean, math.sqrt(var)).pdf(3.3))
    assert log_likelihood(model, ConnectionRecord((3.3,), NORMAL), NORMAL) == pytest.approx(oracle, abs=1e-12)


def test_missing_class_is_training_error():
    records = [ConnectionRecord(("tcp", "SF"), NORMAL)] * 3
    with pytest.raises(TrainingError):
        train(TOY_SCHEMA, records)


def test_single_feature_log_half():
    schema = FeatureSchema.of(("bit", CATEGORICAL))
    records = [ConnectionRecord(("1",), ANOMALOUS), ConnectionRecord(("0",), NORMAL)]
    model = train(schema, records)
    # anomalous: (1+1)/(1+2) for "1"; normal: (0+1)/(1+2) for "1"
    assert log_likelihood(model, records[0], ANOMALOUS) == pytest.approx(math.log(2 / 3), abs=1e-15)
    model2 = train(schema, records + [ConnectionRecord(("0",), ANOMALOUS), ConnectionRecord(("1",), NORMAL)])
    assert log_likelihood(model2, records[0], ANOMALOUS) == pytest.approx(math.log(0.5), abs=1e-15)


def test_product_rule_two_features():
    model = NaiveBayesModel(
        schema=TOY_SCHEMA,
        log_priors={ANOMALOUS: math.log(0.5), NORMAL: math.log(0.5)},
        categorical={
            ANOMALOUS: [{"tcp": math.log(0.5)}, {"SF": math.log(0.2)}],
            NORMAL: [{"tcp": math.log(0.5)}, {"SF": math.log(0.2)}],
        },
        unseen={ANOMALOUS: [math.log(0.01)] * 2, NORMAL: [math.log(0.01)] * 2},
        gaussian={ANOMALOUS: [None, None], NORMAL: [None, None]},
    )
    rec = ConnectionRecord(("tcp", "SF"), NORMAL)
    assert log_likelihood(model, rec, ANOMALOUS) == pytest.approx(math.log(0.1), abs=1e-15)


def test_tables_match_hand_computation(toy_model):
    for h in (ANOMALOUS, NORMAL):
        for k in range(2):
            got = {v: math.exp(lp) for v, lp in toy_model.categorical[h][k].items()}
            want = {v: float(p) for v, p in TOY_TABLES[h][k].items()}
            assert got.keys() == want.keys()
            for v in want:
                assert got[v] == pytest.approx(want[v], abs=1e-12)


def test_tables_sum_to_one(toy_model):
    for h in (ANOMALOUS, NORMAL):
        for table in toy_model.categorical[h]:
            assert math.fsum(math.exp(v) for v in table.values()) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("values", [(p, f) for p in ("tcp", "udp") for f in ("S0", "SF", "REJ")])
def test_toy_brute_force_enumeration(toy_model, values):
    rec = ConnectionRecord(values, NORMAL)
    joint = {h: TOY_PRIOR[h] * TOY_TABLES[h][0][values[0]] * TOY_TABLES[h][1][values[1]]
             for h in (ANOMALOUS, NORMAL)}
    evidence = sum(joint.values())
    for h in (ANOMALOUS, NORMAL):
        lik = TOY_TABLES[h][0][values[0]] * TOY_TABLES[h][1][values[1]]
        assert log_likelihood(toy_model, rec, h) == pytest.approx(math.log(lik), abs=1e-12)
    post = local_posterior(toy_model, rec)
    for h in (ANOMALOUS, NORMAL):
        assert post[h] == pytest.approx(float(joint[h] / evidence), abs=1e-12)


def test_unseen_category_gets_floor_mass(toy_model):
    rec = ConnectionRecord(("icmp", "SF"), NORMAL)
    # anomalous count 4, alphabet size 2 -> 1 / (4 + 2 + 1)
    expected = math.log(1 / 7) + math.log(2 / 7)
    assert log_likelihood(toy_model, rec, ANOMALOUS) == pytest.approx(expected, abs=1e-12)
    assert math.isfinite(log_likelihood(toy_model, rec, NORMAL))


def test_arity_mismatch(toy_model):
    with pytest.raises(ValueError):
        log_likelihood(toy_model, ConnectionRecord(("tcp",), NORMAL), NORMAL)


def test_posterior_uniform_priors():
    schema = FeatureSchema.of(("x", CATEGORICAL))
    model = NaiveBayesModel(
        schema,
        {ANOMALOUS: math.log(0.5), NORMAL: math.log(0.5)},
        {ANOMALOUS: [{"a": math.log(0.8)}], NORMAL: [{"a": math.log(0.2)}]},
        {ANOMALOUS: [math.log(0.1)], NORMAL: [math.log(0.1)]},
        {ANOMALOUS: [None], NORMAL: [None]},
    )
    post = local_posterior(model, ConnectionRecord(("a",), NORMAL))
    assert post[ANOMALOUS] == pytest.approx(0.8, abs=1e-12)


def test_uninformative_observation_returns_priors(toy_model):
    # "tcp"/"udp" differ across classes, so build a record whose likelihoods tie
    schema = FeatureSchema.of(("x", CATEGORICAL))
    records = [ConnectionRecord(("a",), ANOMALOUS)] + [ConnectionRecord(("a",), NORMAL)] * 3
    model = train(schema, records)
    post = local_posterior(model, records[0])
    assert post[ANOMALOUS] == pytest.approx(0.25, abs=1e-12)


@given(st.floats(-1e4, 0), st.floats(-1e4, 0), st.floats(-1e3, 1e3))
def test_log_normalize_shift_invariant(a, b, c):
    pa, pn = log_normalize(a, b)
    qa, qn = log_normalize(a + c, b + c)
    assert math.exp(pa) + math.exp(pn) == pytest.approx(1.0, abs=1e-12)
    assert qa == pytest.approx(pa, abs=1e-9) and qn == pytest.approx(pn, abs=1e-9)


value_rows = st.lists(
    st.tuples(st.sampled_from("abc"), st.sampled_from("xyz"), st.floats(-100, 100),
              st.sampled_from([ANOMALOUS, NORMAL])),
    min_size=2, max_size=30,
).filter(lambda rows: {r[3] for r in rows} == {ANOMALOUS, NORMAL})

MIXED = FeatureSchema.of(("c1", CATEGORICAL), ("c2", CATEGORICAL), ("n1", NUMERIC))


@settings(max_examples=60)
@given(value_rows, st.randoms(use_true_random=False))
def test_training_is_order_invariant(rows, rnd):
    records = [ConnectionRecord(r[:3], r[3]) for r in rows]
    shuffled = records[:]
    rnd.shuffle(shuffled)
    assert train(MIXED, records).to_dict() == train(MIXED, shuffled).to_dict()


@settings(max_examples=60)
@given(value_rows)
def test_log_likelihood_additive_over_blocks(rows):
    left = FeatureSchema.of(("c1", CATEGORICAL))
    right = FeatureSchema.of(("c2", CATEGORICAL), ("n1", NUMERIC))
    full = train(MIXED, [ConnectionRecord(r[:3], r[3]) for r in rows])
    ml = train(left, [ConnectionRecord(r[:1], r[3]) for r in rows])
    mr = train(right, [ConnectionRecord(r[1:3], r[3]) for r in rows])
    for r in rows:
        for h in (ANOMALOUS, NORMAL):
            whole = log_likelihood(full, ConnectionRecord(r[:3], r[3]), h)
            parts = (log_likelihood(ml, ConnectionRecord(r[:1], r[3]), h)
                     + log_likelihood(mr, ConnectionRecord(r[1:3], r[3]), h))
            assert whole == pytest.approx(parts, rel=1e-12, abs=1e-9)


@settings(max_examples=60)
@given(value_rows, st.sampled_from("abcd"), st.sampled_from("xyzw"))
def test_categorical_likelihood_is_a_probability(rows, c1, c2):
    schema = FeatureSchema.of(("c1", CATEGORICAL), ("c2", CATEGORICAL))
    model = train(schema, [ConnectionRecord(r[:2], r[3]) for r in rows])
    rec = ConnectionRecord((c1, c2), NORMAL)
    for h in (ANOMALOUS, NORMAL):
        p = math.exp(log_likelihood(model, rec, h))
        assert 0 < p <= 1
    post = local_posterior(model, rec)
    assert post[ANOMALOUS] + post[NORMAL] == pytest.approx(1.0, abs=1e-12)


def test_model_json_round_trip():
    rng = random.Random(0)
    records = [
        ConnectionRecord((rng.choice("ab"), rng.choice("xyz"), rng.gauss(0, 1)),
                         ANOMALOUS if i % 3 else NORMAL)
        for i in range(40)
    ]
    model = train(MIXED, records)
    again = NaiveBayesModel.from_json(model.to_json())
    assert again.to_dict() == model.to_dict()
    for r in records:
        assert log_likelihoods(again, r) == log_likelihoods(model, r)


def test_schema_validation():
    with pytest.raises(ValueError):
        FeatureSchema(())
    with pytest.raises(ValueError):
        FeatureSchema.of(("a", CATEGORICAL), ("a", NUMERIC))
    with pytest.raises(ValueError):
        FeatureSchema.of(("a", "ordinal"))
    with pytest.raises(ValueError):
        ConnectionRecord(("a",), "attack")
