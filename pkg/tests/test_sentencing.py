"""Record encoding and sentencing behavior."""

import warnings

import numpy as np
import pytest

import flowids.tensor as T
from flowids.dataio import FlowRecord
from flowids.errors import DataError, SchemaError
from flowids.sentencing import (
    FeatureSpec,
    Schema,
    SentencingParams,
    encode,
    encode_batch,
    fit_schema,
    parse_boolean,
    parse_number,
    parse_timestamp,
    profile_columns,
    sentence,
    sentence_record,
)
from flowids.tensor import Tensor


@pytest.fixture(autouse=True)
def fresh_tape():
    T.clear_tape()
    yield
    T.clear_tape()


_BASE = {
    "srcip": "10.0.0.1",
    "dstip": "192.168.1.2",
    "proto": "tcp",
    "Sload": "1000.0",
    "Dload": "500.0",
    "Stime": "1400000000.0",
    "Ltime": "1400000002.5",
    "Spkts": "10",
    "srcport": "4444",
    "dstport": "80",
    "Dpkts": "8",
    "dur": "2.5",
    "sttl": "64",
}


def _rec(row=0, label=0, **overrides):
    values = dict(_BASE)
    values.update(overrides)
    return FlowRecord(values=values, label=label, row=row)


def _records():
    return [
        _rec(0, 0),
        _rec(1, 1, srcip="10.0.0.2", proto="udp", Sload="3000.0", sttl="255", dur="0.4"),
        _rec(2, 0, srcip="10.0.0.1", proto="icmp", Sload="2000.0", Dload="1500.0", Spkts="44"),
        _rec(3, 1, srcip="10.0.0.3", Sload="5000.0", Stime="1400000100.0", Dpkts="30",
             srcport="5999", dstport="443", Ltime="1400000111.0"),
    ]


class TestParsing:
    def test_number(self):
        assert parse_number("3.5") == 3.5
        assert parse_number("-2") == -2.0

    def test_number_rejects_garbage(self):
        with pytest.raises(DataError):
            parse_number("fast")

    def test_timestamp_passthrough_float(self):
        """Epoch-second cells parse as plain floats."""
        assert parse_timestamp("1400000000.5") == 1400000000.5

    def test_timestamp_clock_is_seconds_in_day(self):
        assert parse_timestamp("01:02:03") == 3723.0

    def test_timestamp_dates_are_ordered(self):
        """Calendar formats map to epoch seconds, so later dates compare larger."""
        assert parse_timestamp("02-Jan-15") > parse_timestamp("01-Jan-15")
        assert parse_timestamp("26/04/2019") > parse_timestamp("25/04/2019")

    def test_timestamp_rejects_garbage(self):
        with pytest.raises(DataError):
            parse_timestamp("not-a-time")

    def test_boolean_variants(self):
        for cell in ("1", "true", "On", " YES "):
            assert parse_boolean(cell) == 1.0
        for cell in ("0", "false", "off", "no"):
            assert parse_boolean(cell) == 0.0

    def test_boolean_rejects_garbage(self):
        with pytest.raises(DataError):
            parse_boolean("maybe")


class TestProfiles:
    def test_unsw_width(self):
        assert len(profile_columns("unsw")["features"]) == 13

    def test_ton_width(self):
        assert len(profile_columns("ton")["features"]) == 11

    def test_unknown_profile(self):
        with pytest.raises(SchemaError, match="unknown profile"):
            profile_columns("netflow-v9")


class TestFitSchema:
    def test_vocab_first_appearance_order(self):
        """Nominal values are indexed 1, 2, ... in first-appearance order."""
        schema = fit_schema(_records(), "unsw")
        srcip = schema.features[0]
        assert srcip.vocab == {"10.0.0.1": 1, "10.0.0.2": 2, "10.0.0.3": 3}
        proto = schema.features[2]
        assert proto.vocab == {"tcp": 1, "udp": 2, "icmp": 3}

    def test_numeric_range_is_train_min_max(self):
        schema = fit_schema(_records(), "unsw")
        sload = next(f for f in schema.features if f.name == "Sload")
        assert sload.lo == 1000.0
        assert sload.hi == 5000.0

    def test_constant_feature_warns(self):
        recs = [_rec(i, i % 2) for i in range(4)]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit_schema(recs, "unsw")
        assert any("constant" in str(w.message) for w in caught)

    def test_empty_records_rejected(self):
        with pytest.raises(SchemaError, match="empty"):
            fit_schema([], "unsw")

    def test_missing_column_names_it(self):
        bad = _rec(7)
        del bad.values["sttl"]
        with pytest.raises(SchemaError, match="sttl"):
            fit_schema([_rec(0), bad], "unsw")

    def test_roundtrip_through_dict(self):
        schema = fit_schema(_records(), "unsw")
        clone = Schema.from_dict(schema.to_dict())
        assert clone == schema


class TestEncode:
    def test_nominal_scaled_index(self):
        spec = FeatureSpec(name="proto", kind="nominal", vocab={"tcp": 1, "udp": 2})
        assert spec.encode("tcp") == 0.5
        assert spec.encode("udp") == 1.0

    def test_nominal_unseen_is_zero(self):
        spec = FeatureSpec(name="proto", kind="nominal", vocab={"tcp": 1, "udp": 2})
        assert spec.encode("gre") == 0.0

    def test_numeric_min_max(self):
        spec = FeatureSpec(name="Sload", kind="numeric", lo=0.0, hi=10.0)
        np.testing.assert_allclose(spec.encode("2.5"), 0.25)

    def test_numeric_clips_outside_train_range(self):
        spec = FeatureSpec(name="Sload", kind="numeric", lo=0.0, hi=10.0)
        assert spec.encode("-5") == 0.0
        assert spec.encode("25") == 1.0

    def test_constant_feature_centers(self):
        spec = FeatureSpec(name="sttl", kind="numeric", lo=64.0, hi=64.0)
        assert spec.encode("64") == 0.5
        assert spec.encode("255") == 0.5

    def test_full_record_in_unit_interval(self):
        recs = _records()
        schema = fit_schema(recs, "unsw")
        for rec in recs:
            vec = encode(rec, schema)
            assert vec.shape == (13,)
            assert np.all(vec >= 0.0) and np.all(vec <= 1.0)

    def test_deterministic(self):
        recs = _records()
        schema = fit_schema(recs, "unsw")
        a = encode(recs[1], schema)
        b = encode(recs[1], schema)
        np.testing.assert_array_equal(a, b)

    def test_encode_does_not_mutate_schema(self):
        """Seeing new nominal values at encode time must not grow the vocab."""
        schema = fit_schema(_records(), "unsw")
        before = schema.to_dict()
        encode(_rec(9, proto="gre", srcip="172.16.0.9"), schema)
        assert schema.to_dict() == before

    def test_bad_cell_error_names_row_and_column(self):
        schema = fit_schema(_records(), "unsw")
        bad = _rec(41, Sload="fast")
        with pytest.raises(DataError, match=r"record 41.*Sload"):
            encode(bad, schema)

    def test_encode_batch_shapes(self):
        recs = _records()
        schema = fit_schema(recs, "unsw")
        x, y = encode_batch(recs, schema)
        assert x.shape == (4, 13)
        assert y.tolist() == [0, 1, 0, 1]


def _params(width=4, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    return SentencingParams(
        embed=Tensor(rng.normal(size=(width, dim)), requires_grad=True),
        bias=Tensor(rng.normal(size=(width, dim)), requires_grad=True),
        position=Tensor(rng.normal(size=(width, dim)), requires_grad=True),
    )


class TestSentence:
    def test_zero_vector_gives_bias_plus_position(self):
        """With x = 0 the embedding term vanishes."""
        p = _params()
        out = sentence(Tensor(np.zeros(4)), p)
        np.testing.assert_allclose(out.data, p.bias.data + p.position.data, rtol=0, atol=0)

    def test_token_formula(self):
        """token_j = x_j * embed_j + bias_j + position_j, row by row."""
        p = _params()
        x = np.array([0.1, 0.7, 0.0, 1.0])
        out = sentence(Tensor(x), p)
        expected = x[:, None] * p.embed.data + p.bias.data + p.position.data
        np.testing.assert_allclose(out.data, expected, rtol=0, atol=0)

    def test_batch_shape(self):
        p = _params(width=13, dim=32)
        x = np.random.default_rng(1).uniform(size=(5, 13))
        out = sentence(Tensor(x), p)
        assert out.shape == (5, 13, 32)

    def test_per_feature_locality(self):
        """Changing feature j moves token j only."""
        p = _params()
        x = np.array([0.2, 0.4, 0.6, 0.8])
        base = sentence(Tensor(x), p).data
        for j in range(4):
            bumped = x.copy()
            bumped[j] += 0.05
            out = sentence(Tensor(bumped), p).data
            changed = np.any(out != base, axis=1)
            assert changed[j]
            assert not np.any(changed[np.arange(4) != j])

    def test_gradients_reach_all_parameters(self):
        p = _params()
        x = Tensor(np.array([0.1, 0.7, 0.3, 1.0]))
        loss = T.mean_all(T.mul(sentence(x, p), sentence(x, p)))
        T.backward(loss)
        for _, t in p.named():
            assert t.grad is not None
            assert np.all(np.isfinite(t.grad))

    def test_sentence_record_leaves_tape_empty(self):
        p = _params(width=13, dim=8)
        seq = sentence_record(np.linspace(0, 1, 13), p, record_id="r7")
        assert seq.tokens.shape == (13, 8)
        assert seq.record_id == "r7"
        assert len(T.active_tape().records()) == 0
