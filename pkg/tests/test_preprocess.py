import json
from collections import Counter

import numpy as np
import pytest

from scgnet.dataset import RawRecord
from scgnet.errors import EmptyTrainingSet
from scgnet.preprocess import (
    Pipeline,
    Standardizer,
    TransformReport,
    encode_one_hot,
    fit_one_hot,
    fit_pipeline,
    fit_standardizer,
    standardize,
)


def _rec(proto="tcp", service="http", flag="SF", duration="0", src="10"):
    feats = ["0"] * 41
    feats[0], feats[1], feats[2], feats[3], feats[4] = duration, proto, service, flag, src
    return RawRecord(tuple(feats), "normal", 1)


def test_one_hot_sorted_categories():
    spec = fit_one_hot([_rec("udp"), _rec("tcp"), _rec("icmp"), _rec("tcp")], [1])
    assert spec.categories == (("icmp", "tcp", "udp"),)
    assert spec.width == 3
    assert fit_one_hot([_rec("tcp")], [1]).width == 1


def test_one_hot_unknown_is_zero_block():
    spec = fit_one_hot([_rec("tcp"), _rec("udp")], [1])
    assert encode_one_hot(spec, _rec("tcp")).tolist() == [1.0, 0.0]
    unknown = Counter()
    assert encode_one_hot(spec, _rec("icmp"), unknown).tolist() == [0.0, 0.0]
    assert unknown[(1, "icmp")] == 1


def test_fit_on_empty_raises():
    with pytest.raises(EmptyTrainingSet):
        fit_one_hot([], [1])
    with pytest.raises(EmptyTrainingSet):
        fit_standardizer([], [0])


def test_standardizer_two_point_and_constant():
    std = fit_standardizer([_rec(duration="2"), _rec(duration="4")], [0])
    assert std.mean[0] == 3.0 and std.std[0] == 1.0
    const = fit_standardizer([_rec(duration="5")] * 3, [0])
    assert const.std[0] == 0.0
    assert standardize(const, 123.0, 0) == 0.0


def test_standardize_substitution():
    std = Standardizer((0,), np.array([5.0]), np.array([2.0]))
    assert standardize(std, 9.0, 0) == 2.0
    assert standardize(std, 5.0, 0) == 0.0


def test_standardizer_matches_two_pass_oracle(fixture_records):
    std = fit_standardizer(fixture_records, [0, 4, 22])
    for j, col in enumerate([0, 4, 22]):
        vals = [float(r.features[col]) for r in fixture_records]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        assert std.mean[j] == pytest.approx(mean, rel=1e-12)
        assert std.std[j] == pytest.approx(var**0.5, rel=1e-12)


def test_layout_and_width(fixture_pipeline, fixture_records):
    X = fixture_pipeline.transform(fixture_records)
    assert X.dtype == np.float32
    assert X.shape == (500, 122)
    assert fixture_pipeline.encoder.width == 84
    names = fixture_pipeline.feature_names()
    assert names[0] == "duration" and names[38] == "protocol_type=icmp"
    blocks = np.split(X[:, 38:], np.cumsum([3, 70])[:2], axis=1)
    for b in blocks:
        assert set(np.unique(b)) <= {0.0, 1.0}
        assert (b.sum(axis=1) == 1).all()


def test_transform_moments(fixture_pipeline, fixture_records):
    X = fixture_pipeline.transform(fixture_records).astype(np.float64)[:, :38]
    std = fixture_pipeline.standardizer.std
    live = std > 0
    assert np.abs(X[:, live].mean(axis=0)).max() < 1e-4
    assert np.abs(X[:, live].std(axis=0) - 1).max() < 1e-4
    assert (X[:, ~live] == 0).all()


def test_round_trip_inverse(fixture_pipeline, fixture_records):
    # the scalar map is float64; the float32 matrix only keeps ~7 significant digits
    st = fixture_pipeline.standardizer
    worst = 0.0
    for rec in fixture_records[::7]:
        for col, y in zip(st.columns, rec.numeric_values()):
            tau, nu = st.std[st.position(col)], st.mean[st.position(col)]
            if tau == 0:
                continue
            back = tau * standardize(st, y, col) + nu
            worst = max(worst, abs(back - y) / max(abs(y), 1e-9) if abs(back - y) > 1e-9 else 0.0)
    assert worst < 1e-5


def test_transform_pure_and_test_does_not_refit(fixture_pipeline, fixture_records):
    before = fixture_pipeline.fingerprint()
    a = fixture_pipeline.transform(fixture_records[:50])
    report = TransformReport()
    fixture_pipeline.transform([_rec(service="never_seen")], report)
    b = fixture_pipeline.transform(fixture_records[:50])
    assert np.array_equal(a, b)
    assert fixture_pipeline.fingerprint() == before
    assert report.n_unknown == 1
    assert report.unknown_by_column() == {"service": {"never_seen": 1}}
    assert fixture_pipeline.transform([]).shape == (0, 122)


def test_pipeline_persistence(tmp_path, fixture_pipeline, fixture_records):
    path = tmp_path / "pipeline.json"
    fixture_pipeline.save(path)
    back = Pipeline.load(path)
    assert back.to_json() == fixture_pipeline.to_json()
    assert np.array_equal(back.transform(fixture_records), fixture_pipeline.transform(fixture_records))
    assert json.loads(path.read_text())["width"] == 122


def test_nonnegative_view(fixture_pipeline, fixture_records):
    V = fixture_pipeline.transform_nonnegative(fixture_records)
    assert V.shape == (500, 122)
    assert V.min() >= 0.0 and V.max() <= 1.0


def test_fit_pipeline_on_fixture_width(fixture_records):
    assert fit_pipeline(fixture_records).width == 122
