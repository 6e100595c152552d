import json

import numpy as np
import pytest

from sqba import data, nn
from sqba.errors import DataError, InputError
from sqba.harness import (
    AttackRecord,
    ExperimentSpec,
    build_table,
    decode_improvements,
    emit_report,
    prepare_eval_set,
    read_asr_csv,
    read_attacks_csv,
    run_attacks,
)
from sqba.train import TrainConfig, train


def _record(imps, verified=True, example=0):
    return AttackRecord("sqba", "s", example, 0, 0, 0, imps[-1][1] if imps else 1.0, True, verified, imps, "")


def test_success_at_uses_checkpoints():
    r = _record([(20, 0.3), (90, 0.12), (240, 0.08)])
    assert r.success_at(100, 0.1) is None
    assert r.success_at(250, 0.1) == (240, 0.08)
    assert _record([(5, 0.01)], verified=False).success_at(1000, 0.1) is None


def test_table_rows_are_nested():
    recs = [_record([(20, 0.05)], example=0), _record([(300, 0.09)], example=1), _record([(50, 0.5)], example=2)]
    table = build_table(recs, [10, 100, 500])
    assert [table.asr("sqba", "s", b) for b in (10, 100, 500)] == pytest.approx([0.0, 100 / 3, 200 / 3])
    assert table.rows[("sqba", "s")][500]["mean_queries_on_success"] == 160


def test_improvements_codec():
    imps = [(3, 0.5), (17, 0.123456789012)]
    text = ";".join(f"{q}:{r:.10g}" for q, r in imps)
    assert decode_improvements(text) == [(3, 0.5), (17, 0.123456789)]
    assert decode_improvements("") == []


def test_spec_validation(tmp_path):
    with pytest.raises(InputError):
        ExperimentSpec("t", [], "d", query_budgets=[250, 100])
    with pytest.raises(InputError):
        ExperimentSpec("t", [], "d", methods=["nes"])
    (tmp_path / "sub").mkdir()
    cfg = tmp_path / "sub" / "exp.json"
    cfg.write_text(json.dumps({"target": "t.bin", "surrogates": ["s.bin"], "dataset": "../d.bin"}))
    spec = ExperimentSpec.from_json(cfg)
    assert spec.target == str(tmp_path / "sub" / "t.bin")
    assert spec.dataset == str(tmp_path / "d.bin")


@pytest.fixture(scope="module")
def small_setup():
    ds = data.synthetic(400, num_classes=3, size=8, seed=1)
    target = nn.mlp(ds.shape, 3, hidden=(24,), seed=0)
    surrogate = nn.mlp(ds.shape, 3, hidden=(16,), seed=1)
    for net in (target, surrogate):
        train(net, ds.images, ds.labels, TrainConfig(epochs=6, lr=5e-3))
    return target, surrogate, ds


def test_prepare_eval_set(small_setup):
    target, _, ds = small_setup
    sub, idx = prepare_eval_set(target, ds, 10, seed=3)
    assert np.all(np.diff(idx) > 0)
    assert np.all(target.predict(sub.images) == sub.labels)
    again, idx2 = prepare_eval_set(target, ds, 10, seed=3)
    np.testing.assert_array_equal(idx, idx2)
    with pytest.raises(DataError):
        prepare_eval_set(target, ds, len(ds) + 1)


def test_run_attacks_report_roundtrip(small_setup, tmp_path):
    target, surrogate, ds = small_setup
    sub, idx = prepare_eval_set(target, ds, 4, seed=0)
    recs = run_attacks(target, {"s": surrogate}, sub, idx, ["sqba", "hsja"], 150, seed=2)
    assert [(r.method, r.example) for r in recs] == sorted((r.method, r.example) for r in recs)
    table = build_table(recs, [50, 150])
    paths = emit_report(table, recs, tmp_path)
    back = read_asr_csv(paths["asr"])
    assert back.budgets == [50, 150]
    for key, cells in table.rows.items():
        for b, cell in cells.items():
            assert back.rows[key][b]["asr"] == pytest.approx(cell["asr"])
    for r, q in zip(recs, read_attacks_csv(paths["attacks"])):
        assert (r.example, r.success, r.first_success_query) == (q.example, q.success, q.first_success_query)
        assert [a for a, _ in r.improvements] == [a for a, _ in q.improvements]
    assert paths["traces"].read_text().startswith("method,surrogate,example,t,")


def test_parallel_matches_serial(small_setup):
    target, surrogate, ds = small_setup
    sub, idx = prepare_eval_set(target, ds, 3, seed=0)
    a = run_attacks(target, {"s": surrogate}, sub, idx, ["sqba"], 80, seed=1)
    b = run_attacks(target, {"s": surrogate}, sub, idx, ["sqba"], 80, seed=1, workers=2)
    assert [(r.improvements, r.final_rho) for r in a] == [(r.improvements, r.final_rho) for r in b]
