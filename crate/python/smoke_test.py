"""Smoke test for the pykgrefine extension module.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml
    pip install --force-reinstall target/wheels/pykgrefine-*.whl
"""

import math
import tempfile
from pathlib import Path

import pykgrefine as kr

SMALL = """
[synth]
entities = 60
base_relations = 2
facts_per_relation = 50
clusters = 2

[model]
dim = 16
type_dim = 8
label_dim = 8
epochs = 5
batch_size = 128

[feedback]
max_iter = 2
"""


def main():
    got = kr.weighted_f1([True] * 6 + [False] * 3 + [True], [True] * 8 + [False] * 2)
    assert all(math.isclose(a, b, abs_tol=1e-15) for a, b in zip(got, (0.8, 0.4, 0.72)))
    assert kr.feedback_thresholds(0.5, 0.8, 0.2) == (0.9, 0.35)

    kg = kr.KnowledgeGraph.synthetic(SMALL, seed=3)
    assert len(kg) == kg.num_facts > 0
    truth = kg.truth()
    assert truth is not None and len(truth) == kg.num_facts
    print(kg)

    with tempfile.TemporaryDirectory() as tmp:
        kg.save(Path(tmp) / "kg")
        again = kr.KnowledgeGraph.load(Path(tmp) / "kg")
        assert again.num_facts == kg.num_facts
        assert sorted(again.facts()) == sorted(kg.facts())

        scores = kr.infer(kg, SMALL)
        assert all(0.0 <= s <= 1.0 for s in scores.values())
        assert len(scores) >= kg.num_facts

        model = kr.EmbeddingModel.train(kg, SMALL, seed=3)
        triples = [(s, r, o) for s, r, o, _ in kg.facts()[:10]]
        probs = model.predict(triples)
        assert len(probs) == 10 and all(0.0 <= p <= 1.0 for p in probs)
        model.save(Path(tmp) / "model.bin")
        loaded = kr.EmbeddingModel.load(Path(tmp) / "model.bin")
        assert loaded.predict(triples) == probs
        print(model)

    reports = kr.iterate(kg, SMALL, seed=3)
    assert len(reports) == 2
    assert {"iteration", "psl_test", "model_test", "normalized_size"} <= set(reports[0])
    assert reports == kr.iterate(kg, SMALL, seed=3)

    try:
        kr.iterate(kg, "[model]\nepochz = 1\n")
    except kr.KgRefineError as e:
        assert "epochz" in str(e)
    else:
        raise AssertionError("bad config accepted")

    try:
        model.predict([("nobody", "r0", "nobody")])
    except kr.KgRefineError:
        pass
    else:
        raise AssertionError("unknown entity accepted")

    print("iteration wF1:", [round(r["model_test"]["wf1"], 3) for r in reports])
    print("ok")


if __name__ == "__main__":
    main()
