"""Data-layer checks: generator statistics, CSV schema inference, specs."""

import numpy as np
import pytest

from deepcausal import data as D


# ------------------------------------------------------------- generator


def test_gen_salary_deterministic_csv(tmp_path):
    cfg = D.SalaryGenConfig(n=500, seed=11)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    D.gen_salary(cfg)[0].to_csv(p1)
    D.gen_salary(cfg)[0].to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_gen_salary_no_selection_means_independence():
    ds, _ = D.gen_salary(D.SalaryGenConfig(n=10_000, seed=5, beta=0.0))
    r = np.corrcoef(ds.columns["gender"], ds.columns["age"])[0, 1]
    assert abs(r) < 0.03


def test_gen_salary_calibrated_correlation():
    ds, _ = D.gen_salary(D.SalaryGenConfig(n=20_000, seed=1))
    r = np.corrcoef(ds.columns["gender"], ds.columns["age"])[0, 1]
    assert r == pytest.approx(0.29, abs=0.05)


def test_gen_salary_gap_direction():
    ds, _ = D.gen_salary(D.SalaryGenConfig(n=10_000, seed=2))
    male = ds.columns["gender"] == 1.0
    assert ds.columns["salary"][male].mean() > ds.columns["salary"][~male].mean()


def test_generator_gender_intervention_shifts_mechanisms():
    rng = lambda: np.random.default_rng(9)
    men = D._salary_batch(rng(), 20_000, gender_override=1.0)
    women = D._salary_batch(rng(), 20_000, gender_override=0.0)
    assert men["seniority"].mean() > women["seniority"].mean() + 0.2
    assert men["field"].mean() > women["field"].mean() + 0.5


def test_gen_salary_rejects_bad_config():
    with pytest.raises(D.DataError):
        D.SalaryGenConfig(n=0)
    with pytest.raises(D.DataError):
        D.SalaryGenConfig(n=10, beta=-1.0)


# ------------------------------------------------------------------ CSV


def test_load_csv_basic(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1.5,2\n")
    ds = D.load_csv(p)
    assert ds.names == ["a", "b"]
    assert ds.n == 1
    assert ds.kinds == {"a": "float", "b": "cat"}
    assert ds.columns["a"][0] == 1.5


def test_load_csv_binary_column_is_categorical(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("x\n" + "\n".join(["0", "1"] * 20) + "\n")
    assert D.load_csv(p).kinds["x"] == "cat"


def test_load_csv_wine_like_schema(tmp_path):
    rng = np.random.default_rng(3)
    cols = [f"f{i}" for i in range(11)] + ["quality"]
    lines = [",".join(cols)]
    for _ in range(50):
        feats = [repr(float(v)) for v in rng.random(11) * 10]
        lines.append(",".join(feats + [str(rng.integers(3, 9))]))
    p = tmp_path / "wine.csv"
    p.write_text("\n".join(lines) + "\n")
    ds = D.load_csv(p)
    assert len(ds.names) == 12
    assert ds.kinds["quality"] == "cat"
    assert all(ds.kinds[f] == "float" for f in cols[:11])


def test_load_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,\n")
    with pytest.raises(D.DataError, match="line 2.*'b'.*missing"):
        D.load_csv(p)
    p.write_text("a,b\n1,2,3\n")
    with pytest.raises(D.DataError, match="line 2"):
        D.load_csv(p)
    p.write_text("a\nhello\n")
    with pytest.raises(D.DataError, match="not a number"):
        D.load_csv(p)
    p.write_text("a,b\n")
    with pytest.raises(D.DataError, match="no data rows"):
        D.load_csv(p)


def test_csv_roundtrip_exact(tmp_path):
    ds, _ = D.gen_salary(D.SalaryGenConfig(n=200, seed=7))
    p = tmp_path / "s.csv"
    ds.to_csv(p)
    back = D.load_csv(p)
    assert back.names == ds.names
    assert back.kinds == ds.kinds
    for k in ds.names:
        np.testing.assert_array_equal(back.columns[k], ds.columns[k])


# ------------------------------------------------------------ graph spec


def test_complete_graph_edge_count():
    rng = np.random.default_rng(0)
    names = [f"c{i}" for i in range(5)]
    ds = D.Dataset(names, {n: rng.standard_normal(20) for n in names},
                   {n: "float" for n in names})
    spec = D.complete_graph_spec(ds, "flow")
    n_edges = sum(len(n.parents) for n in spec.nodes)
    assert n_edges == 5 * 4 // 2
    assert [len(n.parents) for n in spec.nodes] == [0, 1, 2, 3, 4]


def test_complete_graph_single_column():
    ds = D.Dataset(["x"], {"x": np.random.default_rng(0).standard_normal(10)},
                   {"x": "float"})
    spec = D.complete_graph_spec(ds, "normal")
    assert len(spec.nodes) == 1 and spec.nodes[0].parents == []
    spec.build().init_params(0)


def test_complete_graph_kinds():
    ds = D.Dataset(
        ["b", "c", "x"],
        {"b": np.array([0.0, 1.0, 1.0, 0.0]),
         "c": np.array([0.0, 1.0, 2.0, 3.0]),
         "x": np.array([0.5, 1.7, -2.2, 0.1])},
        {"b": "cat", "c": "cat", "x": "float"})
    spec = D.complete_graph_spec(ds, "ald")
    kinds = {n.name: n.kind for n in spec.nodes}
    assert kinds == {"b": "bernoulli", "c": "categorical", "x": "ald"}
    assert spec.nodes[1].options["n_classes"] == 4


def test_graph_spec_json_roundtrip_and_hash():
    spec = D.salary_graph_spec("flow", seed=4)
    text = spec.to_json()
    back = D.GraphSpec.from_json(text)
    assert back.to_json() == text
    assert back.hash() == spec.hash()
    g = back.build().init_params(1)
    assert g.confounder_names == ["stay_home"]
    assert set(g.node_names) == set(D.SALARY_COLUMNS)


def test_graph_spec_bad_version():
    with pytest.raises(D.DataError, match="version"):
        D.GraphSpec.from_json('{"version": "dcg-spec/9", "nodes": []}')
    with pytest.raises(D.DataError, match="malformed"):
        D.GraphSpec.from_json("{nope")


def test_graph_spec_unknown_kind_and_cycle():
    with pytest.raises(D.DataError, match="unknown unit kind"):
        D.GraphSpec([D.NodeSpec("a", "mystery")]).build()
    bad = D.GraphSpec([D.NodeSpec("a", "normal", ["b"]),
                       D.NodeSpec("b", "normal", ["a"])])
    with pytest.raises(D.DataError, match="cycle"):
        bad.build()
