import csv
import io
import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from clusterval.cli import main, validate_document

IRIS = str(resources.files("clusterval").joinpath("fixtures/iris.csv"))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def load(path):
    return json.loads(Path(path).read_text())


def test_scale_unitnorm(tmp_path, capsys):
    code, out, _ = run(capsys, "scale", "--input", IRIS, "--label-col", "species",
                       "--scaler", "unitnorm", "--out-dir", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "scaled.csv")
    assert len(rows) == 150 and rows[0]["species"] == "Iris-setosa"
    X = np.array([[float(r[c]) for c in ("sepal_length", "sepal_width", "petal_length", "petal_width")] for r in rows])
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)
    validate_document(load(tmp_path / "scaler.json"), "scaler")
    assert json.loads(out)["scaler"] == "unitnorm"


def test_scale_pca_components(tmp_path, capsys):
    code, _, _ = run(capsys, "scale", "--input", IRIS, "--label-col", "species",
                     "--scaler", "pca", "--components", "2", "--out-dir", tmp_path)
    assert code == 0
    header = (tmp_path / "scaled.csv").read_text().splitlines()[0]
    assert header == "pc1,pc2,species"
    validate_document(load(tmp_path / "scaler.json"), "scaler")


def test_scale_bogus_scaler(tmp_path, capsys):
    code, _, err = run(capsys, "scale", "--input", IRIS, "--scaler", "bogus", "--out-dir", tmp_path)
    assert code == 2
    msg = json.loads(err.splitlines()[-1])
    assert msg["error"] == "usage"
    for name in ("standardize", "minmax", "maxabs", "unitnorm", "pca"):
        assert name in msg["message"]


def test_missing_input_is_runtime_error(tmp_path, capsys):
    code, _, err = run(capsys, "scale", "--input", tmp_path / "nope.csv", "--scaler", "minmax",
                       "--out-dir", tmp_path)
    assert code == 1
    assert "not found" in json.loads(err)["message"]


def test_bad_cell_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\nx,3\n")
    code, _, err = run(capsys, "scale", "--input", bad, "--scaler", "minmax", "--out-dir", tmp_path)
    assert code == 1
    msg = json.loads(err)
    assert msg["error"] == "NonNumericCellError" and "row 2" in msg["message"]


KMEANS = ["kmeans", "--input", IRIS, "--label-col", "species", "--scaler", "unitnorm",
          "--k", "3", "--seed", "7"]


def test_kmeans_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, *KMEANS, "--out-dir", tmp_path)
    assert code == 0
    for name in ("model.json", "assignments.csv", "metrics.json", "contingency.txt",
                 "contingency.csv", "class_counts.txt", "scaler.json"):
        assert (tmp_path / name).is_file(), name
    metrics = load(tmp_path / "metrics.json")
    validate_document(metrics, "kmeans_metrics")
    validate_document(load(tmp_path / "model.json"), "kmeans_model")
    assert metrics["train"]["n"] == 120 and metrics["test"]["n"] == 30
    rows = read_csv(tmp_path / "assignments.csv")
    assert len(rows) == 150
    assert sorted(int(r["row_id"]) for r in rows) == list(range(150))
    assert "Occurrence Count" in (tmp_path / "class_counts.txt").read_text()
    assert json.loads(out)["k"] == 3


@pytest.mark.xfail(
    strict=True,
    reason="seed 7 split gives train h/c/v of about 0.88; see acceptance criterion 1 analysis",
)
def test_kmeans_documented_example_scores(tmp_path, capsys):
    run(capsys, *KMEANS, "--out-dir", tmp_path)
    train = load(tmp_path / "metrics.json")["train"]
    assert min(train["homogeneity"], train["completeness"], train["v_measure"]) >= 0.9


def test_kmeans_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, *KMEANS, "--out-dir", a)
    run(capsys, *KMEANS, "--out-dir", b)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


@pytest.mark.parametrize("k", ["0", "121"])
def test_kmeans_bad_k(tmp_path, capsys, k):
    argv = [a if a != "3" else k for a in KMEANS]
    code, _, err = run(capsys, *argv, "--out-dir", tmp_path)
    assert code == 2
    assert json.loads(err)["error"] == "usage"


def test_kmeans_requires_seed(tmp_path, capsys):
    code, _, _ = run(capsys, "kmeans", "--input", IRIS, "--k", "3", "--out-dir", tmp_path)
    assert code == 2


def test_format_text_and_csv(tmp_path, capsys):
    _, out, _ = run(capsys, *KMEANS, "--out-dir", tmp_path, "--format", "text")
    assert "k: 3" in out.splitlines()
    _, out, _ = run(capsys, *KMEANS, "--out-dir", tmp_path, "--format", "csv")
    header = out.splitlines()[0]
    assert "inertia" in header.split(",")


def test_elbow(tmp_path, capsys):
    code, out, _ = run(capsys, "elbow", "--input", IRIS, "--label-col", "species", "--scaler",
                       "unitnorm", "--k-min", "2", "--k-max", "6", "--seed", "0", "--out-dir", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "inertia.csv")
    assert [int(r["k"]) for r in rows] == [2, 3, 4, 5, 6]
    doc = load(tmp_path / "elbow.json")
    validate_document(doc, "elbow")
    assert doc["suggested_k"] == json.loads(out)["suggested_k"]


def test_elbow_needs_three_points(tmp_path, capsys):
    code, _, _ = run(capsys, "elbow", "--input", IRIS, "--label-col", "species",
                       "--k-min", "3", "--k-max", "3", "--seed", "0", "--out-dir", tmp_path)
    assert code == 2


HCLUST = ["hclust", "--input", IRIS, "--label-col", "species", "--scaler", "unitnorm"]


def test_hclust_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, *HCLUST, "--linkage", "average", "--k", "3", "--out-dir", tmp_path)
    assert code == 0
    validate_document(load(tmp_path / "dendrogram.json"), "dendrogram")
    metrics = load(tmp_path / "metrics.json")
    validate_document(metrics, "hclust_metrics")
    assert metrics["n_clusters"] == 3
    nwk = (tmp_path / "dendrogram.nwk").read_text()
    assert nwk.strip().endswith(";") and nwk.count("(") == 149
    svg = (tmp_path / "dendrogram.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<path") == 149
    assert len(read_csv(tmp_path / "assignments.csv")) == 150


def test_hclust_height_cut(tmp_path, capsys):
    code, out, _ = run(capsys, *HCLUST, "--linkage", "ward", "--height", "0.5", "--out-dir", tmp_path)
    assert code == 0
    assert load(tmp_path / "metrics.json")["cut_height"] == 0.5
    assert "stroke-dasharray" in (tmp_path / "dendrogram.svg").read_text()


def test_hclust_k_and_height_conflict(tmp_path, capsys):
    code, _, err = run(capsys, *HCLUST, "--k", "3", "--height", "0.5", "--out-dir", tmp_path)
    assert code == 2
    assert "only one" in json.loads(err)["message"]


def test_hclust_compare_linkages(tmp_path, capsys):
    code, _, _ = run(capsys, *HCLUST, "--k", "3", "--compare-linkages", "--out-dir", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "linkages.csv")
    assert [r["linkage"] for r in rows] == ["single", "complete", "average", "ward"]


@pytest.mark.xfail(strict=True, reason="average is not the best linkage on unit-norm IRIS; see criterion 2")
def test_hclust_compare_linkages_average_best(tmp_path, capsys):
    run(capsys, *HCLUST, "--k", "3", "--compare-linkages", "--out-dir", tmp_path)
    rows = read_csv(tmp_path / "linkages.csv")
    best = max(rows, key=lambda r: float(r["v_measure"]))
    assert best["linkage"] == "average"


@pytest.mark.xfail(strict=True, reason="average linkage v is about 0.72 on unit-norm IRIS; see criterion 2")
def test_hclust_average_documented_v(tmp_path, capsys):
    run(capsys, *HCLUST, "--linkage", "average", "--k", "3", "--out-dir", tmp_path)
    assert load(tmp_path / "metrics.json")["train"]["v_measure"] >= 0.90


@pytest.mark.xfail(strict=True, reason="widest ward gap separates 2 clusters; see criterion 4")
def test_hclust_suggest_cut_three(tmp_path, capsys):
    run(capsys, *HCLUST, "--linkage", "ward", "--suggest-cut", "--out-dir", tmp_path)
    assert load(tmp_path / "metrics.json")["n_clusters"] == 3


def test_silhouette_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "silhouette", "--input", IRIS, "--label-col", "species",
                       "--k-min", "2", "--k-max", "6", "--seed", "0", "--out-dir", tmp_path)
    assert code == 0
    means = read_csv(tmp_path / "silhouette_means.csv")
    vals = [float(r["mean_silhouette"]) for r in means]
    for got, want in zip(vals, (0.67, 0.55, 0.50, 0.49, 0.39)):
        assert abs(got - want) <= 0.05
    samples = read_csv(tmp_path / "silhouette_samples.csv")
    assert len(samples) == 5 * 150
    for k in range(2, 7):
        assert sum(1 for r in samples if r["k"] == str(k)) == 150


def test_silhouette_from_assignments(tmp_path, capsys):
    run(capsys, *KMEANS, "--test-fraction", "0", "--out-dir", tmp_path / "km")
    code, _, _ = run(capsys, "silhouette", "--input", IRIS, "--label-col", "species", "--scaler",
                     "unitnorm", "--assignments", tmp_path / "km" / "assignments.csv",
                     "--out-dir", tmp_path)
    assert code == 0
    samples = read_csv(tmp_path / "silhouette_samples.csv")
    assert len(samples) == 150
    for c in {r["cluster"] for r in samples}:
        scores = [float(r["score"]) for r in samples if r["cluster"] == c]
        assert scores == sorted(scores, reverse=True)


def test_silhouette_k_min_one(tmp_path, capsys):
    code, _, err = run(capsys, "silhouette", "--input", IRIS, "--label-col", "species",
                       "--k-min", "1", "--k-max", "3", "--seed", "0", "--out-dir", tmp_path)
    assert code == 2
    assert "k >= 2" in json.loads(err)["message"]


def test_evaluate(tmp_path, capsys):
    run(capsys, *KMEANS, "--test-fraction", "0", "--out-dir", tmp_path / "km")
    code, out, _ = run(capsys, "evaluate", "--input", IRIS, "--label-col", "species", "--scaler",
                       "unitnorm", "--assignments", tmp_path / "km" / "assignments.csv",
                       "--out-dir", tmp_path)
    assert code == 0
    doc = load(tmp_path / "metrics.json")
    validate_document(doc, "evaluate_metrics")
    km = load(tmp_path / "km" / "metrics.json")["train"]
    assert doc["evaluate"]["v_measure"] == km["v_measure"]
    assert (tmp_path / "contingency.txt").read_text() == (tmp_path / "km" / "contingency.txt").read_text()


@pytest.mark.parametrize("algorithm, params", [
    ("kmeans", {"k": 3}),
    ("hclust", {"linkage": "ward", "k": 3}),
])
def test_pipeline(tmp_path, capsys, algorithm, params):
    manifest = {
        "input": IRIS, "label_col": "species", "scaler": "unitnorm",
        "algorithm": algorithm, "seed": 7, "out_dir": "run", "params": params,
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    code, out, _ = run(capsys, "pipeline", "--manifest", path)
    assert code == 0
    run_dir = tmp_path / "run"
    assert load(run_dir / "manifest.json") == manifest
    schema = "kmeans_metrics" if algorithm == "kmeans" else "hclust_metrics"
    validate_document(load(run_dir / "metrics.json"), schema)
    assert json.loads(out)["algorithm"] == algorithm


def test_pipeline_matches_direct_command(tmp_path, capsys):
    manifest = {"input": IRIS, "label_col": "species", "scaler": "unitnorm",
                "algorithm": "kmeans", "seed": 7, "params": {"k": 3}}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    run(capsys, "pipeline", "--manifest", path, "--out-dir", tmp_path / "p")
    run(capsys, *KMEANS, "--out-dir", tmp_path / "d")
    for name in ("model.json", "metrics.json", "assignments.csv"):
        assert (tmp_path / "p" / name).read_bytes() == (tmp_path / "d" / name).read_bytes()


def test_pipeline_rejects_bad_manifest(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"input": IRIS, "algorithm": "dbscan", "seed": 1}))
    code, _, err = run(capsys, "pipeline", "--manifest", path)
    assert code == 2
    assert "invalid manifest" in json.loads(err)["message"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "clusterval", "scale", "--input", IRIS, "--scaler", "bogus",
         "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert json.loads(proc.stderr.splitlines()[-1])["error"] == "usage"
