"""``clusterval`` command-line interface.

Every subcommand writes plain files (CSV, JSON, text, Newick, SVG) into
``--out-dir`` and prints a short summary on stdout in ``--format``.
Exit status: 0 on success, 2 on usage errors, 1 on data/runtime errors.
Errors go to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource

from . import hclust, kmeans, scaling, validation
from .dataset import SplitSpec, class_counts, format_class_counts, load_csv, train_test_split
from .errors import ClusterValError, InvalidParameterError

SCALER_CHOICES = ("none",) + scaling.SCALER_KINDS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", f"{self.prog}: {message}")
        raise SystemExit(2)


def _emit_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.write_text(text, encoding="utf-8", newline="")
    return str(path)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt_float(x):
    return repr(float(x))


def load_schema(name):
    text = resources.files("clusterval").joinpath(f"schemas/{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_document(doc, name):
    """Validate ``doc`` against a shipped schema; raises ``jsonschema.ValidationError``."""
    folder = resources.files("clusterval").joinpath("schemas")
    resources_ = []
    for entry in folder.iterdir():
        if entry.name.endswith(".schema.json"):
            contents = json.loads(entry.read_text("utf-8"))
            resources_.append((entry.name, Resource.from_contents(contents)))
    registry = Registry().with_resources(resources_)
    schema = load_schema(name)
    jsonschema.Draft202012Validator(schema, registry=registry).validate(doc)


# ---------------------------------------------------------------------------
# shared steps


def _load(args):
    path = Path(args.input)
    if not path.is_file():
        raise ClusterValError(f"input file not found: {path}")
    return load_csv(path.read_text(encoding="utf-8"), label_column=args.label_col)


def _split(args, ds):
    frac = args.test_fraction
    if frac == 0:
        return ds, None
    if args.seed is None:
        raise UsageError("--seed is required when --test-fraction > 0")
    try:
        spec = SplitSpec(test_fraction=frac, seed=args.seed)
    except ClusterValError as exc:
        raise UsageError(str(exc)) from None
    return train_test_split(ds, spec)


def _scale(args, train, test=None):
    """Fit the scaler on ``train`` and apply it to both parts."""
    if args.scaler == "none":
        return None, train, test
    model = scaling.fit_scaler(args.scaler, train.matrix, n_components=args.components)
    names = model.output_names(train.feature_names)
    train = train.with_matrix(scaling.transform(model, train.matrix), names)
    if test is not None and test.n_rows:
        test = test.with_matrix(scaling.transform(model, test.matrix), names)
    return model, train, test


def _summary(args, payload):
    fmt = args.format
    if fmt == "json":
        sys.stdout.write(_dump_json(payload))
    elif fmt == "csv":
        flat = {k: v for k, v in payload.items() if not isinstance(v, (dict, list))}
        sys.stdout.write(_csv_text(list(flat), [list(flat.values())]))
    else:
        for key in sorted(payload):
            value = payload[key]
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            sys.stdout.write(f"{key}: {value}\n")


def _assignment_rows(parts):
    rows = []
    for split_name, ds, labels in parts:
        for i, row_id in enumerate(ds.row_ids):
            row = [row_id, split_name, int(labels[i])]
            if ds.labels is not None:
                row.append(ds.labels[i])
            rows.append(row)
    return rows


def _write_assignments(out_dir, parts):
    header = ["row_id", "split", "cluster"]
    if parts[0][1].labels is not None:
        header.append("label")
    return _write(out_dir, "assignments.csv", _csv_text(header, _assignment_rows(parts)))


def _report(ds, labels, inertia=None):
    return validation.MetricReport.build(ds.matrix, labels, ds.labels, inertia=inertia).to_dict()


def _write_tables(out_dir, ds, labels, stem="contingency"):
    if ds.labels is None:
        return
    table = validation.contingency(ds.labels, labels)
    class_header = "Species" if ds.label_name is None else ds.label_name
    _write(out_dir, f"{stem}.txt", table.to_text(class_header=class_header))
    _write(out_dir, f"{stem}.csv", table.to_csv())


# ---------------------------------------------------------------------------
# subcommands


def cmd_scale(args):
    ds = _load(args)
    model, scaled, _ = _scale(args, ds)
    if model is None:
        raise UsageError("scale needs a --scaler other than 'none'")
    header = list(scaled.feature_names)
    rows = [[_fmt_float(v) for v in row] for row in scaled.matrix]
    if ds.labels is not None:
        header.append(ds.label_name)
        rows = [r + [lab] for r, lab in zip(rows, ds.labels)]
    _write(args.out_dir, "scaled.csv", _csv_text(header, rows))
    _write(args.out_dir, "scaler.json", model.to_json())
    return {"command": "scale", "scaler": model.kind, "n_rows": ds.n_rows, "n_cols": scaled.n_cols}


def _kmeans_config(args, k):
    return kmeans.KMeansConfig(
        k=k, init=args.init, n_init=args.n_init, max_iter=args.max_iter, tol=args.tol, seed=args.seed
    )


def run_kmeans(args, ds):
    train, test = _split(args, ds)
    if args.k < 1 or args.k > train.n_rows:
        raise UsageError(f"--k must be in [1, {train.n_rows}] (training rows), got {args.k}")
    scaler, train, test = _scale(args, train, test)
    model = kmeans.fit_kmeans(_kmeans_config(args, args.k), train.matrix)
    out = args.out_dir
    parts = [("train", train, model.assignments)]
    metrics = {"k": args.k, "scaler": args.scaler, "train": _report(train, model.assignments, model.inertia)}
    metrics["train"]["mean_wss"] = kmeans.mean_wss(model, train.matrix)
    if test is not None and test.n_rows:
        test_labels = kmeans.predict(model, test.matrix)
        parts.append(("test", test, test_labels))
        test_inertia = float(np.sum((test.matrix - model.centroids[test_labels]) ** 2))
        metrics["test"] = _report(test, test_labels, test_inertia)
    if scaler is not None:
        _write(out, "scaler.json", scaler.to_json())
    _write(out, "model.json", model.to_json())
    _write_assignments(out, parts)
    _write(out, "metrics.json", _dump_json(metrics))
    _write_tables(out, train, model.assignments)
    if train.labels is not None:
        _write(out, "class_counts.txt", format_class_counts(class_counts(train.labels)))
    summary = {"command": "kmeans", "k": args.k, "inertia": model.inertia, "n_iter": model.n_iter}
    for key in ("homogeneity", "completeness", "v_measure", "accuracy", "silhouette"):
        if key in metrics["train"]:
            summary[key] = metrics["train"][key]
    return summary


def cmd_kmeans(args):
    return run_kmeans(args, _load(args))


def cmd_elbow(args):
    if args.k_min < 1:
        raise UsageError("--k-min must be >= 1")
    if args.k_max - args.k_min < 2:
        raise UsageError("elbow needs at least 3 k values (k-max - k-min >= 2)")
    ds = _load(args)
    train, _ = _split(args, ds)
    if args.k_max > train.n_rows:
        raise UsageError(f"--k-max must be <= {train.n_rows} (rows)")
    _, train, _ = _scale(args, train)
    curve = kmeans.inertia_curve(
        train.matrix, range(args.k_min, args.k_max + 1), _kmeans_config(args, 1)
    )
    knee = kmeans.detect_knee(curve)
    _write(args.out_dir, "inertia.csv", _csv_text(["k", "inertia"], [[k, _fmt_float(v)] for k, v in curve]))
    result = {
        "k_min": args.k_min,
        "k_max": args.k_max,
        "suggested_k": knee,
        "curve": [{"k": k, "inertia": v} for k, v in curve],
    }
    _write(args.out_dir, "elbow.json", _dump_json(result))
    return {"command": "elbow", "suggested_k": knee, "n_points": len(curve)}


def run_hclust(args, ds):
    chosen = [args.k is not None, args.height is not None, bool(args.suggest_cut)]
    if sum(chosen) > 1:
        raise UsageError("give only one of --k, --height, --suggest-cut")
    if args.compare_linkages and args.k is None:
        raise UsageError("--compare-linkages needs --k")
    if not any(chosen) and not args.compare_linkages:
        raise UsageError("one of --k, --height or --suggest-cut is required")
    if args.height is not None and args.height < 0:
        raise UsageError("--height must be >= 0")
    train, _ = _split(args, ds)
    if args.k is not None and not 1 <= args.k <= train.n_rows:
        raise UsageError(f"--k must be in [1, {train.n_rows}], got {args.k}")
    scaler, train, _ = _scale(args, train)
    out = args.out_dir
    summary = {"command": "hclust", "linkage": args.linkage}

    if args.compare_linkages:
        if train.labels is None:
            raise UsageError("--compare-linkages needs --label-col")
        rows = validation.linkage_comparison(train.matrix, train.labels, args.k)
        _write(
            out,
            "linkages.csv",
            _csv_text(
                ["linkage", "homogeneity", "completeness", "v_measure"],
                [[name, _fmt_float(s.homogeneity), _fmt_float(s.completeness), _fmt_float(s.v_measure)]
                 for name, s in rows],
            ),
        )
        summary["best_linkage"] = max(rows, key=lambda r: r[1].v_measure)[0]
        if not any(chosen):
            return summary

    dend = hclust.agglomerate(train.matrix, args.linkage)
    cut = None
    if args.k is not None:
        labels = hclust.cut_by_count(dend, args.k)
    elif args.height is not None:
        cut = args.height
        labels = hclust.cut_by_height(dend, cut)
    else:
        cut, _ = hclust.suggest_cut(dend)
        labels = hclust.cut_by_height(dend, cut)
    if scaler is not None:
        _write(out, "scaler.json", scaler.to_json())
    names = [str(r) for r in train.row_ids]
    _write(out, "dendrogram.json", dend.to_json())
    _write(out, "dendrogram.nwk", hclust.to_newick(dend, names) + "\n")
    _write(out, "dendrogram.svg", hclust.to_svg(dend, cut_height=cut, leaf_names=names))
    _write_assignments(out, [("train", train, labels)])
    n_clusters = int(labels.max()) + 1
    metrics = {"linkage": args.linkage, "n_clusters": n_clusters, "train": _report(train, labels)}
    if cut is not None:
        metrics["cut_height"] = cut
    _write(out, "metrics.json", _dump_json(metrics))
    _write_tables(out, train, labels)
    summary["n_clusters"] = n_clusters
    if cut is not None:
        summary["cut_height"] = cut
    for key in ("homogeneity", "completeness", "v_measure", "accuracy"):
        if key in metrics["train"]:
            summary[key] = metrics["train"][key]
    return summary


def cmd_hclust(args):
    return run_hclust(args, _load(args))


def _read_assignments(path, n):
    path = Path(path)
    if not path.is_file():
        raise ClusterValError(f"assignments file not found: {path}")
    rows = list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))
    if not rows or "cluster" not in rows[0]:
        raise ClusterValError("assignments CSV needs a 'cluster' column")
    if "row_id" in rows[0]:
        rows.sort(key=lambda r: int(r["row_id"]))
    labels = np.array([int(r["cluster"]) for r in rows], dtype=np.intp)
    if len(labels) != n:
        raise ClusterValError(f"assignments cover {len(labels)} rows, input has {n}")
    return labels


def _silhouette_rows(k, labels, scores):
    rows = []
    for cluster in np.unique(labels):
        vals = np.sort(scores[labels == cluster])[::-1]
        rows.extend([k, int(cluster), _fmt_float(v)] for v in vals)
    return rows


def cmd_silhouette(args):
    sweep = args.k_min is not None or args.k_max is not None
    if sweep == (args.assignments is not None):
        raise UsageError("give either --k-min/--k-max or --assignments")
    ds = _load(args)
    _, ds, _ = _scale(args, ds)
    samples, means = [], []
    if sweep:
        if args.k_min is None or args.k_max is None:
            raise UsageError("--k-min and --k-max go together")
        if args.k_min < 2:
            raise UsageError("silhouette needs k >= 2 (--k-min must be >= 2)")
        if args.k_max < args.k_min or args.k_max > ds.n_rows:
            raise UsageError(f"need k-min <= k-max <= {ds.n_rows}")
        if args.seed is None:
            raise UsageError("--seed is required for a k sweep")
        for k in range(args.k_min, args.k_max + 1):
            cfg = replace(_kmeans_config(args, k), seed=kmeans.derive_seed(args.seed, k))
            labels = kmeans.fit_kmeans(cfg, ds.matrix).assignments
            res = validation.silhouette(ds.matrix, labels)
            means.append([k, _fmt_float(res.mean)])
            samples.extend(_silhouette_rows(k, labels, res.scores))
    else:
        labels = _read_assignments(args.assignments, ds.n_rows)
        k = len(np.unique(labels))
        if k < 2:
            raise UsageError("assignments contain a single cluster; silhouette needs k >= 2")
        res = validation.silhouette(ds.matrix, labels)
        means.append([k, _fmt_float(res.mean)])
        samples.extend(_silhouette_rows(k, labels, res.scores))
    _write(args.out_dir, "silhouette_means.csv", _csv_text(["k", "mean_silhouette"], means))
    _write(args.out_dir, "silhouette_samples.csv", _csv_text(["k", "cluster", "score"], samples))
    return {"command": "silhouette", "means": {str(k): float(v) for k, v in means}}


def cmd_evaluate(args):
    ds = _load(args)
    labels = _read_assignments(args.assignments, ds.n_rows)
    _, ds, _ = _scale(args, ds)
    metrics = _report(ds, labels)
    _write(args.out_dir, "metrics.json", _dump_json({"evaluate": metrics}))
    _write_tables(args.out_dir, ds, labels)
    return {"command": "evaluate", **metrics}


_MANIFEST_DEFAULTS = {
    "label_col": None,
    "scaler": "none",
    "components": None,
    "test_fraction": 0.2,
    "params": {},
}


def cmd_pipeline(args):
    path = Path(args.manifest)
    if not path.is_file():
        raise ClusterValError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ClusterValError(f"manifest is not valid JSON: {exc}") from None
    try:
        validate_document(manifest, "manifest")
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid manifest: {exc.message}") from None
    m = {**_MANIFEST_DEFAULTS, **manifest}
    input_path = Path(m["input"])
    if not input_path.is_absolute():
        input_path = path.parent / input_path
    out_dir = Path(args.out_dir or m.get("out_dir") or ".")
    if not out_dir.is_absolute() and args.out_dir is None:
        out_dir = path.parent / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    p = m["params"]
    ns = argparse.Namespace(
        input=str(input_path),
        label_col=m["label_col"],
        scaler=m["scaler"],
        components=m["components"],
        test_fraction=m["test_fraction"],
        seed=m["seed"],
        out_dir=str(out_dir),
        format=args.format,
        k=p.get("k"),
        init=p.get("init", "k-means++"),
        n_init=p.get("n_init", 10),
        max_iter=p.get("max_iter", 300),
        tol=p.get("tol", 1e-4),
        linkage=p.get("linkage", "average"),
        height=p.get("height"),
        suggest_cut=p.get("suggest_cut", False),
        compare_linkages=p.get("compare_linkages", False),
    )
    ds = _load(ns)
    if m["algorithm"] == "kmeans":
        if ns.k is None:
            raise UsageError("kmeans pipeline needs params.k")
        summary = run_kmeans(ns, ds)
    else:
        summary = run_hclust(ns, ds)
    _write(out_dir, "manifest.json", _dump_json(manifest))
    return {"command": "pipeline", "algorithm": m["algorithm"], **{k: v for k, v in summary.items() if k != "command"}}


# ---------------------------------------------------------------------------
# parser


def _positive_fraction(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError("must be in [0, 1)")
    return value


def _unsigned(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="CSV file with a header row")
    common.add_argument("--label-col", default=None, help="class-label column name or index")
    common.add_argument("--scaler", choices=SCALER_CHOICES, default="none")
    common.add_argument("--components", type=int, default=None, help="PCA component count")
    common.add_argument("--out-dir", "--out", dest="out_dir", required=True)
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--seed", type=_unsigned, default=None)
    split.add_argument("--test-fraction", type=_positive_fraction, default=0.0)

    km = argparse.ArgumentParser(add_help=False)
    km.add_argument("--init", choices=kmeans.INIT_METHODS, default="k-means++")
    km.add_argument("--n-init", type=int, default=10)
    km.add_argument("--max-iter", type=int, default=300)
    km.add_argument("--tol", type=float, default=1e-4)

    parser = _Parser(prog="clusterval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scale", parents=[common], help="scale features")
    p.set_defaults(func=cmd_scale, seed=None, test_fraction=0.0)

    p = sub.add_parser("kmeans", parents=[common, km], help="fit k-means on the train split")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=_unsigned, required=True)
    p.add_argument("--test-fraction", "--split", dest="test_fraction", type=_positive_fraction, default=0.2)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("elbow", parents=[common, km], help="inertia curve and knee")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--seed", type=_unsigned, required=True)
    p.add_argument("--test-fraction", type=_positive_fraction, default=0.0)
    p.set_defaults(func=cmd_elbow)

    p = sub.add_parser("hclust", parents=[common, split], help="agglomerative clustering")
    p.add_argument("--linkage", choices=hclust.LINKAGES, default="average")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--height", type=float, default=None)
    p.add_argument("--suggest-cut", action="store_true")
    p.add_argument("--compare-linkages", action="store_true")
    p.set_defaults(func=cmd_hclust)

    p = sub.add_parser("silhouette", parents=[common, km], help="silhouette scores")
    p.add_argument("--k-min", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--assignments", default=None, help="CSV with a 'cluster' column")
    p.add_argument("--seed", type=_unsigned, default=None)
    p.set_defaults(func=cmd_silhouette, test_fraction=0.0)

    p = sub.add_parser("evaluate", parents=[common], help="score existing assignments")
    p.add_argument("--assignments", required=True)
    p.set_defaults(func=cmd_evaluate, seed=None, test_fraction=0.0)

    p = sub.add_parser("pipeline", help="scale, cluster and validate from a JSON manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", "--out", dest="out_dir", default=None)
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        if getattr(args, "out_dir", None) is not None:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        summary = args.func(args)
    except (UsageError, InvalidParameterError) as exc:
        _emit_error("usage", str(exc))
        return 2
    except (ClusterValError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    _summary(args, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
