"""Command-line front end.

Five workflows over CSV files: ``cluster`` (unsupervised fit or BIC
sweep over a G range), ``classify`` (semi-supervised fit with partial
labels), ``da`` (discriminant analysis with a train/test split),
``simulate`` (synthetic scenario generation), and ``eval`` (agreement
between two label files).

Outputs are diff-able text artifacts: single-column label CSVs, a JSON
model document (exact float round-trip), and a CSV score table.  Exit
codes: 0 success, 2 input error, 3 degenerate fit, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ghmix.densities import FAMILIES, CGHDComponent, MixtureModel
from ghmix.inference import (
    DegenerateFitError,
    FitConfig,
    FitError,
    NumericFitError,
    fit,
    fit_classification,
    fit_discriminant,
    posterior_responsibilities,
)
from ghmix.labels import ari, confusion
from ghmix.selection import count_free_params, select
from ghmix.simulate import GENERATORS, ScenarioSpec, generate_scenario

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_NUMERIC = 4


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dataset ingestion


def _parse_cell(cell, path, line_no):
    try:
        return float(cell)
    except ValueError:
        raise InputError(
            f"{path}: line {line_no}: cannot parse {cell!r} as a number"
        ) from None


def read_dataset(path, delimiter=",", label_col=None, na="NA", header="auto"):
    """Load a rectangular numeric CSV, optionally peeling off a label
    column.

    ``header`` is ``auto`` (a leading non-numeric row is a header),
    ``yes``, or ``no``.  Labels map to integers with the ``na`` marker
    (or empty cell) as 0 (unlabeled).  Returns
    ``(X, labels_or_None, feature_names)``.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    rows = []
    with open(path, newline="") as fh:
        for raw in fh:
            rows.append(raw.rstrip("\n").rstrip("\r"))
    rows = [r for r in rows if r.strip() != ""]
    if not rows:
        raise InputError(f"{path}: empty file")

    cells = [r.split(delimiter) for r in rows]
    width = len(cells[0])
    for i, row in enumerate(cells):
        if len(row) != width:
            raise InputError(
                f"{path}: line {i + 1}: expected {width} fields, found {len(row)}"
            )

    def numeric(cell):
        cell = cell.strip()
        if cell == na or cell == "":
            return True
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if header == "auto":
        has_header = not all(numeric(c) for c in cells[0])
    elif header in ("yes", "no"):
        has_header = header == "yes"
    else:
        raise InputError(f"bad header mode {header!r}")
    names = [c.strip() for c in cells[0]] if has_header else [
        f"V{j + 1}" for j in range(width)
    ]
    body = cells[1:] if has_header else cells
    first_line = 2 if has_header else 1
    if not body:
        raise InputError(f"{path}: no data rows")

    label_idx = None
    if label_col is not None:
        try:
            label_idx = int(label_col)
            if not 0 <= label_idx < width:
                raise InputError(f"{path}: label column index {label_idx} out of range")
        except (TypeError, ValueError):
            if label_col not in names:
                raise InputError(
                    f"{path}: label column {label_col!r} not found in header {names}"
                ) from None
            label_idx = names.index(label_col)

    feats = []
    labels = [] if label_idx is not None else None
    for i, row in enumerate(body):
        line_no = first_line + i
        vals = []
        for j, cell in enumerate(row):
            cell = cell.strip()
            if j == label_idx:
                if cell == na or cell == "":
                    labels.append(0)
                else:
                    num = _parse_cell(cell, path, line_no)
                    if num != int(num):
                        raise InputError(
                            f"{path}: line {line_no}: label {cell!r} is not an integer"
                        )
                    labels.append(int(num))
            else:
                vals.append(_parse_cell(cell, path, line_no))
        feats.append(vals)
    X = np.asarray(feats, dtype=float)
    if not np.all(np.isfinite(X)):
        i, j = np.argwhere(~np.isfinite(X))[0]
        raise InputError(f"{path}: line {first_line + int(i)}: non-finite value")
    feat_names = [n for j, n in enumerate(names) if j != label_idx]
    return X, (np.asarray(labels, dtype=np.int64) if labels is not None else None), feat_names


def read_label_file(path, delimiter=",", na="NA"):
    """Single-column label CSV (optional header)."""
    X, labels, _ = read_dataset(path, delimiter=delimiter, label_col=0, na=na)
    if X.shape[1] != 0:
        raise InputError(f"{path}: expected a single label column")
    return labels


# ---------------------------------------------------------------------------
# model document


def model_to_document(result, config, n):
    model = result.model
    doc = {
        "schema_version": SCHEMA_VERSION,
        "family": model.family,
        "G": model.G,
        "p": model.p,
        "pi": model.pi.tolist(),
        "components": [
            {
                "mu": c.mu.tolist(),
                "gamma": c.gamma.flatten().tolist(),  # row-major
                "phi": c.phi.tolist(),
                "beta": c.beta.tolist(),
                "omega_vec": c.omega_vec.tolist(),
                "lambda_vec": c.lambda_vec.tolist(),
                "omega0": c.omega0,
                "lambda0": c.lambda0,
                "varpi": c.varpi,
            }
            for c in model.components
        ],
        "fit": {
            "seed": config.seed,
            "n_obs": int(n),
            "iterations": int(result.n_iter),
            "converged": bool(result.converged),
            "final_loglik": float(result.loglik_trace[-1]),
            "bic": float(result.bic),
        },
        "scaling": None,
    }
    if result.scaling is not None:
        mean, sd = result.scaling
        doc["scaling"] = {"mean": np.asarray(mean).tolist(),
                          "sd": np.asarray(sd).tolist()}
    return doc


def document_to_model(doc):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported model schema version {doc.get('schema_version')}")
    p = doc["p"]
    comps = [
        CGHDComponent(
            mu=c["mu"],
            gamma=np.asarray(c["gamma"], dtype=float).reshape(p, p),
            phi=c["phi"],
            beta=c["beta"],
            omega_vec=c["omega_vec"],
            lambda_vec=c["lambda_vec"],
            omega0=c["omega0"],
            lambda0=c["lambda0"],
            varpi=c["varpi"],
        )
        for c in doc["components"]
    ]
    model = MixtureModel(doc["family"], doc["pi"], comps)
    scaling = None
    if doc.get("scaling"):
        scaling = (np.asarray(doc["scaling"]["mean"], dtype=float),
                   np.asarray(doc["scaling"]["sd"], dtype=float))
    return model, scaling


def save_model(path, result, config, n):
    with open(path, "w") as fh:
        json.dump(model_to_document(result, config, n), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return document_to_model(json.load(fh))


# ---------------------------------------------------------------------------
# writers


def write_labels(path, labels):
    with open(path, "w") as fh:
        fh.write("label\n")
        for v in labels:
            fh.write(f"{int(v)}\n")


def write_predictions(path, rows, labels):
    with open(path, "w") as fh:
        fh.write("row,label\n")
        for r, v in zip(rows, labels):
            fh.write(f"{int(r) + 1},{int(v)}\n")


def write_scores(path, scores):
    with open(path, "w") as fh:
        fh.write("family,G,loglik,rho,bic,status,message\n")
        for s in scores:
            ll = "" if np.isnan(s.loglik) else repr(s.loglik)
            b = "" if np.isnan(s.bic) else repr(s.bic)
            msg = s.message.replace(",", ";").replace("\n", " ")
            fh.write(f"{s.family},{s.G},{ll},{s.rho},{b},{s.status},{msg}\n")


def write_contours(path, data, model, grid=100):
    from ghmix.densities import mixture_log_density_batch

    lo = data.min(axis=0)
    hi = data.max(axis=0)
    pad = 0.1 * (hi - lo)
    xs = np.linspace(lo[0] - pad[0], hi[0] + pad[0], grid)
    ys = np.linspace(lo[1] - pad[1], hi[1] + pad[1], grid)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dens = np.exp(mixture_log_density_batch(pts, model))
    with open(path, "w") as fh:
        fh.write("x,y,density\n")
        for (x, y), d in zip(pts, dens):
            fh.write(f"{float(x)!r},{float(y)!r},{float(d)!r}\n")


# ---------------------------------------------------------------------------
# shared argument plumbing


def _parse_g_range(text):
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise InputError(f"bad G range {text!r}") from None
        if lo < 1 or hi < lo:
            raise InputError(f"bad G range {text!r}")
        return list(range(lo, hi + 1))
    try:
        g = int(text)
    except ValueError:
        raise InputError(f"bad G value {text!r}") from None
    if g < 1:
        raise InputError(f"bad G value {text!r}")
    return [g]


def _add_fit_options(sub):
    sub.add_argument("--family", choices=FAMILIES, default="mcghd")
    sub.add_argument("--scale", action="store_true",
                     help="standardize columns before fitting (recorded in the model)")
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--max-iter", type=int, default=500)
    sub.add_argument("--epsilon", type=float, default=0.01)
    sub.add_argument("--restarts", type=int, default=1)


def _add_io_options(sub):
    sub.add_argument("--delimiter", default=",")
    sub.add_argument("--header", choices=("auto", "yes", "no"), default="auto",
                     help="whether the first row is a header (default: detect)")
    sub.add_argument("--labels-col", default=None,
                     help="label column (name or 0-based index)")
    sub.add_argument("--na", default="NA", help="unlabeled marker (default NA)")
    sub.add_argument("--out-dir", default=".", help="directory for output files")


def _config(args, G):
    return FitConfig(
        family=args.family, G=G, max_iter=args.max_iter, epsilon=args.epsilon,
        seed=args.seed, n_restarts=args.restarts, scale_data=args.scale,
    )


def _outdir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_cluster(args):
    data, truth, _ = read_dataset(args.data, delimiter=args.delimiter,
                                  label_col=args.labels_col, na=args.na,
                                  header=args.header)
    G_list = _parse_g_range(args.G)
    out = _outdir(args)

    if len(G_list) == 1:
        config = _config(args, G_list[0])
        result = fit(data, config)
        from ghmix.selection import ModelScore

        scores = [ModelScore(
            family=config.family, G=config.G,
            loglik=float(result.loglik_trace[-1]),
            rho=count_free_params(config.family, config.G, data.shape[1]),
            bic=result.bic, result=result,
        )]
    else:
        config = _config(args, G_list[0])
        best, scores = select(data, G_list, [args.family], config)
        result = best.result
        config = FitConfig(
            family=best.family, G=best.G, max_iter=args.max_iter,
            epsilon=args.epsilon, seed=args.seed, n_restarts=args.restarts,
            scale_data=args.scale,
        )

    write_labels(out / "labels.csv", result.map_labels)
    save_model(out / "model.json", result, config, len(data))
    write_scores(out / "scores.csv", scores)
    if args.contours:
        if data.shape[1] != 2:
            raise InputError("--contours requires 2-D data")
        scaled = data
        if result.scaling is not None:
            mean, sd = result.scaling
            scaled = (data - mean) / sd
        write_contours(out / "contours.csv", scaled, result.model)

    print(f"family={result.model.family} G={result.model.G} "
          f"loglik={result.loglik_trace[-1]:.6f} bic={result.bic:.6f} "
          f"iterations={result.n_iter} converged={result.converged}")
    if truth is not None and np.all(truth >= 1):
        print(f"ARI against supplied labels: {ari(result.map_labels, truth):.6f}")
    return EXIT_OK


def cmd_classify(args):
    if args.labels_col is None:
        raise InputError("classify requires --labels-col")
    data, labels, _ = read_dataset(args.data, delimiter=args.delimiter,
                                   label_col=args.labels_col, na=args.na,
                                   header=args.header)
    if labels is None:
        raise InputError("classify requires a label column")
    G_list = _parse_g_range(args.G)
    if len(G_list) != 1:
        raise InputError("classify requires a single G")
    config = _config(args, G_list[0])
    out = _outdir(args)

    result = fit_classification(data, labels, config)
    unlabeled = np.flatnonzero(labels < 1)
    write_predictions(out / "predictions.csv", unlabeled, result.map_labels[unlabeled])
    save_model(out / "model.json", result, config, len(data))
    if unlabeled.size == 0:
        print("all rows are labeled; nothing to predict")
    else:
        print(f"predicted {unlabeled.size} unlabeled rows "
              f"(loglik={result.loglik_trace[-1]:.6f}, iterations={result.n_iter})")
    return EXIT_OK


def cmd_da(args):
    if args.labels_col is None:
        raise InputError("da requires --labels-col for the training file")
    train, train_labels, names = read_dataset(args.train, delimiter=args.delimiter,
                                              label_col=args.labels_col, na=args.na,
                                              header=args.header)
    if train_labels is None or np.any(train_labels < 1):
        raise InputError("training rows must all be labeled")
    try:
        test, test_labels, _ = read_dataset(args.test, delimiter=args.delimiter,
                                            label_col=args.labels_col, na=args.na,
                                            header=args.header)
    except InputError:
        test, test_labels, _ = read_dataset(args.test, delimiter=args.delimiter,
                                            label_col=None, na=args.na,
                                            header=args.header)
    if test.shape[1] != train.shape[1]:
        raise InputError("train and test files have different feature counts")
    G_list = _parse_g_range(args.G)
    if len(G_list) != 1:
        raise InputError("da requires a single G")
    config = _config(args, G_list[0])
    out = _outdir(args)

    got = fit_discriminant(train, train_labels, test, config)
    write_labels(out / "test_labels.csv", got)
    print(f"assigned {len(got)} test rows")
    if test_labels is not None and np.all(test_labels >= 1):
        print(f"test ARI: {ari(got, test_labels):.6f}")
    return EXIT_OK


def cmd_simulate(args):
    spec = ScenarioSpec(
        generator=args.generator, p=args.p, G=args.G_count,
        n_per_component=args.n_per, hypercube_side=args.side,
        corr_range=(args.corr_min, args.corr_max),
        skew_range=(args.skew_min, args.skew_max),
        omega_fixed=args.omega, lambda_fixed=args.lam, seed=args.seed,
    )
    data, labels = generate_scenario(spec)
    out = _outdir(args)
    with open(out / "scenario_data.csv", "w") as fh:
        fh.write(",".join(f"V{j + 1}" for j in range(spec.p)) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    write_labels(out / "scenario_labels.csv", labels)
    with open(out / "scenario_spec.json", "w") as fh:
        json.dump({
            "generator": spec.generator, "p": spec.p, "G": spec.G,
            "n_per_component": spec.n_per_component,
            "hypercube_side": spec.hypercube_side,
            "corr_range": list(spec.corr_range),
            "skew_range": list(spec.skew_range),
            "omega_fixed": spec.omega_fixed, "lambda_fixed": spec.lambda_fixed,
            "seed": spec.seed,
        }, fh, indent=1)
        fh.write("\n")
    print(f"wrote {data.shape[0]} x {data.shape[1]} scenario ({spec.generator})")
    return EXIT_OK


def cmd_eval(args):
    a = read_label_file(args.pred, na=args.na)
    b = read_label_file(args.truth, na=args.na)
    if a.shape != b.shape:
        raise InputError("label files have different lengths")
    value = ari(a, b)
    table, rate = confusion(a, b)
    payload = {
        "ari": value,
        "misclassification_rate": rate,
        "confusion": table.tolist(),
    }
    if args.json:
        print(json.dumps(payload))
    else:
        print(f"ARI: {value:.6f}")
        print(f"misclassification rate (best matching): {rate:.6f}")
        print("confusion table (rows = first file, cols = second):")
        for row in table:
            print("  " + " ".join(f"{v:6d}" for v in row))
    if args.out is not None:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ghmix",
        description="Model-based clustering with generalized hyperbolic mixtures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="fit a mixture or sweep G by BIC")
    c.add_argument("--data", required=True)
    c.add_argument("--G", default="1..3", help="component count or range a..b")
    c.add_argument("--contours", action="store_true",
                   help="write a density grid for 2-D data")
    _add_fit_options(c)
    _add_io_options(c)
    c.set_defaults(func=cmd_cluster)

    c = sub.add_parser("classify", help="semi-supervised fit with partial labels")
    c.add_argument("--data", required=True)
    c.add_argument("--G", required=True)
    _add_fit_options(c)
    _add_io_options(c)
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("da", help="discriminant analysis with train/test files")
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--G", required=True)
    _add_fit_options(c)
    _add_io_options(c)
    c.set_defaults(func=cmd_da)

    c = sub.add_parser("simulate", help="generate a synthetic scenario")
    c.add_argument("--generator", choices=GENERATORS, default="gaussian")
    c.add_argument("--p", type=int, default=5)
    c.add_argument("--G", dest="G_count", type=int, default=2)
    c.add_argument("--n-per", type=int, default=200)
    c.add_argument("--side", type=float, default=50.0)
    c.add_argument("--corr-min", type=float, default=0.0)
    c.add_argument("--corr-max", type=float, default=0.6)
    c.add_argument("--skew-min", type=float, default=-6.0)
    c.add_argument("--skew-max", type=float, default=6.0)
    c.add_argument("--omega", type=float, default=1.0)
    c.add_argument("--lam", type=float, default=-0.5)
    c.add_argument("--seed", type=int, default=1)
    c.add_argument("--out-dir", default=".")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("eval", help="ARI and confusion between two label files")
    c.add_argument("--pred", required=True)
    c.add_argument("--truth", required=True)
    c.add_argument("--na", default="NA")
    c.add_argument("--json", action="store_true", help="machine-readable output")
    c.add_argument("--out", default=None, help="also write the JSON payload here")
    c.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NumericFitError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except DegenerateFitError as err:
        print(f"degenerate fit: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FitError as err:
        print(f"fit failed: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
