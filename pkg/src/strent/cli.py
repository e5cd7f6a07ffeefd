"""Batch command-line interface.

Subcommands: ``train`` (fit a model, write model + per-round metrics),
``eval`` (score a saved model), ``sweep`` (grids over singleton weight /
partition size / train size, averaged over trials), ``entropy`` (entropy
quantities of a distribution under a structure) and ``gen-structure``
(emit a structure file from a circular layout, hierarchy, or graph).

Datasets are delimited text with a header row; the label column is chosen
by name and every other column must be numeric.  Structure files are YAML
documents with ``partitions:`` and ``weights:`` plus an optional
``classes:`` name manifest.  Exit codes: 0 success, 1 usage error, 2 data
error.
"""

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np
import yaml

from ._validation import check_prob_vector
from .boosting import StructuredGradientBoostingClassifier
from .entropy import shannon_entropy, structured_entropy
from .losses import log_loss, softmax
from .partitions import Partition, RandomPartition, random_block_dist
from .structures import (
    VariableGraphStructure,
    circular_structure,
    hierarchy_structure,
    read_graph_file,
    read_hierarchy_file,
)

__all__ = ["main", "read_dataset_csv", "read_structure_file", "write_structure_file"]

STRUCTURE_FORMAT = "strent-structure"
STRUCTURE_VERSION = 1


class UsageError(Exception):
    """Bad flags or flag combinations; exit code 1."""


class DataError(Exception):
    """Missing or malformed input files, incompatible data; exit code 2."""


def read_dataset_csv(path, label_name):
    """Load a delimited dataset: header row, named label column.

    Every non-label column is parsed as a float feature; labels must be
    non-negative integers.  Returns (X, y, feature_names).
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as e:
        raise DataError(f"{path}: {e.strerror}") from None
    if not rows:
        raise DataError(f"{path}: empty dataset file")
    header = [c.strip() for c in rows[0]]
    if label_name not in header:
        raise DataError(
            f"{path}: no column named {label_name!r} "
            f"(columns: {', '.join(header)})"
        )
    label_col = header.index(label_name)
    feature_cols = [j for j in range(len(header)) if j != label_col]
    if not feature_cols:
        raise DataError(f"{path}: no feature columns besides {label_name!r}")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    X = np.empty((len(rows) - 1, len(feature_cols)))
    y = np.empty(len(rows) - 1, dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        for jj, j in enumerate(feature_cols):
            try:
                X[i, jj] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: non-numeric value {row[j]!r} "
                    f"in column {header[j]!r}"
                ) from None
        try:
            label = float(row[label_col])
        except ValueError:
            raise DataError(
                f"{path}:{lineno}: non-numeric label {row[label_col]!r}"
            ) from None
        if label != int(label) or label < 0:
            raise DataError(
                f"{path}:{lineno}: label must be a non-negative integer, "
                f"got {row[label_col]!r}"
            )
        y[i] = int(label)
    names = [header[j] for j in feature_cols]
    return X, y, names


def read_structure_file(path):
    """Load a YAML structure file into (RandomPartition, class_names or None).

    Blocks may list class indices or, when a ``classes`` manifest is
    present, class names.
    """
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise DataError(f"{path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise DataError(f"{path}: not valid YAML ({e})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a mapping at top level")
    if "format" in doc and doc["format"] != STRUCTURE_FORMAT:
        raise DataError(f"{path}: not a {STRUCTURE_FORMAT} file")
    for key in ("partitions", "weights"):
        if key not in doc:
            raise DataError(f"{path}: missing {key!r}")
    classes = doc.get("classes")
    if classes is not None:
        classes = [str(c) for c in classes]
        index_of = {name: i for i, name in enumerate(classes)}
        if len(index_of) != len(classes):
            raise DataError(f"{path}: duplicate class names in manifest")

    def resolve(member):
        if isinstance(member, bool):
            raise DataError(f"{path}: bad block member {member!r}")
        if isinstance(member, int):
            return member
        if classes is None:
            raise DataError(
                f"{path}: named member {member!r} but no classes manifest"
            )
        try:
            return index_of[str(member)]
        except KeyError:
            raise DataError(f"{path}: unknown class name {member!r}") from None

    try:
        raw = [
            [[resolve(m) for m in block] for block in partition]
            for partition in doc["partitions"]
        ]
    except TypeError:
        raise DataError(f"{path}: partitions must be lists of blocks") from None
    flat = [m for partition in raw for block in partition for m in block]
    if not flat:
        raise DataError(f"{path}: no partitions given")
    k = len(classes) if classes is not None else max(flat) + 1
    try:
        parts = tuple(
            Partition(tuple(tuple(b) for b in blocks), k) for blocks in raw
        )
        rp = RandomPartition(parts, tuple(float(w) for w in doc["weights"]))
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}: {e}") from None
    return rp, classes


def write_structure_file(stream, rp, class_names=None):
    """Write a RandomPartition as a YAML structure document."""
    doc = {"format": STRUCTURE_FORMAT, "version": STRUCTURE_VERSION}
    if class_names is not None:
        doc["classes"] = list(class_names)
    doc["partitions"] = [
        [list(block) for block in part.blocks] for part, _ in rp
    ]
    doc["weights"] = [float(w) for _, w in rp]
    yaml.safe_dump(doc, stream, sort_keys=False, default_flow_style=None)


def _parse_floats(text, flag):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}")


def _parse_ints(text, flag):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")


def _single(values, flag):
    if len(values) != 1:
        raise UsageError(f"{flag} takes a single value here, got {len(values)}")
    return values[0]


def _structure_source(args):
    """The one structure source selected by flags, or None."""
    sources = [
        name
        for name, flag in [
            ("structure", args.structure),
            ("hierarchy", args.hierarchy),
            ("circular", args.circular),
            ("graph", args.graph),
        ]
        if flag is not None
    ]
    if len(sources) > 1:
        raise UsageError(
            "at most one structure source among --structure, --hierarchy, "
            "--circular, --graph"
        )
    return sources[0] if sources else None


def _hierarchy_weights(args, spec):
    """Per-level weights from --weights, or a --p0 split, or uniform."""
    if args.weights is not None:
        return _parse_floats(args.weights, "--weights")
    L = spec.num_levels
    if args.p0 is not None:
        p0 = _single(_parse_floats(args.p0, "--p0"), "--p0")
        return [p0] + [(1.0 - p0) / (L - 1)] * (L - 1)
    return [1.0 / L] * L


def _parse_circular(args):
    kw = _parse_ints(args.circular, "--circular")
    if len(kw) != 2:
        raise UsageError(f"--circular expects 'k,window', got {args.circular!r}")
    return kw


def _flag_p0(args, default=0.5):
    if args.p0 is None:
        return default
    return _single(_parse_floats(args.p0, "--p0"), "--p0")


def _resolve_structure(args, sample_seed=None):
    """Build the structure selected by flags.

    Returns (structure, class_names): None (no source), a RandomPartition,
    or for --graph a VariableGraphStructure.  With ``sample_seed`` set, a
    graph source is collapsed to one sampled RandomPartition so commands
    that need a concrete structure (eval, entropy, gen-structure) can use
    it.
    """
    source = _structure_source(args)
    if source is None:
        return None, None
    if source == "structure":
        return read_structure_file(args.structure)
    if source == "hierarchy":
        try:
            names, spec = read_hierarchy_file(args.hierarchy)
        except OSError as e:
            raise DataError(f"{args.hierarchy}: {e.strerror}") from None
        except ValueError as e:
            raise DataError(str(e)) from None
        try:
            return hierarchy_structure(spec, _hierarchy_weights(args, spec)), names
        except ValueError as e:
            raise UsageError(str(e)) from None
    if source == "circular":
        k, window = _parse_circular(args)
        try:
            return circular_structure(k, window, _flag_p0(args)), None
        except ValueError as e:
            raise UsageError(str(e)) from None
    # graph
    try:
        graph = read_graph_file(args.graph)
    except OSError as e:
        raise DataError(f"{args.graph}: {e.strerror}") from None
    except ValueError as e:
        raise DataError(str(e)) from None
    if args.partition_size is None:
        raise UsageError("--graph needs --partition-size")
    m = _single(_parse_ints(args.partition_size, "--partition-size"),
                "--partition-size")
    try:
        structure = VariableGraphStructure(graph, m, _flag_p0(args))
    except ValueError as e:
        raise UsageError(str(e)) from None
    if sample_seed is not None:
        return structure.sample(np.random.default_rng(sample_seed)), None
    return structure, None


def _seed_of(args):
    """The --seed value, or one drawn from system entropy."""
    if args.seed is not None:
        return args.seed
    return np.random.SeedSequence().entropy


def _build_model(args, structure, seed):
    model = StructuredGradientBoostingClassifier(
        n_estimators=args.rounds,
        learning_rate=args.lr,
        max_depth=args.max_depth,
        l2_regularization=args.lam,
        structure=structure,
        random_state=seed,
    )
    try:
        model._check_config()
    except ValueError as e:
        raise UsageError(str(e)) from None
    return model


def _emit(text, out_path):
    """Print a report and optionally mirror it to a file."""
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text)


def cmd_train(args):
    X, y, _ = read_dataset_csv(args.data, args.label)
    structure, _ = _resolve_structure(args)
    seed = _seed_of(args)
    model = _build_model(args, structure, seed)
    try:
        model.fit(X, y)
    except ValueError as e:
        raise DataError(str(e)) from None
    model.save(args.out)

    test_losses = None
    if args.test_data is not None:
        Xt, yt, _ = read_dataset_csv(args.test_data, args.label)
        try:
            test_losses = [
                log_loss(softmax(logits), yt)
                for logits in model.staged_predict_logits(Xt)
            ]
        except ValueError as e:
            raise DataError(str(e)) from None

    metrics_path = Path(args.out).with_suffix(".metrics.csv")
    with open(metrics_path, "w", newline="") as fh:
        fh.write(f"# seed: {seed}\n")
        writer = csv.writer(fh)
        if test_losses is None:
            writer.writerow(["round", "train_log_loss"])
            for i, tr in enumerate(model.train_log_loss_):
                writer.writerow([i + 1, repr(float(tr))])
        else:
            writer.writerow(["round", "train_log_loss", "test_log_loss"])
            for i, (tr, te) in enumerate(zip(model.train_log_loss_, test_losses)):
                writer.writerow([i + 1, repr(float(tr)), repr(float(te))])
    print(f"model: {args.out}")
    print(f"metrics: {metrics_path}")
    print(f"final_train_log_loss: {float(model.train_log_loss_[-1])!r}")
    if test_losses is not None:
        print(f"final_test_log_loss: {float(test_losses[-1])!r}")
    return 0


def cmd_eval(args):
    try:
        model = StructuredGradientBoostingClassifier.load(args.model)
    except OSError as e:
        raise DataError(f"{args.model}: {e.strerror}") from None
    except ValueError as e:
        raise DataError(str(e)) from None
    X, y, _ = read_dataset_csv(args.data, args.label)
    structure, _ = _resolve_structure(args, sample_seed=_seed_of(args))
    try:
        report = model.evaluate(X, y, structure=structure)
    except ValueError as e:
        raise DataError(str(e)) from None
    buf = io.StringIO()
    buf.write("metric,value\n")
    buf.write(f"log_loss,{report['log_loss']!r}\n")
    buf.write(f"accuracy,{report['accuracy']!r}\n")
    if structure is not None:
        buf.write(f"structured_log_loss,{report['structured_log_loss']!r}\n")
        for i, acc in enumerate(report["coarsened_accuracy"]):
            buf.write(f"coarsened_accuracy_{i},{acc!r}\n")
    _emit(buf.getvalue(), args.out)
    return 0


def _sweep_configs(args):
    """(name, structure) pairs for the sweep grid; standard loss first."""
    source = _structure_source(args)
    configs = [("standard", None)]
    if source is None:
        return configs
    p0s = _parse_floats(args.p0, "--p0") if args.p0 is not None else [0.5]
    if source == "structure":
        rp, _ = read_structure_file(args.structure)
        configs.append(("structured", rp))
    elif source == "hierarchy":
        try:
            _, spec = read_hierarchy_file(args.hierarchy)
        except (OSError, ValueError) as e:
            raise DataError(f"{args.hierarchy}: {e}") from None
        L = spec.num_levels
        for p0 in p0s:
            weights = [p0] + [(1.0 - p0) / (L - 1)] * (L - 1)
            try:
                configs.append((f"p0={p0:g}", hierarchy_structure(spec, weights)))
            except ValueError as e:
                raise UsageError(str(e)) from None
    elif source == "circular":
        k, window = _parse_circular(args)
        for p0 in p0s:
            try:
                configs.append((f"p0={p0:g}", circular_structure(k, window, p0)))
            except ValueError as e:
                raise UsageError(str(e)) from None
    else:
        try:
            graph = read_graph_file(args.graph)
        except (OSError, ValueError) as e:
            raise DataError(f"{args.graph}: {e}") from None
        if args.partition_size is None:
            raise UsageError("--graph needs --partition-size")
        ms = _parse_ints(args.partition_size, "--partition-size")
        for m in ms:
            for p0 in p0s:
                try:
                    structure = VariableGraphStructure(graph, m, p0)
                except ValueError as e:
                    raise UsageError(str(e)) from None
                # space, not comma: these names become CSV header cells
                configs.append((f"m={m} p0={p0:g}", structure))
    return configs


def cmd_sweep(args):
    if args.test_data is None:
        raise UsageError("sweep needs --test-data")
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    X, y, _ = read_dataset_csv(args.data, args.label)
    Xt, yt, _ = read_dataset_csv(args.test_data, args.label)
    configs = _sweep_configs(args)
    if args.train_sizes is not None:
        sizes = _parse_ints(args.train_sizes, "--train-sizes")
    else:
        sizes = [len(X)]
    for size in sizes:
        if not 2 <= size <= len(X):
            raise UsageError(
                f"train size {size} outside [2, {len(X)}] for this dataset"
            )
    seed = _seed_of(args)

    buf = io.StringIO()
    buf.write(f"# seed: {seed}\n")
    buf.write(f"# trials: {args.trials}\n")
    buf.write(",".join(["train_size"] + [name for name, _ in configs]) + "\n")
    for size in sizes:
        cells = []
        for _, structure in configs:
            losses = []
            for trial in range(args.trials):
                trial_seed = seed + trial
                if size < len(X):
                    picker = np.random.default_rng([trial_seed, size])
                    rows = np.sort(picker.choice(len(X), size, replace=False))
                    Xtr, ytr = X[rows], y[rows]
                else:
                    Xtr, ytr = X, y
                model = _build_model(args, structure, trial_seed)
                try:
                    model.fit(Xtr, ytr)
                    losses.append(model.evaluate(Xt, yt)["log_loss"])
                except ValueError as e:
                    raise DataError(str(e)) from None
            cells.append(repr(float(np.mean(losses))))
        buf.write(",".join([str(size)] + cells) + "\n")
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_entropy(args):
    if (args.dist is None) == (args.data is None):
        raise UsageError("entropy needs exactly one of --dist or --data")
    structure, _ = _resolve_structure(args, sample_seed=_seed_of(args))
    if args.dist is not None:
        dist = np.asarray(_parse_floats(args.dist, "--dist"))
        try:
            dist = check_prob_vector(dist)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if structure is not None and structure.num_classes != len(dist):
            raise UsageError(
                f"--dist has {len(dist)} entries but the structure covers "
                f"{structure.num_classes} classes"
            )
    else:
        _, labels, _ = read_dataset_csv(args.data, args.label)
        k = structure.num_classes if structure is not None else int(labels.max()) + 1
        if labels.max() >= k:
            raise DataError(
                f"label {labels.max()} out of range for {k}-class structure"
            )
        dist = np.bincount(labels, minlength=k) / len(labels)
    if structure is None:
        structure = RandomPartition.trivial(len(dist))
    block_dist = random_block_dist(structure, dist)
    report = {
        "shannon_entropy_nats": float(shannon_entropy(dist)),
        "shannon_entropy_bits": float(shannon_entropy(dist, base=2)),
        "structured_entropy_nats": float(structured_entropy(dist, structure)),
        "structured_entropy_bits": float(structured_entropy(dist, structure, base=2)),
        "random_block_dist": [
            {"block": list(block), "prob": float(prob)}
            for block, prob in zip(block_dist.blocks, block_dist.probs)
        ],
    }
    _emit(yaml.safe_dump(report, sort_keys=False, default_flow_style=None), args.out)
    return 0


def cmd_gen_structure(args):
    structure, names = _resolve_structure(args, sample_seed=_seed_of(args))
    if structure is None:
        raise UsageError(
            "gen-structure needs one of --structure, --hierarchy, --circular, "
            "--graph"
        )
    buf = io.StringIO()
    write_structure_file(buf, structure, class_names=names)
    _emit(buf.getvalue(), args.out)
    return 0


def _add_structure_flags(sp):
    sp.add_argument("--structure", metavar="FILE",
                    help="structure file (YAML partitions/weights)")
    sp.add_argument("--hierarchy", metavar="FILE",
                    help="hierarchy table (one row per class)")
    sp.add_argument("--circular", metavar="K,WINDOW",
                    help="circular structure over K classes, blocks of WINDOW")
    sp.add_argument("--graph", metavar="FILE",
                    help="graph file (first line k, then 'u v' edges); "
                         "resamples a partition every round when training")
    sp.add_argument("--p0", metavar="P[,P...]",
                    help="singleton weight(s); lists are for sweep")
    sp.add_argument("--partition-size", metavar="M[,M...]",
                    help="number of connected blocks for --graph")
    sp.add_argument("--weights", metavar="W,W,...",
                    help="explicit per-level weights for --hierarchy "
                         "(singleton level first)")


def _add_boost_flags(sp):
    sp.add_argument("--rounds", type=int, default=100,
                    help="boosting rounds (default 100)")
    sp.add_argument("--lr", type=float, default=0.1,
                    help="learning rate (default 0.1)")
    sp.add_argument("--max-depth", type=int, default=3,
                    help="tree depth in split levels (default 3)")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0,
                    help="L2 regularization on leaf values (default 1.0)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="strent",
        description="Structured-entropy losses for gradient boosting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model, write model and metrics files")
    p.add_argument("--data", required=True, help="training dataset (CSV)")
    p.add_argument("--test-data", help="optional test dataset for per-round metrics")
    p.add_argument("--label", default="label", help="label column name")
    _add_structure_flags(p)
    _add_boost_flags(p)
    p.add_argument("--seed", type=int, help="RNG seed (drawn if omitted)")
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on a dataset")
    p.add_argument("model", help="model file written by train")
    p.add_argument("--data", required=True, help="dataset to score (CSV)")
    p.add_argument("--label", default="label", help="label column name")
    _add_structure_flags(p)
    p.add_argument("--seed", type=int,
                   help="seed for sampling a --graph partition")
    p.add_argument("--out", help="also write the metric table here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep",
                       help="mean test log-loss over a config/size/trial grid")
    p.add_argument("--data", required=True, help="training pool (CSV)")
    p.add_argument("--test-data", required=False, help="test dataset (CSV)")
    p.add_argument("--label", default="label", help="label column name")
    _add_structure_flags(p)
    _add_boost_flags(p)
    p.add_argument("--train-sizes", metavar="N[,N...]",
                   help="training subsample sizes (default: full pool)")
    p.add_argument("--trials", type=int, default=5,
                   help="seeds averaged per cell (default 5)")
    p.add_argument("--seed", type=int, help="base seed (drawn if omitted)")
    p.add_argument("--out", help="also write the results table here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("entropy",
                       help="entropy quantities of a distribution under a structure")
    p.add_argument("--dist", metavar="P,P,...",
                   help="probability vector over classes")
    p.add_argument("--data", help="dataset whose label frequencies to use")
    p.add_argument("--label", default="label", help="label column name")
    _add_structure_flags(p)
    p.add_argument("--seed", type=int,
                   help="seed for sampling a --graph partition")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("gen-structure",
                       help="emit a structure file from a source definition")
    _add_structure_flags(p)
    p.add_argument("--seed", type=int,
                   help="seed for sampling a --graph partition")
    p.add_argument("--out", help="also write the structure file here")
    p.set_defaults(func=cmd_gen_structure)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage problems; this tool reserves 2 for data
        return 0 if not e.code else 1
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
