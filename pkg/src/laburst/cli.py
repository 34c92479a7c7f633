"""``laburst`` command line: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import MODEL_SCHEMA_VERSION, __version__

log = logging.getLogger("laburst")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# built-in values for options that may also come from a config file
DEFAULTS = {
    "delta": 60, "omega": 180, "k": 10, "tau": 2, "rho": 2, "min_count": 5,
    "rng_seed": 0, "threads": os.cpu_count() or 1, "folds": 10, "theta": 0.9,
    "forest_trees": 1024, "forest_features": 2, "svm_c": 64.0, "svm_gamma": 0.0625,
    "stages": 2, "negative_windows": 40,
    "duration": 1800, "rate": 66.0, "bursts": 5, "burst_length": "60",
    "intensity": 20.0, "volume_boost": 1.0, "first": 360, "every": 300, "variants": 5,
    "vocab_size": 5000, "planted_rate": 0.005, "name": "synth",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="flat key=value file; flags override it")
    g.add_argument("--delta", type=int, help="slice length in seconds")
    g.add_argument("--omega", type=int, help="window length in seconds")
    g.add_argument("--k", type=int, help="history length in windows")
    g.add_argument("--tau", type=int, help="ground-truth relaxation in slices")
    g.add_argument("--rho", type=float, help="detection threshold")
    g.add_argument("--min-count", dest="min_count", type=int, help="candidate token floor")
    g.add_argument("--lexicon", help="seed-token file (default: shipped list)")
    g.add_argument("--lexicon-group", dest="lexicon_group", help="one '# heading' group")
    g.add_argument("--rng-seed", dest="rng_seed", type=int)
    g.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    g.add_argument("-v", "--verbose", action="store_true")


def _model_opts(p):
    p.add_argument("--forest-trees", dest="forest_trees", type=int)
    p.add_argument("--forest-features", dest="forest_features", type=int)
    p.add_argument("--svm-c", dest="svm_c", type=float)
    p.add_argument("--svm-gamma", dest="svm_gamma", type=float)
    p.add_argument("--stages", type=int, help="boosting stages (forest, svm, ...)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="laburst", description="Language-agnostic burst detection.")
    parser.add_argument("--version", action="version",
                        version=f"laburst {__version__} (model schema {MODEL_SCHEMA_VERSION})")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic stream and its ground truth")
    _common(p)
    p.add_argument("--output", help="messages JSON-lines path")
    p.add_argument("--truth", help="ground-truth CSV path")
    p.add_argument("--spec", help="JSON file holding a full generator config")
    p.add_argument("--duration", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--bursts", type=int)
    p.add_argument("--tokens", help="comma-separated seed words to plant")
    p.add_argument("--variants", type=int, help="surface variants per seed word")
    p.add_argument("--burst-length", dest="burst_length",
                   help="seconds; a comma list cycles across bursts")
    p.add_argument("--intensity", type=float)
    p.add_argument("--volume-boost", dest="volume_boost", type=float)
    p.add_argument("--first", type=int, help="first burst start, seconds")
    p.add_argument("--every", type=int, help="seconds between burst starts")
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--planted-rate", dest="planted_rate", type=float)
    p.add_argument("--name")

    p = sub.add_parser("features", help="write per-window feature vectors")
    _common(p)
    p.add_argument("--input", help="messages JSON-lines")
    p.add_argument("--output", help="feature CSV path")

    p = sub.add_parser("train", help="harvest labeled tokens and fit the ensemble")
    _common(p)
    p.add_argument("--input", action="append", help="training stream (repeatable)")
    p.add_argument("--truth", help="ground-truth CSV")
    p.add_argument("--training", help="read labeled vectors from this CSV instead")
    p.add_argument("--training-output", dest="training_output",
                   help="also write the labeled vectors here")
    p.add_argument("--model", help="output model path")
    p.add_argument("--exclude", action="append", default=None,
                   help="feature family to leave out (repeatable)")
    p.add_argument("--negative-windows", dest="negative_windows", type=int)
    _model_opts(p)

    p = sub.add_parser("gridsearch", help="cross-validated hyperparameter search")
    _common(p)
    p.add_argument("--training", help="labeled CSV from 'train --training-output'")
    p.add_argument("--output", help="results JSON path")
    p.add_argument("--folds", type=int)
    p.add_argument("--family", action="append", choices=("svm", "forest"))
    p.add_argument("--svm-c-exp", dest="svm_c_exp", help="exponent range lo:hi (base 2)")
    p.add_argument("--svm-gamma-exp", dest="svm_gamma_exp")
    p.add_argument("--trees-exp", dest="trees_exp")
    p.add_argument("--features-exp", dest="features_exp")

    p = sub.add_parser("selftrain", help="add confident positives from unlabeled streams")
    _common(p)
    p.add_argument("--model", help="starting model")
    p.add_argument("--training", help="labeled CSV the model was fit on")
    p.add_argument("--input", action="append", help="unlabeled stream (repeatable)")
    p.add_argument("--theta", type=float, help="confidence needed to add a positive")
    p.add_argument("--output", help="refit model path")
    p.add_argument("--training-output", dest="training_output")
    _model_opts(p)

    p = sub.add_parser("detect", help="score a stream and flag key moments")
    _common(p)
    p.add_argument("--model", help="trained model")
    p.add_argument("--input", help="messages JSON-lines")
    p.add_argument("--output", help="detection log path (JSON-lines)")

    p = sub.add_parser("baseline", help="RawBurst or TokenBurst difference series")
    _common(p)
    p.add_argument("--method", choices=("rawburst", "tokenburst"))
    p.add_argument("--input", help="messages JSON-lines")
    p.add_argument("--output", help="delta series CSV path")
    p.add_argument("--literal", action="store_true",
                   help="sum slices t-k..t (k+1 terms) and still divide by k")

    p = sub.add_parser("eval", help="ROC curves and AUC for score series")
    _common(p)
    p.add_argument("--truth", help="ground-truth CSV")
    p.add_argument("--series", action="append",
                   help="detection log or delta CSV, optionally PATH:EVENT (repeatable)")
    p.add_argument("--method", help="label for the summary (default: from file names)")
    p.add_argument("--roc", help="composite ROC CSV path")
    p.add_argument("--summary", help="summary JSON path")

    p = sub.add_parser("ablate", help="leave-one-family-out cross-validation")
    _common(p)
    p.add_argument("--training", help="labeled CSV")
    p.add_argument("--output", help="ablation CSV path")
    p.add_argument("--folds", type=int)
    p.add_argument("--star-model", dest="star_model",
                   help="also fit and save the model without the average-difference family")
    _model_opts(p)
    return parser


def _resolve(args, parser) -> argparse.Namespace:
    """Fill unset options from the config file, then from DEFAULTS."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    types = {a.dest: a for a in sub._actions}
    for key, value in conf.items():
        if key not in types or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, key) not in (None, False):
            continue
        action = types[key]
        if isinstance(action, argparse._AppendAction):
            setattr(args, key, [v.strip() for v in value.split(",") if v.strip()])
        elif isinstance(action, argparse._StoreTrueAction):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
        else:
            try:
                setattr(args, key, action.type(value) if action.type else value)
            except ValueError:
                raise UsageError(f"config key {key!r}: bad value {value!r}") from None
    for key, value in DEFAULTS.items():
        if getattr(args, key, "absent") is None:
            setattr(args, key, value)
    return args


def _need(args, *names, inputs=()) -> None:
    """Require each flag; the ones named in ``inputs`` must also exist on disk."""
    for name in names:
        value = getattr(args, name, None)
        flag = "--" + name.replace("_", "-")
        if value in (None, []):
            raise UsageError(f"{flag} is required")
        if name not in inputs:
            continue
        for path in value if isinstance(value, list) else [value]:
            if name == "series":
                path = path.partition(":")[0]
            if not Path(path).exists():
                raise UsageError(f"{flag}: no such file {path!r}")


def _stream_cfg(args):
    from .windowing import StreamConfig
    return StreamConfig(args.delta, args.omega, args.k)


def _detect_cfg(args):
    from .detect import DetectConfig
    from .features import FeatureConfig
    rho = args.rho
    if rho != int(rho):
        raise UsageError("--rho must be a whole number for LABurst detection")
    return DetectConfig(_stream_cfg(args), FeatureConfig(min_count=args.min_count), int(rho))


def _lexicon(args) -> list[str]:
    from .resources import load_lexicon
    try:
        return load_lexicon(args.lexicon, args.lexicon_group)
    except KeyError as exc:
        raise UsageError(f"--lexicon-group: {exc.args[0]}") from None


def _model_cfgs(args):
    from .classify.ensemble import ForestConfig, SvmConfig
    return (ForestConfig(args.forest_trees, args.forest_features),
            SvmConfig(args.svm_c, args.svm_gamma))


def _fit(args, X, y, columns):
    from .classify.ensemble import train_adaboost
    forest, svm = _model_cfgs(args)
    cols = list(columns)
    return train_adaboost(X[:, cols], y, forest, svm, args.stages, args.rng_seed, tuple(cols))


def _exp_range(text, default):
    if not text:
        return default
    lo, _, hi = text.partition(":")
    try:
        return tuple(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise UsageError(f"bad exponent range {text!r}; expected lo:hi") from None


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args):
    from .synth import SynthConfig, generate, spaced_bursts, variant_groups
    _need(args, "output", "truth")
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            cfg = SynthConfig.from_dict(json.load(fh))
    else:
        seeds = [t.strip() for t in (args.tokens or "goal,penalty,homerun,touchdown,quake")
                 .split(",") if t.strip()]
        groups = variant_groups(seeds, args.variants)
        try:
            lengths = [int(x) for x in str(args.burst_length).split(",")]
        except ValueError:
            raise UsageError(f"--burst-length: bad value {args.burst_length!r}") from None
        bursts = spaced_bursts(args.bursts, groups, first=args.first, every=args.every,
                               length=lengths, intensity=args.intensity,
                               volume_boost=args.volume_boost) if args.bursts else ()
        cfg = SynthConfig(duration=args.duration, rate=args.rate, bursts=bursts,
                          rng_seed=args.rng_seed, vocab_size=args.vocab_size,
                          planted_rate=args.planted_rate, name=args.name)
    n = generate(cfg, args.output, args.truth)
    print(f"wrote {n} messages, {len(cfg.bursts)} bursts", file=sys.stderr)


def cmd_features(args):
    from .features import FeatureConfig, extract_stream, write_feature_csv
    from .ingest import read_messages
    _need(args, "input", "output", inputs=("input",))
    messages = read_messages(args.input)
    stream = _stream_cfg(args).aligned(messages[0].timestamp) if messages else _stream_cfg(args)
    rows = ((c, n) for _, c, n in
            extract_stream(messages, stream, FeatureConfig(min_count=args.min_count)))
    write_feature_csv(rows, args.output)


def _pair_streams(inputs, truths):
    """Match each input with its ground truth by file stem, event name, or the only event."""
    from .evaluation import GroundTruth
    from .ingest import read_messages
    pairs = []
    for path in inputs:
        msgs = read_messages(path)
        stem = Path(path).name.split(".")[0]
        # synthetic message ids start with the generator's event name
        names = [stem] + ([msgs[0].id.split("-")[0]] if msgs else [])
        hit = [truths[n] for n in names if n in truths]
        if hit:
            gt = hit[0]
        elif len(inputs) == 1 and len(truths) == 1:
            gt = next(iter(truths.values()))
        else:
            log.warning("no ground truth matches %s; all its windows are negative", path)
            gt = GroundTruth(stem, [])
        pairs.append((msgs, gt))
    return pairs


def cmd_train(args):
    from .classify.training import (HarvestConfig, build_training_set, read_training_csv,
                                    write_training_csv)
    from .classify.ensemble import save_model
    from .evaluation import read_truth_csv
    from .features import FAMILIES, FeatureConfig, columns_without
    from .resources import stopword_set
    _need(args, "model")
    for fam in args.exclude or ():
        if fam not in FAMILIES:
            raise UsageError(f"--exclude: unknown family {fam!r}; choose from {sorted(FAMILIES)}")
    if args.training:
        _need(args, "training", inputs=("training",))
        data = read_training_csv(args.training)
    else:
        _need(args, "input", "truth", inputs=("input", "truth"))
        pairs = _pair_streams(args.input, read_truth_csv(args.truth))
        data = build_training_set(pairs, _lexicon(args), stopword_set(("en", "es")),
                                  _stream_cfg(args), FeatureConfig(min_count=args.min_count),
                                  HarvestConfig(args.tau, args.negative_windows, args.rng_seed))
    if args.training_output:
        write_training_csv(data, args.training_output)
    counts = data.counts()
    print(f"training set: {counts['positive']} positive, {counts['negative']} negative",
          file=sys.stderr)
    model = _fit(args, data.X, data.y, columns_without(*(args.exclude or ())))
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)
    save_model(model, args.model)


def cmd_gridsearch(args):
    from .classify.selection import GridSpec, grid_search
    from .classify.training import read_training_csv
    _need(args, "training", "output", inputs=("training",))
    data = read_training_csv(args.training)
    base = GridSpec()
    grid = GridSpec(_exp_range(args.svm_c_exp, base.svm_c_exponents),
                    _exp_range(args.svm_gamma_exp, base.svm_gamma_exponents),
                    _exp_range(args.trees_exp, base.forest_tree_exponents),
                    _exp_range(args.features_exp, base.forest_feature_exponents))
    best = grid_search(data.X, data.y, grid, args.folds, args.rng_seed,
                       tuple(args.family or ("svm", "forest")), threads=args.threads)
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump({k: v.to_dict() for k, v in best.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_selftrain(args):
    from .classify.ensemble import load_model, save_model
    from .classify.training import read_training_csv, self_train, write_training_csv
    from .features import FeatureConfig, extract_stream
    from .ingest import read_messages
    _need(args, "model", "training", "input", "output", inputs=("model", "training", "input"))
    model = load_model(args.model)
    data = read_training_csv(args.training)
    fcfg = FeatureConfig(min_count=args.min_count)
    unlabeled = []
    for path in args.input:
        msgs = read_messages(path)
        if msgs:
            stream = _stream_cfg(args).aligned(msgs[0].timestamp)
            unlabeled += [(c, n) for _, c, n in extract_stream(msgs, stream, fcfg)]
    before = len(data)
    data, model = self_train(model, unlabeled, data,
                             lambda X, y: _fit(args, X, y, model.columns), args.theta)
    print(f"self-training added {len(data) - before} positives", file=sys.stderr)
    if args.training_output:
        write_training_csv(data, args.training_output)
    save_model(model, args.output)


def cmd_detect(args):
    from .classify.ensemble import load_model
    from .detect import detect_stream, write_detection_log
    from .ingest import read_messages
    _need(args, "model", "input", "output", inputs=("model", "input"))
    cfg = _detect_cfg(args)
    if cfg.rho < 1:
        raise UsageError("--rho must be >= 1")
    records, _ = detect_stream(load_model(args.model), read_messages(args.input), cfg)
    write_detection_log(records, args.output)
    hits = sum(r["detected"] for r in records)
    print(f"{hits} of {len(records)} windows flagged at rho={cfg.rho}", file=sys.stderr)


def cmd_baseline(args):
    from .baselines import SeedLexicon, run_baseline, write_delta_csv
    from .ingest import read_messages
    _need(args, "input", "output", inputs=("input",))
    method = args.method or "rawburst"
    lexicon = SeedLexicon(_lexicon(args)) if method == "tokenburst" else None
    points = run_baseline(read_messages(args.input), method, _stream_cfg(args),
                          lexicon, args.literal)
    write_delta_csv(points, args.output)


def cmd_eval(args):
    from .evaluation import (evaluate_series, read_series, read_truth_csv, write_roc_csv,
                             write_summary)
    _need(args, "truth", "series", inputs=("truth", "series"))
    if not args.roc and not args.summary:
        raise UsageError("--roc or --summary is required")
    truths = read_truth_csv(args.truth)
    series = []
    for spec in args.series:
        path, _, event = spec.partition(":")
        if not event:
            stem = Path(path).name.split(".")[0]
            event = stem if stem in truths or len(truths) != 1 else next(iter(truths))
        series.append(read_series(path, args.delta, event))
    method = args.method or Path(args.series[0].partition(":")[0]).stem
    result = evaluate_series(method, series, truths, args.tau)
    if args.roc:
        write_roc_csv(result.composite, args.roc)
        stem = Path(args.roc)
        for name, curve in result.per_event.items():
            if len(result.per_event) > 1:
                write_roc_csv(curve, stem.with_name(f"{stem.stem}.{name}{stem.suffix}"))
    if args.summary:
        write_summary([result], args.summary)
    print(f"{method}: composite AUC {result.composite.auc:.4f}", file=sys.stderr)


def cmd_ablate(args):
    from .classify.ensemble import save_model
    from .classify.training import read_training_csv
    from .evaluation import ablate, write_ablation
    from .features import columns_without
    _need(args, "training", "output", inputs=("training",))
    data = read_training_csv(args.training)
    forest, svm = _model_cfgs(args)
    rows = ablate(data.X, data.y, folds=args.folds, rng_seed=args.rng_seed, forest=forest,
                  svm=svm, threads=args.threads)
    write_ablation(rows, args.output)
    for r in rows:
        print(f"{r.excluded or 'full':20s} {r.mean_auc:.4f} {r.difference:+.4f}", file=sys.stderr)
    if args.star_model:
        save_model(_fit(args, data.X, data.y, columns_without("average_difference")),
                   args.star_model)


COMMANDS = {"synth": cmd_synth, "features": cmd_features, "train": cmd_train,
            "gridsearch": cmd_gridsearch, "selftrain": cmd_selftrain, "detect": cmd_detect,
            "baseline": cmd_baseline, "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        print("laburst: error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _resolve(args, parser)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"laburst {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"laburst {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
