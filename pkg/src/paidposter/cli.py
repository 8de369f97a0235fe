"""Command-line driver: ``paidposter <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import corpus as corpus_mod
from . import svm
from .corpus import CleaningConfig, Corpus, IngestError, clean, group_by_user, ingest, load_labels
from .evaluate import confusion, report
from .features import FEATURE_SETS, FeatureRow, extract, read_features, write_features
from .semantics import Segmenter, SimilarityConfig, count_similar_pairs, load_word_list, semantic_flag
from .synth import SynthConfig, config_from_section, generate

logger = logging.getLogger("paidposter")

TZ_ENV = "PAIDPOSTER_TZ"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# configuration


def _read_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path:
        if not Path(path).is_file():
            raise UsageError(f"config file not found: {path}")
        cp.read(path, encoding="utf-8")
    return cp


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _cleaning_config(args, cp) -> CleaningConfig:
    sec = _section(cp, "cleaning")
    kw = {}
    if "min_comments" in sec:
        kw["min_comments"] = int(sec["min_comments"])
    if "excluded_user_ids" in sec:
        kw["excluded_user_ids"] = frozenset(s.strip() for s in sec["excluded_user_ids"].split(",") if s.strip())
    if "anonymous_ids" in sec:
        kw["anonymous_ids"] = frozenset(s.strip() for s in sec["anonymous_ids"].split(",") if s.strip())
    if "drop_anonymous" in sec:
        kw["drop_anonymous"] = cp.getboolean("cleaning", "drop_anonymous")
    if "dedup" in sec:
        kw["dedup"] = cp.getboolean("cleaning", "dedup")
    if getattr(args, "min_comments", None) is not None:
        kw["min_comments"] = args.min_comments
    return CleaningConfig(**kw)


def _similarity_config(args, cp) -> SimilarityConfig:
    sec = _section(cp, "similarity")
    ratio = float(sec.get("ratio_threshold", 0.8))
    flag = int(sec.get("pair_flag_threshold", 3))
    if getattr(args, "ratio_threshold", None) is not None:
        ratio = args.ratio_threshold
    return SimilarityConfig(ratio, flag)


def _segmenter(args, cp) -> Segmenter:
    sec = _section(cp, "similarity")
    stop_path = getattr(args, "stop_words", None) or sec.get("stop_words")
    dict_path = getattr(args, "dictionary", None) or sec.get("dictionary")
    kw = {}
    if stop_path:
        kw["stop_words"] = load_word_list(_existing(stop_path))
    if dict_path:
        kw["mode"] = "dictionary"
        kw["dictionary"] = load_word_list(_existing(dict_path))
    return Segmenter(**kw)


def _train_config(args, cp) -> svm.TrainConfig:
    sec = _section(cp, "train")
    kw: dict = {}
    for key, conv in (("c", float), ("gamma", float), ("kkt_tol", float), ("max_passes", int), ("folds", int), ("seed", int)):
        if key in sec:
            kw[key] = conv(sec[key])
    if "grid" in sec:
        kw["grid"] = _parse_grid(sec["grid"])
    for key in ("c", "gamma", "kkt_tol", "folds", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            kw[key] = val
    if getattr(args, "grid", None):
        kw["grid"] = _parse_grid(args.grid)
    kw["feature_mask"] = FEATURE_SETS[args.features_set]
    return svm.TrainConfig(**kw)


def _parse_grid(text: str) -> tuple[tuple[float, float], ...]:
    """``"1:0.2,10:0.2"`` -> ((1, 0.2), (10, 0.2))."""
    out = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        c, sep, g = item.partition(":")
        if not sep:
            raise UsageError(f"bad grid entry {item!r}; expected C:gamma")
        out.append((float(c), float(g)))
    return tuple(out)


def _tz(args) -> str:
    return args.tz or os.environ.get(TZ_ENV) or "UTC"


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    return p


def _out(args):
    return open(args.out, "w", encoding="utf-8", newline="") if getattr(args, "out", None) else None


def _emit(text: str, args) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


# --------------------------------------------------------------------------
# shared stages


def _load_corpus(path: str, args, labels: str | None = None) -> Corpus:
    c = ingest(_existing(path), getattr(args, "format", None), tz=_tz(args),
               delimiter=getattr(args, "delimiter", ","))
    if labels:
        c = replace(c, label_map=load_labels(_existing(labels)))
    return c


def _feature_rows(c: Corpus, args, cp, do_clean: bool = True) -> list[FeatureRow]:
    if do_clean:
        c = clean(c, _cleaning_config(args, cp))
    seg = _segmenter(args, cp)
    sim = _similarity_config(args, cp)
    tz = _tz(args)
    rows = []
    for prof in group_by_user(c):
        pairs = count_similar_pairs(prof, seg, sim)
        rows.append(FeatureRow(prof.user_id, extract(prof, pairs, tz), prof.label))
    logger.info("extracted features for %d users", len(rows))
    return rows


def _labelled(rows: list[FeatureRow], labels_path: str | None) -> tuple[list, list, list]:
    labels = load_labels(_existing(labels_path)) if labels_path else {}
    vecs, ys, uids = [], [], []
    for r in rows:
        lab = labels.get(r.user_id, r.label)
        if lab is None:
            logger.warning("no label for %s; skipped", r.user_id)
            continue
        vecs.append(r.features)
        ys.append(lab)
        uids.append(r.user_id)
    if not vecs:
        raise DataError("no labelled users to train on")
    return vecs, ys, uids


def _fit(vecs, ys, tcfg: svm.TrainConfig, do_cv: bool = True):
    """Cross-validate (C, gamma) when possible, then fit on everything."""
    cv = None
    if do_cv:
        try:
            cv = svm.cross_validate(vecs, ys, tcfg)
        except ValueError as exc:
            logger.warning("cross-validation skipped: %s", exc)
    if cv is not None:
        c, g = cv.best
        tcfg = replace(tcfg, c=c, gamma=g)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", svm.ConvergenceWarning)
        model = svm.train(vecs, ys, tcfg)
    for w in caught:
        logger.warning("%s", w.message)
    return model, cv


def _cv_summary(cv, k: int) -> str:
    if cv is None:
        return "cross-validation: not run"
    lines = [f"{k}-feature {len(cv.folds)}-fold cross-validation:"]
    for (c, g), acc in cv.scores.items():
        mark = " *" if (c, g) == cv.best else ""
        lines.append(f"  C={c:g} gamma={g:g} accuracy={acc:.4f}{mark}")
    return "\n".join(lines)


def _predictions(model, rows: list[FeatureRow]) -> list[tuple[str, str, float]]:
    res = svm.predict_many(model, [r.features for r in rows])
    return [(r.user_id, lab, d) for r, (lab, d) in zip(rows, res)]


def _write_predictions(preds, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("user_id", "label", "decision_value"))
    for uid, lab, d in sorted(preds):
        w.writerow((uid, lab, repr(d)))


def _read_predictions(path: str) -> dict[str, str]:
    out = {}
    with open(_existing(path), encoding="utf-8", newline="") as fh:
        for n, row in enumerate(csv.reader(fh), 1):
            if not row or (n == 1 and row[0] == "user_id"):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{n}: expected user_id,label")
            out[row[0]] = row[1].strip().lower()
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cp) -> int:
    c = _load_corpus(args.input, args)
    print(f"{len(c)} records, {len(c.errors)} errors, {len(c.user_ids())} users", file=sys.stderr)
    for e in c.errors:
        print(f"  {e}", file=sys.stderr)
    if args.out:
        corpus_mod.write_jsonl(c.records, args.out)
    else:
        for r in c.records:
            sys.stdout.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    return 0


def cmd_clean(args, cp) -> int:
    c = _load_corpus(args.input, args)
    cleaned = clean(c, _cleaning_config(args, cp))
    print(f"{len(c)} -> {len(cleaned)} records, {len(cleaned.user_ids())} users", file=sys.stderr)
    if args.out:
        corpus_mod.write_jsonl(cleaned.records, args.out)
    else:
        for r in cleaned.records:
            sys.stdout.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    return 0


def cmd_features(args, cp) -> int:
    c = _load_corpus(args.input, args, args.labels)
    rows = _feature_rows(c, args, cp, do_clean=not args.no_clean)
    if args.out:
        write_features(rows, args.out)
    else:
        write_features(rows, sys.stdout)
    if args.flag:
        sim = _similarity_config(args, cp)
        flagged = [r.user_id for r in rows if semantic_flag(r.features.similar_pairs, sim)]
        print(f"{len(flagged)} users at or above the similar-pair threshold", file=sys.stderr)
    return 0


def cmd_train(args, cp) -> int:
    rows = read_features(_existing(args.features))
    vecs, ys, _ = _labelled(rows, args.labels)
    tcfg = _train_config(args, cp)
    model, cv = _fit(vecs, ys, tcfg, do_cv=not args.no_cv)
    svm.save(model, args.out)
    print(_cv_summary(cv, args.features_set))
    print(f"model: {len(model.dual_coefs)} support vectors, C={model.c:g}, gamma={model.gamma:g}, "
          f"converged={model.converged} -> {args.out}")
    return 0


def cmd_predict(args, cp) -> int:
    try:
        model = svm.load(_existing(args.model))
    except svm.ModelFormatError as exc:
        raise DataError(str(exc)) from None
    rows = read_features(_existing(args.features))
    preds = _predictions(model, rows)
    fh = _out(args)
    try:
        _write_predictions(preds, fh or sys.stdout)
    finally:
        if fh:
            fh.close()
    return 0


def cmd_eval(args, cp) -> int:
    pred = _read_predictions(args.pred)
    truth = load_labels(_existing(args.truth))
    try:
        cm = confusion(pred, truth)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc).strip("'\"")) from None
    _emit(report(cm), args)
    return 0


def cmd_synth(args, cp) -> int:
    scfg = SynthConfig()
    if args.config and cp.has_section("synth"):
        scfg = config_from_section(cp["synth"], scfg)
    changes = {k: getattr(args, k) for k in ("n_normal", "n_paid", "seed") if getattr(args, k) is not None}
    scfg = replace(scfg, **changes)
    c = generate(scfg)
    corpus_mod.write_jsonl(c.records, args.out)
    labels_out = args.labels_out or str(Path(args.out).with_suffix(".labels.tsv"))
    corpus_mod.write_labels(c.label_map, labels_out)
    print(f"{len(c)} records for {len(c.label_map)} users -> {args.out}, labels -> {labels_out}", file=sys.stderr)
    return 0


def cmd_pipeline(args, cp) -> int:
    train_c = _load_corpus(args.train_corpus, args, args.train_labels)
    test_c = _load_corpus(args.test_corpus, args, args.test_labels)
    train_rows = _feature_rows(train_c, args, cp)
    test_rows = _feature_rows(test_c, args, cp)
    vecs, ys, _ = _labelled(train_rows, None)
    model, cv = _fit(vecs, ys, _train_config(args, cp), do_cv=not args.no_cv)
    print(_cv_summary(cv, args.features_set), file=sys.stderr)
    if args.model_out:
        svm.save(model, args.model_out)
    preds = _predictions(model, test_rows)
    truth = {r.user_id: r.label for r in test_rows if r.label is not None}
    pred_map = {uid: lab for uid, lab, _ in preds if uid in truth}
    if not truth:
        raise DataError("test corpus has no labels")
    cm = confusion(pred_map, truth)
    _emit(report(cm, f"{args.features_set}-feature classifier on {Path(args.test_corpus).name}"), args)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [cleaning], [similarity], [train], [synth] sections")
    common.add_argument("--tz", help=f"time zone for naive timestamps and calendar days (default ${TZ_ENV} or UTC)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--seed", type=int)

    corpus_opts = _Parser(add_help=False)
    corpus_opts.add_argument("--format", choices=("csv", "jsonl"), help="input format (default: by suffix)")
    corpus_opts.add_argument("--delimiter", default=",")

    clean_opts = _Parser(add_help=False)
    clean_opts.add_argument("--min-comments", type=int)

    sem_opts = _Parser(add_help=False)
    sem_opts.add_argument("--stop-words", help="stop-word file, one token per line")
    sem_opts.add_argument("--dictionary", help="word list; switches to dictionary segmentation")
    sem_opts.add_argument("--ratio-threshold", type=float)

    train_opts = _Parser(add_help=False)
    train_opts.add_argument("--features-set", type=int, choices=sorted(FEATURE_SETS), default=5)
    train_opts.add_argument("-C", "--c", type=float)
    train_opts.add_argument("--gamma", type=float)
    train_opts.add_argument("--kkt-tol", type=float)
    train_opts.add_argument("--folds", type=int)
    train_opts.add_argument("--grid", help="candidate list 'C:gamma,C:gamma,...'")
    train_opts.add_argument("--no-cv", action="store_true", help="skip cross-validation")

    p = _Parser(prog="paidposter", description="Detect paid posters from comment corpora.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common, corpus_opts], help="parse and normalize a comment file")
    s.add_argument("input")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("clean", parents=[common, corpus_opts, clean_opts], help="remove duplicates and unusable users")
    s.add_argument("input")
    s.add_argument("--out")
    s.set_defaults(func=cmd_clean)

    s = sub.add_parser("features", parents=[common, corpus_opts, clean_opts, sem_opts], help="per-user feature table")
    s.add_argument("input")
    s.add_argument("--labels")
    s.add_argument("--out")
    s.add_argument("--no-clean", action="store_true", help="input is already cleaned")
    s.add_argument("--flag", action="store_true", help="also report the similar-pair heuristic flag count")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", parents=[common, train_opts], help="fit the SVM on a feature table")
    s.add_argument("--features", required=True)
    s.add_argument("--labels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="classify users of a feature table")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", parents=[common], help="score predictions against labels")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic labelled corpus")
    s.add_argument("--n-normal", type=int)
    s.add_argument("--n-paid", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pipeline", parents=[common, corpus_opts, clean_opts, sem_opts, train_opts],
                       help="train on one corpus, evaluate on another")
    s.add_argument("--train-corpus", required=True)
    s.add_argument("--train-labels", required=True)
    s.add_argument("--test-corpus", required=True)
    s.add_argument("--test-labels", required=True)
    s.add_argument("--model-out")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pipeline)
    return p


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity, 2)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("paidposter")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage().strip())
        _setup_logging(args.verbose)
        cp = _read_config(args.config)
        if args.seed is None and cp.has_option("train", "seed"):
            args.seed = cp.getint("train", "seed")
        return args.func(args, cp)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, IngestError, svm.ModelFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
