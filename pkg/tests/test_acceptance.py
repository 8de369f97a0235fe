"""Acceptance checks, one test per criterion.

Each test appends a PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``; the
lines are printed in the terminal summary. Run with::

    pytest -m acceptance
"""

from __future__ import annotations

import random
import time
import warnings

import conftest
import numpy as np
import pytest
from oracles import brute_force_dual, naive_similar_pairs, rbf_gram

from paidposter import svm
from paidposter.corpus import (
    NORMAL,
    PAID,
    CleaningConfig,
    CommentRecord,
    Corpus,
    clean,
    group_by_user,
    write_jsonl,
)
from paidposter.evaluate import ConfusionMatrix, confusion, metrics
from paidposter.features import FEATURE_SETS
from paidposter.semantics import Segmenter, SimilarityConfig, count_similar_pairs
from paidposter.svm import TrainConfig, cross_validate, dual_objective, solve_smo, stratified_folds, train
from paidposter.synth import (
    FEATURES,
    SINA_NORMAL,
    SINA_PAID,
    SynthConfig,
    bin_counts,
    chi_square,
    extract_all,
    generate,
)

pytestmark = pytest.mark.acceptance


def verdict(number: int, title: str, ok: bool, detail: str, elapsed: float) -> None:
    status = "PASS" if ok else "FAIL"
    conftest.ACCEPTANCE_LINES.append(f"[{status}] {number}. {title}: {detail} ({elapsed:.1f}s)")
    assert ok, detail


# ------------------------------------------------------------------------ 1


REFERENCE_ROWS = {
    "2-feature": (ConfusionMatrix(tp=2, fp=0, fn=80, tn=141), ("100.00%", "2.43%", "4.76%", "64.12%")),
    "4-feature": (ConfusionMatrix(tp=32, fp=33, fn=50, tn=108), ("49.23%", "39.02%", "43.54%", "62.78%")),
    "5-feature": (ConfusionMatrix(tp=60, fp=3, fn=22, tn=138), ("95.24%", "73.17%", "82.76%", "88.79%")),
}


def test_metric_exactness():
    t0 = time.perf_counter()
    wrong = []
    for name, (cm, expected) in REFERENCE_ROWS.items():
        got = metrics(cm).percentages()
        for metric, g, e in zip(("precision", "recall", "F", "accuracy"), got, expected):
            if g != e:
                wrong.append(f"{name} {metric} {g} != {e}")
    detail = "all 12 values match" if not wrong else "; ".join(wrong)
    verdict(1, "metric exactness", not wrong, detail, time.perf_counter() - t0)


# ------------------------------------------------------------------------ 2


def test_feature_table_consistency():
    t0 = time.perf_counter()
    corpus = generate(SynthConfig(n_normal=4520, n_paid=700, seed=2024))
    by_class = {NORMAL: [], PAID: []}
    for profile, fv in extract_all(corpus):
        by_class[profile.label].append(fv)
    worst = (1.0, "")
    failures = []
    for label, dist in ((NORMAL, SINA_NORMAL), (PAID, SINA_PAID)):
        for feat in FEATURES:
            _, p = chi_square(bin_counts(by_class[label], feat), getattr(dist, feat))
            if p < worst[0]:
                worst = (p, f"{label}/{feat}")
            if p < 0.01:
                failures.append(f"{label}/{feat} p={p:.4g}")
    ok = not failures and len(by_class[NORMAL]) == 4520 and len(by_class[PAID]) == 700
    detail = f"10 tests, min p={worst[0]:.4f} ({worst[1]})" if ok else "; ".join(failures)
    verdict(2, "feature-table consistency", ok, detail, time.perf_counter() - t0)


# ------------------------------------------------------------------------ 3


def _labelled(n_normal, n_paid, seed):
    corpus = clean(generate(SynthConfig(n_normal=n_normal, n_paid=n_paid, seed=seed)))
    rows = extract_all(corpus)
    return [fv for _, fv in rows], [p.label for p, _ in rows], [p.user_id for p, _ in rows]


def test_end_to_end_plausibility():
    t0 = time.perf_counter()
    # training mix sized like the Sina set, test mix like the Sohu set
    Xa, ya, _ = _labelled(452, 70, seed=1)
    Xb, yb, ub = _labelled(141, 82, seed=2)
    truth = dict(zip(ub, yb))
    results = {}
    for k, mask in FEATURE_SETS.items():
        grid = tuple((c, g / k) for c in (1.0, 10.0, 100.0) for g in (0.5, 1.0, 2.0))
        cv = cross_validate(Xa, ya, TrainConfig(feature_mask=mask, grid=grid, seed=7))
        c, g = cv.best
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", svm.ConvergenceWarning)
            model = train(Xa, ya, TrainConfig(c=c, gamma=g, feature_mask=mask))
        pred = {u: lab for u, (lab, _) in zip(ub, svm.predict_many(model, Xb))}
        results[k] = metrics(confusion(pred, truth)).as_floats()
    _, _, f5, a5 = results[5]
    checks = {
        "F5>=0.80": f5 >= 0.80,
        "acc5>=0.85": a5 >= 0.85,
        "F5>F4": f5 > results[4][2],
        "R2<R4": results[2][1] < results[4][1],
    }
    summary = ", ".join(f"{k}-feature P/R/F/A=" + "/".join(f"{v:.3f}" for v in results[k]) for k in (2, 4, 5))
    failed = [name for name, ok in checks.items() if not ok]
    detail = summary + ("" if not failed else f"; failed: {', '.join(failed)}")
    verdict(3, "end-to-end plausibility", not failed, detail, time.perf_counter() - t0)


# ------------------------------------------------------------------------ 4


def test_smo_against_qp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_gap = 0.0
    worst_kkt = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        X = rng.random((n, d))
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        c = float(rng.choice([0.1, 1.0, 10.0]))
        gamma = float(rng.choice([0.5, 1.0, 4.0]))
        K = rbf_gram(X, gamma)
        best, _ = brute_force_dual(K, y, c)
        # objective measured on the solver run to convergence
        tight = solve_smo(X, y, c, gamma, kkt_tol=1e-12)
        worst_gap = max(worst_gap, best - dual_objective(tight.alpha, y, K))
        # KKT conditions at the default tolerance, on both runs
        tol = 1e-3
        for state in (solve_smo(X, y, c, gamma, kkt_tol=tol), tight):
            m = y * (K @ (state.alpha * y) + state.bias)
            for a, yf in zip(state.alpha, m):
                if a == 0:
                    v = (1 - tol) - yf
                elif a == c:
                    v = yf - (1 + tol)
                else:
                    v = abs(yf - 1) - tol
                worst_kkt = max(worst_kkt, v)
            worst_kkt = max(worst_kkt, abs(float(state.alpha @ y)) - 1e-8)
    ok = worst_gap <= 1e-6 and worst_kkt <= 1e-9
    detail = f"worst objective shortfall {worst_gap:.2e}, worst KKT excess {max(worst_kkt, 0):.2e}"
    verdict(4, "SMO correctness", ok, detail, time.perf_counter() - t0)


# ------------------------------------------------------------------------ 5


def test_similarity_oracle():
    t0 = time.perf_counter()
    rng = random.Random(5)
    vocab = [f"w{i}" for i in range(12)]
    seg = Segmenter(stop_words=frozenset())
    cfg = SimilarityConfig()
    mismatches = 0
    for _ in range(200):
        n = rng.randint(0, 50)
        texts = [" ".join(rng.choices(vocab, k=rng.randint(0, 8))) for _ in range(n)]
        if texts:
            texts[-1] = texts[0]  # guarantee at least one exact repeat
        fast = count_similar_pairs(texts, seg, cfg)
        slow = naive_similar_pairs([t.split() for t in texts], cfg.ratio_threshold)
        mismatches += fast != slow
    verdict(5, "similarity oracle", mismatches == 0, f"{mismatches} mismatches over 200 profiles",
            time.perf_counter() - t0)


# ------------------------------------------------------------------------ 6


def test_determinism_and_persistence(tmp_path):
    t0 = time.perf_counter()
    problems = []
    cfg = SynthConfig(n_normal=120, n_paid=40, seed=6)
    write_jsonl(generate(cfg).records, tmp_path / "a.jsonl")
    write_jsonl(generate(cfg).records, tmp_path / "b.jsonl")
    if (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "b.jsonl").read_bytes():
        problems.append("synth bytes differ")

    rows = extract_all(clean(generate(cfg)))
    X = [fv for _, fv in rows]
    y = [p.label for p, _ in rows]
    f1 = stratified_folds(y, 10, 3)
    f2 = stratified_folds(y, 10, 3)
    if any(not np.array_equal(a, b) for a, b in zip(f1, f2)):
        problems.append("folds differ")

    tcfg = TrainConfig(c=10.0, gamma=0.5, seed=3)
    m1, m2 = train(X, y, tcfg), train(X, y, tcfg)
    svm.save(m1, tmp_path / "m1.json")
    svm.save(m2, tmp_path / "m2.json")
    if (tmp_path / "m1.json").read_bytes() != (tmp_path / "m2.json").read_bytes():
        problems.append("models differ")

    loaded = svm.load(tmp_path / "m1.json")
    rng = np.random.default_rng(6)
    probe = np.column_stack([
        rng.random(1000), rng.random(1000) * 4000, rng.integers(1, 15, 1000),
        rng.integers(1, 15, 1000), rng.integers(0, 25, 1000),
    ])
    diff = np.abs(m1.decision_values(probe) - loaded.decision_values(probe)).max()
    if diff != 0:
        problems.append(f"save/load max difference {diff:.3g}")
    detail = "synth bytes, folds and models identical; save/load difference 0 on 1000 vectors"
    verdict(6, "determinism and persistence", not problems, "; ".join(problems) or detail,
            time.perf_counter() - t0)


# ------------------------------------------------------------------------ 7


def _cleaning_fixture() -> Corpus:
    recs = []
    seq = iter(range(1000))

    def add(user, t, text, report="R1"):
        recs.append(CommentRecord(report, next(seq), t, "Beijing", user, text, False))

    for k in range(5):
        add("keeper", 1000 + 60 * k, f"post {k}")
    # exact repost of keeper's first comment, same report and time
    add("keeper", 1000, "post 0")
    add("keeper", 1000, "post 0")
    for k in range(6):
        add("Mobile User", 2000 + k, f"mobile {k}")
    for k in range(6):
        add("Anonymous", 3000 + k, f"anon {k}")
    for k in range(6):
        add("", 3500 + k, f"blank {k}")
    for k in range(3):
        add("short", 4000 + k, f"short {k}")
    # five raw rows, four distinct: survives
    for k in range(4):
        add("dupe4", 5000 + k, f"d {k}", report="R2")
    add("dupe4", 5000, "d 0", report="R2")
    # three distinct comments plus a duplicate: 3 after dedup, so dropped
    for k in range(3):
        add("dupe3", 6000 + k, f"e {k}", report="R3")
    add("dupe3", 6000, "e 0", report="R3")
    return Corpus(tuple(recs))


def test_cleaning_semantics():
    t0 = time.perf_counter()
    raw = _cleaning_fixture()
    out = clean(raw, CleaningConfig())
    users = {p.user_id: len(p.comments) for p in group_by_user(out)}
    expected_users = {"keeper": 5, "dupe4": 4}
    expected_keys = sorted(
        [("R1", 1000 + 60 * k, "keeper", f"post {k}") for k in range(5)]
        + [("R2", 5000 + k, "dupe4", f"d {k}") for k in range(4)]
    )
    got_keys = sorted((r.report_id, r.post_time, r.user_id, r.content) for r in out.records)
    again = clean(out, CleaningConfig())
    ok = users == expected_users and got_keys == expected_keys and again.records == out.records
    detail = (f"{len(raw)} records -> {len(out)} records, users {sorted(users)}; idempotent"
              if ok else f"users={users}, idempotent={again.records == out.records}")
    verdict(7, "cleaning semantics", ok, detail, time.perf_counter() - t0)
