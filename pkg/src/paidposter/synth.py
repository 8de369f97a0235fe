"""Labelled synthetic comment corpora with controlled per-class feature marginals.

Every synthetic user gets one bin per feature, drawn independently from the
class's marginal weights, and a comment timeline built so that feature
extraction lands in exactly those bins:

* each active day is its own epoch (active days are two calendar days apart),
  with all gaps inside a day equal to the drawn interval;
* reply flags are set on a drawn number of comments;
* near-duplicate groups of size k contribute C(k, 2) similar pairs; all other
  comments use disjoint vocabulary.
"""

from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .corpus import NORMAL, PAID, CommentRecord, Corpus, clean, group_by_user
from .features import FeatureVector, extract
from .semantics import DEFAULT_STOP_WORDS, Segmenter, SimilarityConfig, count_similar_pairs

INTERVAL_EDGES = (150, 300, 450, 600, 750, 900)
INTERVAL_TAIL_MAX = 3600
COUNT_TAIL = (7, 12)  # open-ended active-day / report bins
PAIRS_TAIL = (6, 20)  # ">= 6 similar pairs" bin
N_BINS = {"reply": 2, "interval": 7, "days": 7, "reports": 7, "pairs": 7}
FEATURES = ("reply", "interval", "days", "reports", "pairs")

# a day's comments start between 08:00 and 09:00 UTC and must end before 23:00
DAY_START_S = 8 * 3600
DAY_SPAN_S = 14 * 3600
BASE_TIME = int(datetime(2010, 10, 1, tzinfo=timezone.utc).timestamp())
N_REPORTS = 40
LOCATIONS = ("Guangdong", "Jiangsu", "Zhejiang", "Sichuan", "Shanghai", "Shandong", "Beijing", "Hubei")


def _norm(weights: Sequence[float]) -> tuple[float, ...]:
    total = math.fsum(weights)
    return tuple(w / total for w in weights)


@dataclass(frozen=True)
class ClassDistributions:
    """Bin weights for one class.

    reply: (p <= 0.5, p > 0.5); interval: seconds, (0,150], (150,300], ...,
    (750,900], > 900; days and reports: 1..6, > 6; pairs: 0..5, >= 6.
    """

    reply: tuple[float, ...]
    interval: tuple[float, ...]
    days: tuple[float, ...]
    reports: tuple[float, ...]
    pairs: tuple[float, ...]

    def __post_init__(self):
        for name in FEATURES:
            w = getattr(self, name)
            if len(w) != N_BINS[name]:
                raise ValueError(f"{name}: expected {N_BINS[name]} weights, got {len(w)}")
            if any(x < 0 for x in w) or math.fsum(w) <= 0:
                raise ValueError(f"{name}: weights must be non-negative with a positive sum")
            object.__setattr__(self, name, _norm(w))


# Sina percentages per class, normal users then potential paid posters
SINA_NORMAL = ClassDistributions(
    reply=(26.77, 73.23),
    interval=(22.91, 33.94, 20.67, 9.16, 7.83, 2.52, 2.97),
    days=(56.33, 21.91, 11.95, 6.19, 2.52, 0.66, 0.44),
    reports=(44.25, 25.22, 15.93, 8.63, 3.32, 1.77, 0.88),
    pairs=(79.65, 8.41, 1.77, 4.20, 1.55, 0.22, 4.20),
)
SINA_PAID = ClassDistributions(
    reply=(84.29, 15.71),
    interval=(50.00, 28.57, 14.28, 4.29, 0.00, 1.43, 1.43),
    days=(61.43, 25.71, 11.43, 1.43, 0.00, 0.00, 0.00),
    reports=(44.29, 28.57, 12.85, 7.14, 4.29, 1.43, 1.43),
    pairs=(5.71, 4.29, 2.86, 5.71, 2.86, 0.00, 78.57),
)


@dataclass(frozen=True)
class SynthConfig:
    n_normal: int = 452
    n_paid: int = 70
    seed: int = 0
    vocab_size: int = 4000
    extra_comments: tuple[int, int] = (0, 12)
    words_per_comment: tuple[int, int] = (5, 9)
    max_retries: int = 50
    normal: ClassDistributions = SINA_NORMAL
    paid: ClassDistributions = SINA_PAID
    user_prefix: str = "user"

    def __post_init__(self):
        if self.n_normal < 0 or self.n_paid < 0:
            raise ValueError("user counts must be non-negative")
        if self.words_per_comment[0] < 4:
            # fewer than 4 words breaks the k/(k+1) >= 0.8 near-duplicate margin
            raise ValueError("comments need at least 4 content words")


@dataclass(frozen=True)
class UserPlan:
    """Drawn bins and the concrete values realized for one user."""

    user_id: str
    label: str
    bins: dict
    n_comments: int
    n_replies: int
    gap_s: int
    days: int
    reports: int
    pairs: int


# --------------------------------------------------------------------------
# binning, shared with the checks


def interval_bin(seconds: float) -> int:
    for k, edge in enumerate(INTERVAL_EDGES):
        if seconds <= edge:
            return k
    return len(INTERVAL_EDGES)


def count_bin(n: int) -> int:
    """1..6 -> 0..5, anything above -> 6."""
    return min(n, 7) - 1


def pairs_bin(n: int) -> int:
    return min(n, 6)


def feature_bins(fv: FeatureVector) -> dict:
    return {
        "reply": 0 if fv.reply_ratio <= 0.5 else 1,
        "interval": interval_bin(fv.avg_interval_s),
        "days": count_bin(fv.active_days),
        "reports": count_bin(fv.num_reports),
        "pairs": pairs_bin(fv.similar_pairs),
    }


# --------------------------------------------------------------------------
# generation


def make_vocabulary(size: int, seed: int = 0) -> list[str]:
    """Pseudo-words of three consonant-vowel syllables, none a stop word."""
    rng = random.Random(seed)
    consonants = "bdfgklmnprstvz"
    vowels = "aeiou"
    syll = [c + v for c in consonants for v in vowels]
    if size > len(syll) ** 3:
        raise ValueError("vocabulary too large")
    words: set[str] = set()
    out = []
    while len(out) < size:
        w = "".join(rng.choice(syll) for _ in range(3))
        if w not in words and w not in DEFAULT_STOP_WORDS:
            words.add(w)
            out.append(w)
    return out


def _draw(rng: random.Random, weights: Sequence[float]) -> int:
    return rng.choices(range(len(weights)), weights=weights)[0]


def _gap_for(rng: random.Random, b: int) -> int:
    if b < len(INTERVAL_EDGES):
        lo = INTERVAL_EDGES[b - 1] if b else 0
        return rng.randint(lo + 1, INTERVAL_EDGES[b])
    return rng.randint(INTERVAL_EDGES[-1] + 1, INTERVAL_TAIL_MAX)


def _count_for(rng: random.Random, b: int) -> int:
    return b + 1 if b < 6 else rng.randint(*COUNT_TAIL)


def _pairs_for(rng: random.Random, b: int) -> int:
    return b if b < 6 else rng.randint(*PAIRS_TAIL)


def similar_groups(pairs: int) -> list[int]:
    """Group sizes whose C(k, 2) sum to ``pairs``, largest groups first."""
    groups = []
    left = pairs
    while left:
        k = int((1 + math.isqrt(1 + 8 * left)) // 2)
        while k * (k - 1) // 2 > left:
            k -= 1
        groups.append(k)
        left -= k * (k - 1) // 2
    return groups


class InfeasibleUser(RuntimeError):
    pass


def _plan_user(rng: random.Random, uid: str, label: str, dist: ClassDistributions, cfg: SynthConfig):
    for _ in range(cfg.max_retries):
        bins = {name: _draw(rng, getattr(dist, name)) for name in FEATURES}
        gap = _gap_for(rng, bins["interval"])
        days = _count_for(rng, bins["days"])
        reports = _count_for(rng, bins["reports"])
        pairs = _pairs_for(rng, bins["pairs"])
        groups = similar_groups(pairs)
        per_day_cap = 1 + DAY_SPAN_S // gap
        n_min = max(4, 2 * days, reports, sum(groups))
        n_max = days * per_day_cap
        if n_min > n_max:
            continue
        n = min(n_max, n_min + rng.randint(*cfg.extra_comments))
        half = n // 2
        replies = rng.randint(0, half) if bins["reply"] == 0 else rng.randint(half + 1, n)
        plan = UserPlan(uid, label, bins, n, replies, gap, days, reports, pairs)
        return plan, groups, per_day_cap
    raise InfeasibleUser(f"{uid}: no feasible bin combination after {cfg.max_retries} draws")


def _texts(rng: random.Random, n: int, groups: list[int], vocab: list[str], cfg: SynthConfig) -> list[str]:
    """``n`` comment texts containing the given near-duplicate groups."""
    lo, hi = cfg.words_per_comment
    n_bases = n - sum(groups) + len(groups)
    sizes = [rng.randint(lo, hi) for _ in range(n_bases)]
    n_extra = sum(k - 1 for k in groups)
    needed = sum(sizes) + n_extra
    if needed > len(vocab):
        raise InfeasibleUser("vocabulary too small for this user")
    pool = rng.sample(vocab, needed)
    bases, pos = [], 0
    for s in sizes:
        bases.append(pool[pos:pos + s])
        pos += s
    extras = pool[pos:]

    stop = sorted(DEFAULT_STOP_WORDS)
    out: list[str] = []
    for g, k in enumerate(groups):
        base = bases[g]
        out.append(_render(rng, base, stop))
        for _ in range(k - 1):
            # one extra content word keeps overlap at len/(len+1) >= 0.8
            out.append(_render(rng, base + [extras.pop()], stop))
    for base in bases[len(groups):]:
        out.append(_render(rng, base, stop))
    rng.shuffle(out)
    return out


def _render(rng: random.Random, words: list[str], stop: list[str]) -> str:
    words = list(words)
    rng.shuffle(words)
    for _ in range(rng.randint(0, 3)):
        words.insert(rng.randint(0, len(words)), rng.choice(stop))
    text = " ".join(words)
    text = text[0].upper() + text[1:]
    return text + rng.choice((".", "!", "?", "!!", ""))


def _timeline(rng: random.Random, plan: UserPlan, cap: int) -> list[int]:
    per_day = [2] * plan.days
    for _ in range(plan.n_comments - 2 * plan.days):
        open_days = [d for d in range(plan.days) if per_day[d] < cap]
        per_day[rng.choice(open_days)] += 1
    first_day = rng.randint(0, 30)
    times = []
    for d, m in enumerate(per_day):
        start = BASE_TIME + (first_day + 2 * d) * 86400 + DAY_START_S + rng.randint(0, 3599)
        times.extend(start + t * plan.gap_s for t in range(m))
    return times


def generate_with_plans(cfg: SynthConfig | None = None) -> tuple[Corpus, list[UserPlan]]:
    cfg = cfg or SynthConfig()
    rng = random.Random(cfg.seed)
    vocab = make_vocabulary(cfg.vocab_size, cfg.seed)
    report_ids = [f"R{k:04d}" for k in range(1, N_REPORTS + 1)]

    classes = [NORMAL] * cfg.n_normal + [PAID] * cfg.n_paid
    rng.shuffle(classes)
    width = max(5, len(str(len(classes))))

    staged = []
    plans = []
    for idx, label in enumerate(classes):
        uid = f"{cfg.user_prefix}{idx:0{width}d}"
        dist = cfg.paid if label == PAID else cfg.normal
        plan, groups, cap = _plan_user(rng, uid, label, dist, cfg)
        times = _timeline(rng, plan, cap)
        texts = _texts(rng, plan.n_comments, groups, vocab, cfg)

        reports = rng.sample(report_ids, plan.reports)
        order = list(range(plan.n_comments))
        rng.shuffle(order)
        assign = [None] * plan.n_comments
        for k, i in enumerate(order):
            assign[i] = reports[k] if k < plan.reports else rng.choice(reports)
        reply_idx = set(rng.sample(range(plan.n_comments), plan.n_replies))
        location = rng.choice(LOCATIONS)
        for i in range(plan.n_comments):
            staged.append((assign[i], times[i], uid, texts[i], i in reply_idx, location))
        plans.append(plan)

    # sequence numbers follow posting order inside each report
    staged.sort(key=lambda r: (r[0], r[1], r[2]))
    records = []
    seq: dict[str, int] = {}
    for report, ts, uid, text, is_reply, loc in staged:
        seq[report] = seq.get(report, 0) + 1
        records.append(CommentRecord(report, seq[report], ts, loc, uid, text, is_reply))
    labels = {p.user_id: p.label for p in plans}
    return Corpus(tuple(records), labels), plans


def generate(cfg: SynthConfig | None = None) -> Corpus:
    return generate_with_plans(cfg)[0]


# --------------------------------------------------------------------------
# checks


@dataclass
class RoundTripReport:
    users: int = 0
    mismatches: list[str] = field(default_factory=list)
    records_before: int = 0
    records_after: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches and self.records_before == self.records_after

    def __str__(self) -> str:
        head = f"{self.users} users, {len(self.mismatches)} mismatches"
        if self.records_before != self.records_after:
            head += f", cleaning dropped {self.records_before - self.records_after} records"
        return "\n".join([head] + self.mismatches)


def extract_all(corpus: Corpus, seg: Segmenter | None = None, sim: SimilarityConfig | None = None):
    """(profile, FeatureVector) for every user of an already-clean corpus."""
    out = []
    for prof in group_by_user(corpus):
        out.append((prof, extract(prof, count_similar_pairs(prof, seg, sim))))
    return out


def round_trip_check(cfg: SynthConfig | None = None) -> RoundTripReport:
    """Generate, clean, extract, and compare realized bins to the drawn ones."""
    corpus, plans = generate_with_plans(cfg)
    cleaned = clean(corpus)
    rep = RoundTripReport(users=len(plans), records_before=len(corpus), records_after=len(cleaned))
    realized = {prof.user_id: fv for prof, fv in extract_all(cleaned)}
    for plan in plans:
        fv = realized.get(plan.user_id)
        if fv is None:
            rep.mismatches.append(f"{plan.user_id}: removed by cleaning")
            continue
        got = feature_bins(fv)
        for name in FEATURES:
            if got[name] != plan.bins[name]:
                rep.mismatches.append(
                    f"{plan.user_id}: {name} drawn bin {plan.bins[name]}, realized {got[name]} ({fv})"
                )
        if fv.similar_pairs != plan.pairs:
            rep.mismatches.append(f"{plan.user_id}: pairs drawn {plan.pairs}, realized {fv.similar_pairs}")
    return rep


def bin_counts(vectors: Sequence[FeatureVector], feature: str) -> list[int]:
    counts = [0] * N_BINS[feature]
    for fv in vectors:
        counts[feature_bins(fv)[feature]] += 1
    return counts


def chi_square(counts: Sequence[int], weights: Sequence[float]) -> tuple[float, float]:
    """Goodness-of-fit of observed bin counts to weights.

    Bins with zero weight are dropped from the statistic; any observation in
    one of them makes the fit impossible and yields p = 0.
    """
    from scipy.stats import chisquare

    total = sum(counts)
    obs, exp = [], []
    for c, w in zip(counts, weights):
        if w == 0:
            if c:
                return math.inf, 0.0
            continue
        obs.append(c)
        exp.append(w * total)
    if len(obs) < 2:
        return 0.0, 1.0
    res = chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue)


# --------------------------------------------------------------------------
# config files


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_config(path: str | Path, base: SynthConfig | None = None) -> SynthConfig:
    """Read a ``[synth]`` INI section.

    Scalar keys mirror SynthConfig fields; ``normal.<feature>`` and
    ``paid.<feature>`` replace a weight vector, e.g. ``paid.reply = 84.29 15.71``.
    """
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    return config_from_section(parser["synth"] if parser.has_section("synth") else {}, base)


def config_from_section(section, base: SynthConfig | None = None) -> SynthConfig:
    cfg = base or SynthConfig()
    simple = {f.name for f in fields(SynthConfig)} - {"normal", "paid"}
    changes: dict = {}
    dists = {"normal": {}, "paid": {}}
    for key, raw in section.items():
        if "." in key:
            cls, feat = key.split(".", 1)
            if cls not in dists or feat not in FEATURES:
                raise ValueError(f"unknown synth key {key!r}")
            dists[cls][feat] = _floats(raw)
        elif key in simple:
            if key == "user_prefix":
                changes[key] = raw
            elif key in ("extra_comments", "words_per_comment"):
                lo, hi = (int(v) for v in _floats(raw))
                changes[key] = (lo, hi)
            else:
                changes[key] = int(raw)
        else:
            raise ValueError(f"unknown synth key {key!r}")
    for cls, upd in dists.items():
        if upd:
            changes[cls] = replace(getattr(cfg, cls), **upd)
    return replace(cfg, **changes)
