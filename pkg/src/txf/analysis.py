"""Cross-model statistics: scoreboards against state of the art, paired
signed-rank comparisons, and the pretraining-corpus contamination scan."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .evalharness import EvalResult, score_rows

__all__ = [
    "ScoreRow",
    "PairRow",
    "ComparisonResult",
    "ScoreboardCounts",
    "relative_difference",
    "scoreboard",
    "median_relative_difference_by_feature_type",
    "wilcoxon_signed_rank",
    "compare_pairs",
    "AhoCorasick",
    "ContaminationReport",
    "contamination_scan",
    "filtered_eval",
    "load_score_rows",
    "load_pair_rows",
]


@dataclass(frozen=True)
class ScoreRow:
    task: str
    feature_type: str
    metric: str
    lower_is_better: bool
    sota: float | None
    model: float


@dataclass(frozen=True)
class PairRow:
    task: str
    metric: str
    lower_is_better: bool
    a: float
    b: float
    tie_winner: str | None = None  # "a" or "b" when the rounded values tie


def relative_difference(row: ScoreRow) -> float:
    """(model - sota) / sota, sign reversed for lower-is-better metrics."""
    if row.sota is None:
        raise ValueError(f"{row.task}: no reference value")
    if row.sota == 0:
        raise ValueError(f"{row.task}: zero reference value")
    d = (row.model - row.sota) / row.sota
    return -d if row.lower_is_better else d


def _is_near(row: ScoreRow, threshold: float) -> bool:
    """Within-threshold check for rows that do not exceed the reference.

    Higher-is-better metrics compare relative difference directly. Error
    magnitudes (MAE/MSE) depend on the label units, so they are compared on
    a log10 scale: near means |log10(model / sota)| <= threshold. Both
    boundaries are inclusive.
    """
    if row.lower_is_better and row.model > 0 and row.sota > 0:
        return abs(math.log10(row.model / row.sota)) <= threshold
    return abs(relative_difference(row)) <= threshold


@dataclass
class ScoreboardCounts:
    exceed: int = 0
    near: int = 0
    below: int = 0
    no_sota: int = 0
    exceed_tasks: list[str] = field(default_factory=list)
    near_tasks: list[str] = field(default_factory=list)
    below_tasks: list[str] = field(default_factory=list)
    no_sota_tasks: list[str] = field(default_factory=list)

    @property
    def near_or_above(self) -> int:
        return self.exceed + self.near

    @property
    def total(self) -> int:
        return self.exceed + self.near + self.below + self.no_sota


def scoreboard(
    rows: Sequence[ScoreRow], near_threshold: float = 0.1, na_as_exceed: bool = True
) -> ScoreboardCounts:
    """Bucket each row as exceeding, near, or below the reference value.

    Rows with no reference count as exceeding by default (they represent
    best-in-class results); pass na_as_exceed=False to bucket them apart.
    """
    counts = ScoreboardCounts()
    for row in rows:
        if row.sota is None:
            if na_as_exceed:
                counts.exceed += 1
                counts.exceed_tasks.append(row.task)
            else:
                counts.no_sota += 1
                counts.no_sota_tasks.append(row.task)
            continue
        if relative_difference(row) > 0:
            counts.exceed += 1
            counts.exceed_tasks.append(row.task)
        elif _is_near(row, near_threshold):
            counts.near += 1
            counts.near_tasks.append(row.task)
        else:
            counts.below += 1
            counts.below_tasks.append(row.task)
    return counts


def median_relative_difference_by_feature_type(
    rows: Sequence[ScoreRow],
) -> dict[str, float]:
    """Median relative difference per feature type, over rows with a reference."""
    groups: dict[str, list[float]] = {}
    for row in rows:
        if row.sota is None:
            continue
        groups.setdefault(row.feature_type, []).append(relative_difference(row))
    out = {}
    for feature_type, values in groups.items():
        values.sort()
        n = len(values)
        mid = n // 2
        out[feature_type] = values[mid] if n % 2 else (values[mid - 1] + values[mid]) / 2
    return out


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank comparison
# ---------------------------------------------------------------------------


@dataclass
class ComparisonResult:
    n_input: int
    n_used: int
    wins_a: int
    wins_b: int
    zeros: int
    statistic: float
    p_value: float
    differences: list[float] = field(default_factory=list)


def _signed_rank_p_exact(ranks: list[float], w_min: float, n: int) -> float:
    # Ranks may be half-integers under ties; work in doubled units so the
    # subset-sum table stays integral.
    doubled = [round(2 * r) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for d in doubled:
        for s in range(total, d - 1, -1):
            if counts[s - d]:
                counts[s] += counts[s - d]
    w2 = round(2 * w_min)
    favorable = sum(counts[: min(w2, total) + 1])
    p = 2.0 * favorable / (2**n)
    return min(1.0, p)


def _signed_rank_p_normal(w_min: float, n: int) -> float:
    mu = n * (n + 1) / 4
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24)
    if sigma == 0:
        return 1.0
    # Continuity-corrected two-sided tail from the smaller statistic.
    z = (mu - w_min - 0.5) / (sigma * math.sqrt(2))
    return min(1.0, math.erfc(z))


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    lower_is_better: Sequence[bool] | bool = False,
    exact_limit: int = 25,
) -> ComparisonResult:
    """Paired two-sided signed-rank test on mean-normalized differences.

    Per pair, d = (b - a) / mean(a, b), sign-reversed for lower-is-better
    metrics so positive d always means b performed better. Zero differences
    are dropped; |d| ties get average ranks. W = min(W+, W-); the null is
    enumerated exactly up to exact_limit pairs and approximated normally
    (with continuity correction) above.
    """
    if len(a) != len(b):
        raise ValueError("paired inputs must have equal length")
    if len(a) < 5:
        raise ValueError("need at least 5 pairs")
    if isinstance(lower_is_better, bool):
        directions = [lower_is_better] * len(a)
    else:
        directions = list(lower_is_better)
        if len(directions) != len(a):
            raise ValueError("directions length mismatch")

    diffs = []
    wins_a = wins_b = zeros = 0
    for x, y, lower in zip(a, b, directions):
        mean = (x + y) / 2
        d = (y - x) / mean if mean != 0 else (y - x)
        if lower:
            d = -d
        if d > 0:
            wins_b += 1
        elif d < 0:
            wins_a += 1
        else:
            zeros += 1
        diffs.append(d)

    nonzero = [d for d in diffs if d != 0]
    n = len(nonzero)
    if n == 0:
        return ComparisonResult(
            n_input=len(a), n_used=0, wins_a=wins_a, wins_b=wins_b, zeros=zeros,
            statistic=0.0, p_value=1.0, differences=diffs,
        )

    order = sorted(range(n), key=lambda i: abs(nonzero[i]))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(nonzero[order[j + 1]]) == abs(nonzero[order[i]]):
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1

    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, nonzero) if d < 0)
    w = min(w_plus, w_minus)
    if n <= exact_limit:
        p = _signed_rank_p_exact(ranks, w, n)
    else:
        p = _signed_rank_p_normal(w, n)
    return ComparisonResult(
        n_input=len(a), n_used=n, wins_a=wins_a, wins_b=wins_b, zeros=zeros,
        statistic=w, p_value=min(p, 1.0), differences=diffs,
    )


def compare_pairs(pairs: Sequence[PairRow], exact_limit: int = 25) -> ComparisonResult:
    """Signed-rank comparison over per-task pairs.

    Ties at the recorded precision are attributed to the side marked in
    tie_winner for the win counts; the test itself still drops them as zero
    differences.
    """
    result = wilcoxon_signed_rank(
        [p.a for p in pairs],
        [p.b for p in pairs],
        [p.lower_is_better for p in pairs],
        exact_limit=exact_limit,
    )
    for pair in pairs:
        if pair.a == pair.b and pair.tie_winner in ("a", "b"):
            result.zeros -= 1
            if pair.tie_winner == "a":
                result.wins_a += 1
            else:
                result.wins_b += 1
    return result


# ---------------------------------------------------------------------------
# Contamination scan
# ---------------------------------------------------------------------------


class AhoCorasick:
    """Multi-pattern substring automaton; state survives across text chunks."""

    def __init__(self):
        self._next: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._output: list[set[int]] = [set()]
        self._state = 0
        self._built = False

    def add(self, pattern: str, pattern_id: int) -> None:
        if self._built:
            raise RuntimeError("automaton already built")
        if not pattern:
            return
        state = 0
        for ch in pattern:
            nxt = self._next[state].get(ch)
            if nxt is None:
                nxt = len(self._next)
                self._next[state][ch] = nxt
                self._next.append({})
                self._fail.append(0)
                self._output.append(set())
            state = nxt
        self._output[state].add(pattern_id)

    def build(self) -> None:
        queue = deque()
        for state in self._next[0].values():
            self._fail[state] = 0
            queue.append(state)
        while queue:
            r = queue.popleft()
            for ch, s in self._next[r].items():
                queue.append(s)
                state = self._fail[r]
                while state and ch not in self._next[state]:
                    state = self._fail[state]
                self._fail[s] = self._next[state].get(ch, 0)
                if self._fail[s] == s:
                    self._fail[s] = 0
                self._output[s] |= self._output[self._fail[s]]
        self._built = True

    def reset(self) -> None:
        self._state = 0

    def feed(self, chunk: str) -> set[int]:
        """Advance through a chunk; returns ids of patterns that matched."""
        if not self._built:
            raise RuntimeError("call build() first")
        found: set[int] = set()
        state = self._state
        nxt, fail, output = self._next, self._fail, self._output
        for ch in chunk:
            while state and ch not in nxt[state]:
                state = fail[state]
            state = nxt[state].get(ch, 0)
            if output[state]:
                found |= output[state]
        self._state = state
        return found


@dataclass
class ContaminationReport:
    flags: dict[str, bool]
    n_records: int
    n_flagged: int
    percent_overlap: float


def contamination_scan(
    features: Sequence[tuple[str, Sequence[str]]],
    corpus_chunks: Iterable[str],
    max_chars: int = 512,
) -> ContaminationReport:
    """Flag records whose feature strings occur verbatim in a text corpus.

    Each feature contributes its first max_chars characters as a search
    pattern; a record is flagged when any of its patterns appears as a
    contiguous substring anywhere in the corpus. All patterns are compiled
    into one automaton so the corpus is streamed in a single pass.
    """
    automaton = AhoCorasick()
    pattern_records: list[list[str]] = []
    pattern_ids: dict[str, int] = {}
    for record_id, values in features:
        for value in values:
            target = value[:max_chars]
            if not target:
                continue
            pid = pattern_ids.get(target)
            if pid is None:
                pid = len(pattern_records)
                pattern_ids[target] = pid
                pattern_records.append([])
                automaton.add(target, pid)
            pattern_records[pid].append(record_id)
    automaton.build()

    flagged: set[str] = set()
    for chunk in corpus_chunks:
        for pid in automaton.feed(chunk):
            flagged.update(pattern_records[pid])

    flags = {record_id: record_id in flagged for record_id, _ in features}
    n = len(flags)
    n_flagged = sum(flags.values())
    return ContaminationReport(
        flags=flags,
        n_records=n,
        n_flagged=n_flagged,
        percent_overlap=100.0 * n_flagged / n if n else 0.0,
    )


def filtered_eval(result: EvalResult, flags: dict[str, bool]) -> EvalResult:
    """Recompute the metric over rows whose record is not flagged."""
    kept = [r for r in result.rows if not flags.get(r.record_id, False)]
    if not kept:
        return EvalResult(
            task_id=result.task_id,
            metric=result.metric,
            value=None,
            n=0,
            invalid_rate=0.0,
            rows=[],
            undefined_reason="all rows flagged",
            lower_is_better=result.lower_is_better,
        )
    value, per_subtask, reason = score_rows(result.metric, kept)
    invalid = sum(1 for r in kept if not r.valid)
    return EvalResult(
        task_id=result.task_id,
        metric=result.metric,
        value=value,
        n=len(kept),
        invalid_rate=invalid / len(kept),
        rows=kept,
        subtask_values=per_subtask,
        undefined_reason=reason,
        lower_is_better=result.lower_is_better,
    )


# ---------------------------------------------------------------------------
# Fixture loading
# ---------------------------------------------------------------------------


def _read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def load_score_rows(path, model_col: str = "model") -> list[ScoreRow]:
    """Rows of task,feature_type,metric,lower_is_better,sota,<model_col>."""
    rows = []
    for rec in _read_csv(path):
        sota_raw = (rec.get("sota") or "").strip()
        rows.append(
            ScoreRow(
                task=rec["task"],
                feature_type=rec.get("feature_type", ""),
                metric=rec["metric"],
                lower_is_better=rec["lower_is_better"].strip().lower() == "true",
                sota=float(sota_raw) if sota_raw else None,
                model=float(rec[model_col]),
            )
        )
    return rows


def load_pair_rows(path, a_col: str, b_col: str) -> list[PairRow]:
    """Paired per-task values; a tie_winner column is honored when present."""
    pairs = []
    for rec in _read_csv(path):
        tie = (rec.get("tie_winner") or "").strip() or None
        pairs.append(
            PairRow(
                task=rec["task"],
                metric=rec["metric"],
                lower_is_better=rec["lower_is_better"].strip().lower() == "true",
                a=float(rec[a_col]),
                b=float(rec[b_col]),
                tie_winner=tie,
            )
        )
    return pairs
