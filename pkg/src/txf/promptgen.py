"""Prompt rendering, label binning, shot selection, and mixture building.

Prompts have four blocks (Instructions, Context, Question, Answer) separated
by blank lines. Few-shot exemplars sit between the question and the query as
role lines followed by a completed answer line. The query itself ends with a
bare "Answer:" that the model must complete.
"""

from __future__ import annotations

import json
import math
import random
import re
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .bioseq import BioSequence, percent_identity
from .chem import SmilesParseError, morgan_fingerprint, parse_smiles, tanimoto
from .corpus import DataRecord, TaskManifest

__all__ = [
    "ANSWER_NEGATIVE",
    "ANSWER_POSITIVE",
    "BinningSpec",
    "PromptRecord",
    "MixtureSpec",
    "bin_label",
    "unbin_label",
    "render_target",
    "render_prompt",
    "select_shots_random",
    "select_shots_knn",
    "feature_similarity_fn",
    "fit_length_budget",
    "build_mixture",
    "default_token_estimator",
    "shot_source_splits",
    "write_prompt_jsonl",
    "read_prompt_jsonl",
]

# Fixed option order for binary answers: (A) negative, (B) positive.
ANSWER_NEGATIVE = "(A)"
ANSWER_POSITIVE = "(B)"

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class BinningSpec:
    """Uniform binning of a numeric label range onto integer bins 0..levels."""

    minimum: float
    maximum: float
    levels: int = 1000

    def __post_init__(self):
        if not (self.minimum < self.maximum):
            raise ValueError("binning needs minimum < maximum")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @classmethod
    def from_manifest(cls, manifest: TaskManifest) -> "BinningSpec":
        if manifest.label_range is None:
            raise ValueError(f"{manifest.task_id}: no label range to bin with")
        lo, hi = manifest.label_range
        return cls(minimum=lo, maximum=hi)


def bin_label(y: float, spec: BinningSpec) -> tuple[int, str]:
    """Clamp y into the range and round to the nearest bin.

    Rendered zero-padded to three digits; the top bin renders as "1000".
    Rounding is half-up so the mapping is monotone and platform-independent.
    """
    if math.isnan(y):
        raise ValueError("cannot bin NaN")
    clamped = min(max(y, spec.minimum), spec.maximum)
    t = (clamped - spec.minimum) / (spec.maximum - spec.minimum)
    b = math.floor(t * spec.levels + 0.5)
    return b, f"{b:03d}"


def unbin_label(b: int, spec: BinningSpec) -> float:
    """Map a bin index back to the original label space."""
    if not (0 <= b <= spec.levels):
        raise ValueError(f"bin {b} outside 0..{spec.levels}")
    return spec.minimum + (b / spec.levels) * (spec.maximum - spec.minimum)


@dataclass(frozen=True)
class PromptRecord:
    task_id: str
    record_id: str
    split: str
    prompt: str
    target: str
    shot_ids: tuple[str, ...] = ()
    estimated_length: int = 0
    over_budget: bool = False
    subtask: str | None = None

    @property
    def shot_count(self) -> int:
        return len(self.shot_ids)


@dataclass(frozen=True)
class MixtureSpec:
    zero_shot_fraction: float = 0.7
    shot_min: int = 1
    shot_max: int = 10
    input_budget: int = 2048
    output_budget: int = 512
    seed: int = 1

    def __post_init__(self):
        if not (0.0 <= self.zero_shot_fraction <= 1.0):
            raise ValueError("zero_shot_fraction must lie in [0, 1]")
        if self.shot_min < 1 or self.shot_max < self.shot_min:
            raise ValueError("shot range must be nonempty and start at >= 1")


def default_token_estimator(text: str) -> int:
    """Cheap monotone token estimate: ceil(utf-8 bytes / 4)."""
    return -(-len(text.encode("utf-8")) // 4)


def render_target(record: DataRecord, manifest: TaskManifest) -> str:
    if manifest.task_kind == "binary":
        return ANSWER_POSITIVE if record.label else ANSWER_NEGATIVE
    if manifest.task_kind == "regression":
        _, text = bin_label(float(record.label), BinningSpec.from_manifest(manifest))
        return text
    return str(record.label)


def _fill(template: str, record: DataRecord, manifest: TaskManifest) -> tuple[str, set[str]]:
    """Substitute {role} and {subtask} placeholders; returns used role names."""
    used: set[str] = set()

    def sub(match):
        name = match.group(1)
        if name == "subtask":
            return record.subtask or ""
        if any(r.name == name for r in manifest.roles):
            used.add(name)
            return record.features[name]
        raise KeyError(f"template references undeclared role {name!r}")

    return _PLACEHOLDER.sub(sub, template), used


def _role_lines(record: DataRecord, manifest: TaskManifest, skip: set[str]) -> list[str]:
    return [
        f"{role.label}: {record.features[role.name]}"
        for role in manifest.roles
        if role.name not in skip
    ]


def render_prompt(
    record: DataRecord,
    manifest: TaskManifest,
    shots: Sequence[DataRecord] = (),
    estimator: Callable[[str], int] = default_token_estimator,
    budget: int | None = None,
) -> PromptRecord:
    """Render one example into the canonical block layout.

    Layout: "Instructions: ...", "Context: ...", "Question: ..." blocks, one
    blank line apart; then for each shot its role lines and a completed
    "Answer: <target>"; then the query's role lines and a trailing "Answer:".
    """
    instruction, _ = _fill(manifest.instruction, record, manifest)
    context, _ = _fill(manifest.context, record, manifest)
    question, used = _fill(manifest.question, record, manifest)

    blocks = [
        f"Instructions: {instruction}",
        f"Context: {context}",
        f"Question: {question}",
    ]
    for shot in shots:
        blocks.extend(_role_lines(shot, manifest, used))
        blocks.append(f"Answer: {render_target(shot, manifest)}")
    blocks.extend(_role_lines(record, manifest, used))
    blocks.append("Answer:")
    prompt = "\n\n".join(blocks)

    over = False
    estimate = estimator(prompt)
    if budget is not None:
        over = estimate > budget
    return PromptRecord(
        task_id=manifest.task_id,
        record_id=record.record_id,
        split=record.split or "",
        prompt=prompt,
        target=render_target(record, manifest),
        shot_ids=tuple(s.record_id for s in shots),
        estimated_length=estimate,
        over_budget=over,
        subtask=record.subtask,
    )


def select_shots_random(
    pool: Sequence[DataRecord], n: int, seed: int, exclude_id: str | None = None
) -> list[DataRecord]:
    """n distinct uniform draws from the pool, the query itself excluded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eligible = [r for r in pool if r.record_id != exclude_id]
    if not eligible:
        raise ValueError("empty shot pool")
    rng = random.Random(seed)
    if n >= len(eligible):
        picked = list(eligible)
        rng.shuffle(picked)
        return picked
    return rng.sample(eligible, n)


def feature_similarity_fn(manifest: TaskManifest, pool: Sequence[DataRecord]):
    """similarity(query_record, pool_index) callable, or None when no
    feature of the manifest supports a similarity measure."""
    kind, roles = manifest.similarity_roles()
    if not kind:
        return None
    if kind == "smiles":
        role = roles[0].name

        def fp(record):
            try:
                return morgan_fingerprint(parse_smiles(record.features[role]))
            except SmilesParseError:
                return None

        pool_fps = [fp(r) for r in pool]

        def similarity(query, i):
            qfp = fp(query)
            if qfp is None or pool_fps[i] is None:
                return 0.0
            return tanimoto(qfp, pool_fps[i])

        return similarity

    seq_kind = kind
    names = [r.name for r in roles]

    def seq(record, name):
        try:
            return BioSequence(record.features[name], seq_kind)
        except ValueError:
            return None

    pool_seqs = [{name: seq(r, name) for name in names} for r in pool]

    def similarity(query, i):
        # Multi-sequence features average the per-role identities.
        total, count = 0.0, 0
        for name in names:
            qs, ps = seq(query, name), pool_seqs[i][name]
            if qs is None or ps is None:
                continue
            total += percent_identity(qs, ps)
            count += 1
        return total / count if count else 0.0

    return similarity


def select_shots_knn(
    query: DataRecord,
    pool: Sequence[DataRecord],
    n: int,
    manifest: TaskManifest,
    seed: int = 1,
) -> list[DataRecord]:
    """The n nearest pool records by feature similarity, nearest first.

    Molecules compare by fingerprint Tanimoto on the first smiles role;
    sequence features by percent identity averaged over same-kind roles.
    Ties break on ascending pool index. Falls back to random shots, with a
    warning, when no feature supports similarity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eligible = [(i, r) for i, r in enumerate(pool) if r.record_id != query.record_id]
    if not eligible:
        raise ValueError("empty shot pool")
    similarity = feature_similarity_fn(manifest, pool)
    if similarity is None:
        warnings.warn(
            f"{manifest.task_id}: no similarity-capable role; using random shots",
            stacklevel=2,
        )
        return select_shots_random(pool, n, seed, exclude_id=query.record_id)
    scored = sorted(
        ((i, similarity(query, i)) for i, _ in eligible),
        key=lambda item: (-item[1], item[0]),
    )
    index = {i: r for i, r in eligible}
    return [index[i] for i, _ in scored[: min(n, len(scored))]]


def shot_source_splits(eval_split: str) -> tuple[str, ...]:
    """Which splits may donate shots when evaluating a given split.

    Training prompts draw from train; validation evaluation draws from train
    only; test evaluation draws from train and valid combined.
    """
    if eval_split == "test":
        return ("train", "valid")
    return ("train",)


def fit_length_budget(
    record: DataRecord,
    manifest: TaskManifest,
    shots: Sequence[DataRecord],
    budget: int,
    estimator: Callable[[str], int] = default_token_estimator,
) -> PromptRecord:
    """Drop shots from the end of the list until the estimate fits the budget.

    A zero-shot prompt that still exceeds the budget is kept and flagged.
    """
    shots = list(shots)
    while True:
        rendered = render_prompt(record, manifest, shots, estimator=estimator, budget=budget)
        if rendered.estimated_length <= budget or not shots:
            return rendered
        shots.pop()


def build_mixture(
    tasks: dict[str, tuple[TaskManifest, Sequence[DataRecord]]],
    spec: MixtureSpec,
    count: int,
    estimator: Callable[[str], int] = default_token_estimator,
) -> Iterator[PromptRecord]:
    """Sample a finetuning mixture across tasks.

    Tasks are drawn with probability proportional to their train-record
    count, records uniformly within the task. A configurable fraction of
    prompts is zero-shot; the rest take a uniform 1..10 random shots from the
    same task's train set, trimmed to the input budget. Fully reproducible
    from the configured seed.
    """
    if not tasks:
        raise ValueError("no tasks to mix")
    task_ids = sorted(tasks)
    pools = {}
    for task_id in task_ids:
        manifest, records = tasks[task_id]
        pool = [r for r in records if r.split in (None, "train")]
        if not pool:
            raise ValueError(f"{task_id}: no train records")
        pools[task_id] = (manifest, pool)
    weights = [len(pools[t][1]) for t in task_ids]
    rng = random.Random(spec.seed)
    few_shot_fraction = 1.0 - spec.zero_shot_fraction

    for _ in range(count):
        task_id = rng.choices(task_ids, weights=weights, k=1)[0]
        manifest, pool = pools[task_id]
        record = pool[rng.randrange(len(pool))]
        shots: Sequence[DataRecord] = ()
        if rng.random() < few_shot_fraction and len(pool) > 1:
            want = rng.randint(spec.shot_min, spec.shot_max)
            shots = select_shots_random(
                pool, want, seed=rng.randrange(1 << 30), exclude_id=record.record_id
            )
        yield fit_length_budget(record, manifest, shots, spec.input_budget, estimator)


def write_prompt_jsonl(records: Iterable[PromptRecord], path) -> None:
    """One UTF-8 JSON object per line; the contract with trainers/evaluators."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "task": r.task_id,
                "record_id": r.record_id,
                "split": r.split,
                "prompt": r.prompt,
                "target": r.target,
                "shots": list(r.shot_ids),
                "estimated_length": r.estimated_length,
                "over_budget": r.over_budget,
            }
            if r.subtask is not None:
                obj["subtask"] = r.subtask
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_prompt_jsonl(path) -> list[PromptRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                PromptRecord(
                    task_id=obj["task"],
                    record_id=obj["record_id"],
                    split=obj["split"],
                    prompt=obj["prompt"],
                    target=obj["target"],
                    shot_ids=tuple(obj.get("shots", ())),
                    estimated_length=obj.get("estimated_length", 0),
                    over_budget=obj.get("over_budget", False),
                    subtask=obj.get("subtask"),
                )
            )
    return out
