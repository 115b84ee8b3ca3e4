"""Model clients, answer parsing, and evaluation metrics.

The model boundary is a single generate() call. Over HTTP it is a JSON POST
{"prompt", "max_tokens", "temperature"} answered by {"text",
"option_scores"?, "logprob"?}; the built-in stubs speak the same interface
in process. Metrics are computed over every test record: unparseable or
failed completions contribute fallback predictions and an invalid rate, so
n stays constant across models.
"""

from __future__ import annotations

import csv
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .chem import score_reactant_prediction
from .corpus import DataRecord, TaskManifest
from .promptgen import (
    ANSWER_NEGATIVE,
    ANSWER_POSITIVE,
    BinningSpec,
    PromptRecord,
    feature_similarity_fn,
    render_target,
    unbin_label,
)

__all__ = [
    "GenerationRequest",
    "GenerationResponse",
    "TransportError",
    "ModelClient",
    "HttpModelClient",
    "EchoClient",
    "MajorityClient",
    "NearestNeighborClient",
    "make_stub_client",
    "parse_binary_answer",
    "parse_regression_answer",
    "auroc",
    "auprc",
    "accuracy",
    "mae",
    "mse",
    "pearson",
    "spearman",
    "average_ranks",
    "EvalRow",
    "EvalResult",
    "evaluate_task",
    "write_result_json",
    "write_rows_csv",
    "read_result_json",
]


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.0
    stop: str | None = None


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    option_scores: dict[str, float] | None = None
    logprob: float | None = None
    latency: float = 0.0


class TransportError(RuntimeError):
    """The endpoint could not be reached after retries."""


class ModelClient(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


class HttpModelClient:
    """POSTs the generation contract to a single endpoint, with retries.

    Connection failures, timeouts, and 5xx responses are retried with capped
    exponential backoff; anything else is an immediate error.
    """

    def __init__(self, url: str, timeout: float = 60.0, max_attempts: int = 4, backoff: float = 0.25):
        self.url = url
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        import requests

        body = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        last = None
        for attempt in range(self.max_attempts):
            started = time.monotonic()
            try:
                resp = requests.post(self.url, json=body, timeout=self.timeout)
                if resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                else:
                    resp.raise_for_status()
                    payload = resp.json()
                    scores = payload.get("option_scores")
                    return GenerationResponse(
                        text=payload.get("text", ""),
                        option_scores={str(k): float(v) for k, v in scores.items()}
                        if scores
                        else None,
                        logprob=payload.get("logprob"),
                        latency=time.monotonic() - started,
                    )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = str(exc)
            except requests.HTTPError as exc:
                raise TransportError(f"{self.url}: {exc}") from exc
            except ValueError as exc:
                raise TransportError(f"{self.url}: bad JSON response: {exc}") from exc
            if attempt + 1 < self.max_attempts:
                time.sleep(min(self.backoff * (2**attempt), 4.0))
        raise TransportError(f"{self.url}: unreachable after {self.max_attempts} attempts ({last})")


class EchoClient:
    """Returns the known target for each prompt; a closed-loop sanity model."""

    def __init__(self, prompts: Sequence[PromptRecord]):
        self._answers = {p.prompt: p.target for p in prompts}

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        return GenerationResponse(text=self._answers.get(request.prompt, ""))


class MajorityClient:
    """Always answers with one fixed string."""

    def __init__(self, answer: str = ANSWER_POSITIVE):
        self.answer = answer

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        return GenerationResponse(text=self.answer)


class NearestNeighborClient:
    """Answers with the rendered target of the most similar train record.

    The query's features are recovered from the prompt text itself (the last
    occurrence of each role line), so the stub sees exactly what a model sees.
    """

    def __init__(self, manifest: TaskManifest, train_records: Sequence[DataRecord]):
        self.manifest = manifest
        self.train = list(train_records)
        self._similarity = feature_similarity_fn(manifest, self.train)

    def _parse_features(self, prompt: str) -> dict[str, str] | None:
        features = {}
        for role in self.manifest.roles:
            matches = re.findall(
                rf"^{re.escape(role.label)}: (.*)$", prompt, flags=re.MULTILINE
            )
            if not matches:
                return None
            features[role.name] = matches[-1]
        return features

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        features = self._parse_features(request.prompt)
        if features is None or self._similarity is None or not self.train:
            return GenerationResponse(text="")
        probe = DataRecord(record_id="__query__", features=features, label="")
        best_i = max(
            range(len(self.train)),
            key=lambda i: (self._similarity(probe, i), -i),
        )
        return GenerationResponse(text=render_target(self.train[best_i], self.manifest))


def make_stub_client(
    name: str,
    manifest: TaskManifest | None = None,
    prompts: Sequence[PromptRecord] = (),
    train_records: Sequence[DataRecord] = (),
) -> ModelClient:
    if name == "echo":
        return EchoClient(prompts)
    if name == "majority":
        return MajorityClient()
    if name == "knn":
        if manifest is None:
            raise ValueError("knn stub needs the task manifest")
        return NearestNeighborClient(manifest, train_records)
    raise ValueError(f"unknown stub {name!r}")


# ---------------------------------------------------------------------------
# Answer parsing
# ---------------------------------------------------------------------------


def parse_binary_answer(
    completion: str, option_scores: dict[str, float] | None = None
) -> tuple[str | None, float, bool]:
    """First "(A)"/"(B)" token decides the class.

    Returns (class, ranking_score, valid). The ranking score is the model's
    score for "(B)" when supplied, otherwise 1.0/0.0 from the hard class and
    0.5 for unparseable output.
    """
    pos_a = completion.find(ANSWER_NEGATIVE)
    pos_b = completion.find(ANSWER_POSITIVE)
    if pos_a == -1 and pos_b == -1:
        cls = None
    elif pos_a == -1 or (pos_b != -1 and pos_b < pos_a):
        cls = ANSWER_POSITIVE
    else:
        cls = ANSWER_NEGATIVE
    if option_scores and ANSWER_POSITIVE in option_scores:
        score = float(option_scores[ANSWER_POSITIVE])
    elif cls == ANSWER_POSITIVE:
        score = 1.0
    elif cls == ANSWER_NEGATIVE:
        score = 0.0
    else:
        score = 0.5
    return cls, score, cls is not None


_INT = re.compile(r"\d+")


def parse_regression_answer(completion: str, spec: BinningSpec) -> tuple[float, bool]:
    """First integer token, clamped to the bin range and unbinned.

    Unparseable output falls back to the midpoint bin so n stays constant;
    callers report the invalid rate alongside the metric.
    """
    match = _INT.search(completion)
    if match is None:
        return unbin_label(spec.levels // 2, spec), False
    b = min(int(match.group()), spec.levels)
    return unbin_label(b, spec), True


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties averaged."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def auroc(scores, labels) -> float | None:
    """Rank (Mann-Whitney) formulation: (wins + ties/2) / (P*N)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    pos = int(labels.sum())
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        return None
    ranks = average_ranks(scores)
    rank_sum = float(ranks[labels].sum())
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg)


def auprc(scores, labels) -> float | None:
    """Average precision; score ties keep stable record order."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    pos = int(labels.sum())
    if pos == 0:
        return None
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0.0
    total = 0.0
    for rank, i in enumerate(order, 1):
        if labels[i]:
            hits += 1
            total += hits / rank
    return total / pos


def accuracy(predictions, targets) -> float:
    if len(predictions) != len(targets):
        raise ValueError("length mismatch")
    if not predictions:
        raise ValueError("empty input")
    return sum(p == t for p, t in zip(predictions, targets)) / len(predictions)


def mae(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("bad input shapes")
    return float(np.mean(np.abs(p - t)))


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("bad input shapes")
    return float(np.mean((p - t) ** 2))


def pearson(predictions, targets) -> float | None:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.size != t.size or p.size < 2:
        raise ValueError("need at least two pairs")
    sp = p - p.mean()
    st = t - t.mean()
    denom = math.sqrt(float((sp**2).sum()) * float((st**2).sum()))
    if denom == 0.0:
        return None
    return float((sp * st).sum()) / denom


def spearman(predictions, targets) -> float | None:
    """Pearson correlation of average ranks."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.size != t.size or p.size < 2:
        raise ValueError("need at least two pairs")
    return pearson(average_ranks(p), average_ranks(t))


# ---------------------------------------------------------------------------
# Task evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalRow:
    record_id: str
    subtask: str | None
    target: str
    completion: str
    prediction: object
    truth: object
    score: float
    valid: bool
    failed: bool = False


@dataclass
class EvalResult:
    task_id: str
    metric: str
    value: float | None
    n: int
    invalid_rate: float
    rows: list[EvalRow] = field(default_factory=list)
    subtask_values: dict[str, float | None] | None = None
    undefined_reason: str | None = None
    failures: list[str] = field(default_factory=list)
    lower_is_better: bool = False


def _metric_over_rows(metric: str, rows: list[EvalRow]) -> float | None:
    if metric == "auroc":
        return auroc([r.score for r in rows], [bool(r.truth) for r in rows])
    if metric == "auprc":
        return auprc([r.score for r in rows], [bool(r.truth) for r in rows])
    if metric == "accuracy":
        return accuracy([r.prediction for r in rows], [r.target for r in rows])
    if metric == "set_accuracy":
        return sum(r.score for r in rows) / len(rows)
    predictions = [float(r.prediction) for r in rows]
    truths = [float(r.truth) for r in rows]
    if metric == "mae":
        return mae(predictions, truths)
    if metric == "mse":
        return mse(predictions, truths)
    if metric == "pearson":
        return pearson(predictions, truths)
    if metric == "spearman":
        return spearman(predictions, truths)
    raise ValueError(f"unknown metric {metric!r}")


def score_rows(metric: str, rows: list[EvalRow]) -> tuple[float | None, dict | None, str | None]:
    """Metric value over rows, per-subtask values when subtasks exist."""
    if not rows:
        return None, None, "no rows"
    subtasks = {r.subtask for r in rows}
    if subtasks != {None}:
        per: dict[str, float | None] = {}
        for name in sorted(s for s in subtasks if s is not None):
            per[name] = _metric_over_rows(metric, [r for r in rows if r.subtask == name])
        defined = [v for v in per.values() if v is not None]
        if not defined:
            return None, per, "metric undefined for every subtask"
        return float(np.mean(defined)), per, None
    value = _metric_over_rows(metric, rows)
    if value is None:
        return None, None, "metric undefined (degenerate labels or scores)"
    return value, None, None


def _row_for_prompt(
    prompt: PromptRecord,
    manifest: TaskManifest,
    response: GenerationResponse | None,
    failure: str | None,
) -> EvalRow:
    completion = response.text if response else ""
    scores = response.option_scores if response else None
    if manifest.task_kind == "binary":
        truth = prompt.target == ANSWER_POSITIVE
        cls, score, valid = parse_binary_answer(completion, scores)
        if failure:
            cls, score, valid = None, 0.5, False
        prediction = cls
    elif manifest.task_kind == "regression":
        spec = BinningSpec.from_manifest(manifest)
        truth = unbin_label(min(int(prompt.target), spec.levels), spec)
        prediction, valid = parse_regression_answer(completion, spec)
        if failure:
            prediction, valid = unbin_label(spec.levels // 2, spec), False
        score = 0.0
    else:
        truth = prompt.target
        if failure:
            score_value, valid = 0, False
        else:
            score_value, valid = score_reactant_prediction(completion, prompt.target)
        prediction = completion
        score = float(score_value)
    return EvalRow(
        record_id=prompt.record_id,
        subtask=prompt.subtask,
        target=prompt.target,
        completion=completion,
        prediction=prediction,
        truth=truth,
        score=score,
        valid=valid,
        failed=failure is not None,
    )


def evaluate_task(
    manifest: TaskManifest,
    prompts: Sequence[PromptRecord],
    client: ModelClient,
    concurrency: int = 4,
    max_output_tokens: int = 512,
) -> EvalResult:
    """Drive the model over every prompt and compute the task metric.

    Requests run concurrently up to the limit but results are reduced in
    input order, so the output is identical for any concurrency setting.
    Records that fail transport after retries are kept as invalid rows.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")

    def call(prompt: PromptRecord):
        request = GenerationRequest(
            prompt=prompt.prompt, max_tokens=max_output_tokens, temperature=0.0
        )
        try:
            return client.generate(request), None
        except TransportError as exc:
            return None, str(exc)

    if concurrency == 1:
        outcomes = [call(p) for p in prompts]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            outcomes = list(pool.map(call, prompts))

    rows = [
        _row_for_prompt(prompt, manifest, response, failure)
        for prompt, (response, failure) in zip(prompts, outcomes)
    ]
    failures = [
        f"{prompt.record_id}: {failure}"
        for prompt, (_, failure) in zip(prompts, outcomes)
        if failure
    ]
    value, per_subtask, reason = score_rows(manifest.metric, rows)
    invalid = sum(1 for r in rows if not r.valid)
    return EvalResult(
        task_id=manifest.task_id,
        metric=manifest.metric,
        value=value,
        n=len(rows),
        invalid_rate=invalid / len(rows) if rows else 0.0,
        rows=rows,
        subtask_values=per_subtask,
        undefined_reason=reason,
        failures=failures,
        lower_is_better=manifest.lower_is_better,
    )


def write_result_json(result: EvalResult, path) -> None:
    payload = {
        "task": result.task_id,
        "metric": result.metric,
        "lower_is_better": result.lower_is_better,
        "value": result.value,
        "n": result.n,
        "invalid_rate": result.invalid_rate,
        "undefined_reason": result.undefined_reason,
        "failures": result.failures,
    }
    if result.subtask_values is not None:
        payload["subtask_values"] = result.subtask_values
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def read_result_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_rows_csv(result: EvalResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["record_id", "subtask", "target", "completion", "prediction", "truth", "score", "valid", "failed"]
        )
        for r in result.rows:
            writer.writerow(
                [
                    r.record_id,
                    r.subtask or "",
                    r.target,
                    r.completion,
                    r.prediction,
                    r.truth,
                    r.score,
                    int(r.valid),
                    int(r.failed),
                ]
            )
