import itertools
import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

import golden_tasks
from txf.corpus import DataRecord, RoleSpec, TaskManifest
from txf.evalharness import (
    EchoClient,
    GenerationRequest,
    HttpModelClient,
    MajorityClient,
    NearestNeighborClient,
    TransportError,
    accuracy,
    auprc,
    auroc,
    average_ranks,
    evaluate_task,
    mae,
    mse,
    parse_binary_answer,
    parse_regression_answer,
    pearson,
    read_result_json,
    spearman,
    write_result_json,
    write_rows_csv,
)
from txf.promptgen import BinningSpec, render_prompt


# --- answer parsing ----------------------------------------------------


def test_parse_binary_plain():
    assert parse_binary_answer("(B)") == ("(B)", 1.0, True)
    assert parse_binary_answer(" (A) because reasons") == ("(A)", 0.0, True)
    assert parse_binary_answer("maybe") == (None, 0.5, False)


def test_parse_binary_first_token_wins():
    cls, _, _ = parse_binary_answer("(A) not (B)")
    assert cls == "(A)"


def test_parse_binary_model_scores_preferred():
    cls, score, valid = parse_binary_answer("(A)", {"(A)": -0.2, "(B)": -1.7})
    assert cls == "(A)"
    assert score == -1.7
    assert valid


def test_parse_regression():
    spec = BinningSpec(0.0, 10.0)
    assert parse_regression_answer("788", spec) == (pytest.approx(7.88), True)
    assert parse_regression_answer("1200", spec) == (10.0, True)
    value, valid = parse_regression_answer("n/a", spec)
    assert not valid
    assert value == pytest.approx(5.0)


# --- metrics -----------------------------------------------------------


def test_auroc_trivials():
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5
    assert auroc([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0]) == 0.75
    assert auroc([0.9, 0.8], [1, 1]) is None


def _auroc_bruteforce(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def test_auroc_matches_pairwise_oracle():
    rng = random.Random(61)
    for _ in range(50):
        n = rng.randint(4, 60)
        labels = [rng.random() < 0.5 for _ in range(n)]
        if not any(labels) or all(labels):
            continue
        scores = [rng.choice([0.1, 0.25, 0.5, 0.75, 0.9]) for _ in range(n)]
        assert auroc(scores, labels) == pytest.approx(_auroc_bruteforce(scores, labels))


def _auprc_step_oracle(scores, labels):
    # precision at each positive hit in score-descending, stable order
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, out = 0, []
    for rank, i in enumerate(order, 1):
        if labels[i]:
            hits += 1
            out.append(hits / rank)
    return sum(out) / sum(labels)


def test_auprc_trivials_and_oracle():
    assert auprc([0.9, 0.8, 0.2], [1, 1, 0]) == 1.0
    assert auprc([0.9, 0.8, 0.1], [0, 0, 1]) == pytest.approx(1 / 3)
    assert auprc([0.5], [0]) is None
    rng = random.Random(67)
    for _ in range(30):
        n = rng.randint(3, 20)
        labels = [rng.random() < 0.4 for _ in range(n)]
        if not any(labels):
            continue
        scores = [rng.choice([0.2, 0.4, 0.6, 0.8]) for _ in range(n)]
        assert auprc(scores, labels) == pytest.approx(_auprc_step_oracle(scores, labels))


def test_regression_metrics():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([1.0, 3.0], [0.0, 0.0]) == 5.0
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [1, 1, 1]) is None
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert accuracy(["(A)", "(B)"], ["(A)", "(A)"]) == 0.5


def test_spearman_ties_match_rank_then_pearson():
    rng = random.Random(71)
    for _ in range(25):
        n = rng.randint(5, 30)
        a = [rng.choice([1.0, 2.0, 2.0, 3.0, 5.0]) for _ in range(n)]
        b = [rng.choice([0.5, 0.5, 1.5, 2.5]) for _ in range(n)]
        got = spearman(a, b)
        expected = pearson(average_ranks(a), average_ranks(b))
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected)


def test_average_ranks_ties():
    assert list(average_ranks([10.0, 20.0, 20.0, 30.0])) == [1.0, 2.5, 2.5, 4.0]


# --- stubs and evaluation ----------------------------------------------


def _binary_task(n=100):
    manifest = TaskManifest(
        task_id="toybin",
        task_kind="binary",
        roles=(RoleSpec("drug", "smiles", "Drug", "Drug SMILES"),),
        instruction="Answer.",
        context="Ctx.",
        question="Active?\n\n(A) no (B) yes",
        label_column="Y",
        metric="auroc",
        split_method="random",
    )
    records = [
        DataRecord(str(i), {"drug": "C" * (1 + i % 7)}, i % 2 == 0, split="test")
        for i in range(n)
    ]
    prompts = [render_prompt(r, manifest) for r in records]
    return manifest, records, prompts


def test_echo_stub_perfect_set_accuracy():
    manifest = golden_tasks.USPTO_MANIFEST
    records = [
        DataRecord(str(i), {"product": "CCO"}, "CC.O" if i % 2 else "O.CC", split="test")
        for i in range(10)
    ]
    prompts = [render_prompt(r, manifest) for r in records]
    result = evaluate_task(manifest, prompts, EchoClient(prompts), concurrency=3)
    assert result.value == 1.0
    assert result.invalid_rate == 0.0
    assert result.n == 10


def test_majority_stub_balanced_binary():
    from dataclasses import replace

    manifest, _, prompts = _binary_task(100)
    result = evaluate_task(manifest, prompts, MajorityClient(), concurrency=4)
    assert result.value == 0.5
    assert result.n == 100
    acc = evaluate_task(replace(manifest, metric="accuracy"), prompts, MajorityClient(), concurrency=4)
    assert acc.value == 0.5


def test_evaluate_deterministic_across_concurrency():
    manifest, _, prompts = _binary_task(60)
    results = [
        evaluate_task(manifest, prompts, MajorityClient(), concurrency=c)
        for c in (1, 2, 8)
    ]
    baseline = [(r.record_id, r.prediction, r.score) for r in results[0].rows]
    for result in results[1:]:
        assert [(r.record_id, r.prediction, r.score) for r in result.rows] == baseline
        assert result.value == results[0].value


def test_knn_stub_beats_majority_on_separable_task():
    # Two structural families with family-aligned labels: long alkanes are
    # positive, short alcohols negative. Nearest-neighbor answers should
    # separate them; the majority stub cannot.
    manifest = TaskManifest(
        task_id="sep",
        task_kind="binary",
        roles=(RoleSpec("drug", "smiles", "Drug", "Drug SMILES"),),
        instruction="Answer.",
        context="Ctx.",
        question="Family?\n\n(A) alcohol (B) alkane",
        label_column="Y",
        metric="auroc",
        split_method="random",
    )
    rng = random.Random(3)
    train, test = [], []
    for i in range(40):
        alkane = "C" * rng.randint(8, 14)
        alcohol = "OC" + "C" * rng.randint(0, 3) + "O"
        train.append(DataRecord(f"tr_a{i}", {"drug": alkane}, True, split="train"))
        train.append(DataRecord(f"tr_b{i}", {"drug": alcohol}, False, split="train"))
        if i < 20:
            test.append(DataRecord(f"te_a{i}", {"drug": "C" * rng.randint(8, 14)}, True, split="test"))
            test.append(DataRecord(f"te_b{i}", {"drug": "OC" + "C" * rng.randint(0, 3) + "O"}, False, split="test"))
    prompts = [render_prompt(r, manifest) for r in test]
    knn = NearestNeighborClient(manifest, train)
    knn_result = evaluate_task(manifest, prompts, knn, concurrency=2)
    majority_result = evaluate_task(manifest, prompts, MajorityClient(), concurrency=2)
    assert knn_result.value is not None
    assert knn_result.value > majority_result.value
    assert majority_result.value == 0.5


def test_regression_task_with_echo():
    manifest = golden_tasks.CACO2_MANIFEST
    records = [
        DataRecord(str(i), {"drug": "C" * (i + 1)}, float(i * 100), split="test")
        for i in range(5)
    ]
    prompts = [render_prompt(r, manifest) for r in records]
    result = evaluate_task(manifest, prompts, EchoClient(prompts), concurrency=1)
    assert result.metric == "mae"
    assert result.value == pytest.approx(0.0)


def test_subtask_unweighted_average():
    manifest = TaskManifest(
        task_id="subt",
        task_kind="binary",
        roles=(RoleSpec("drug", "smiles", "Drug", "Drug SMILES"),),
        instruction="Answer.",
        context="Assay {subtask}.",
        question="Active?\n\n(A) no (B) yes",
        label_column="Y",
        metric="accuracy",
        split_method="random",
        subtask_column="Assay",
    )
    records = []
    # subtask X: 2 records, subtask Y: 6 records
    for i in range(2):
        records.append(DataRecord(f"x{i}", {"drug": "CC"}, True, subtask="X", split="test"))
    for i in range(6):
        records.append(DataRecord(f"y{i}", {"drug": "CC"}, False, subtask="Y", split="test"))
    prompts = [render_prompt(r, manifest) for r in records]
    result = evaluate_task(manifest, prompts, MajorityClient(), concurrency=1)
    # accuracy per subtask: X = 1.0, Y = 0.0; unweighted average = 0.5
    assert result.value == pytest.approx(0.5)
    assert result.subtask_values == {"X": 1.0, "Y": 0.0}


class _FlakyClient:
    """Fails transport for chosen prompts."""

    def __init__(self, fail_on):
        self.fail_on = fail_on

    def generate(self, request):
        for marker in self.fail_on:
            if marker in request.prompt:
                raise TransportError("boom")
        return MajorityClient().generate(request)


def test_transport_failures_kept_as_invalid_rows():
    manifest, records, prompts = _binary_task(10)
    failing = records[3].features["drug"]
    result = evaluate_task(manifest, prompts, _FlakyClient([f"Drug SMILES: {failing}\n"]), concurrency=2)
    assert result.n == 10
    assert result.failures
    failed_rows = [r for r in result.rows if r.failed]
    assert failed_rows and all(not r.valid for r in failed_rows)


# --- HTTP contract -----------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    calls = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        _Handler.calls.append(body)
        if body["prompt"].endswith("FAIL_ONCE") and len(_Handler.calls) == 1:
            self.send_response(503)
            self.end_headers()
            return
        payload = {"text": "(B)", "option_scores": {"(A)": 0.25, "(B)": 0.75}}
        raw = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    _Handler.calls = []
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/generate"
    server.shutdown()


def test_http_client_wire_contract(http_server):
    client = HttpModelClient(http_server, backoff=0.01)
    response = client.generate(GenerationRequest(prompt="hello", max_tokens=64))
    assert response.text == "(B)"
    assert response.option_scores == {"(A)": 0.25, "(B)": 0.75}
    body = _Handler.calls[0]
    assert body == {"prompt": "hello", "max_tokens": 64, "temperature": 0.0}


def test_http_client_retries_5xx(http_server):
    client = HttpModelClient(http_server, backoff=0.01)
    response = client.generate(GenerationRequest(prompt="x FAIL_ONCE"))
    assert response.text == "(B)"
    assert len(_Handler.calls) == 2


def test_http_client_unreachable():
    client = HttpModelClient("http://127.0.0.1:9/generate", max_attempts=2, backoff=0.01, timeout=0.2)
    with pytest.raises(TransportError):
        client.generate(GenerationRequest(prompt="x"))


# --- report files ------------------------------------------------------


def test_result_files(tmp_path):
    manifest, _, prompts = _binary_task(6)
    result = evaluate_task(manifest, prompts, MajorityClient(), concurrency=1)
    json_path = tmp_path / "r.json"
    csv_path = tmp_path / "rows.csv"
    write_result_json(result, json_path)
    write_rows_csv(result, csv_path)
    payload = read_result_json(json_path)
    assert payload["task"] == "toybin"
    assert payload["value"] == 0.5
    assert payload["n"] == 6
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 7
    assert lines[0].startswith("record_id,")
