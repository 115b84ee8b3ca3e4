"""Task manifests, table ingestion, and train/valid/test split assignment.

A manifest is the complete recipe for one dataset: what kind of task it is,
which columns hold which features, the prompt texts, the metric, and how the
data is split. Manifests live in a line-oriented UTF-8 ``key: value`` file
format documented in docs/manifest_format.md.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .chem import SmilesParseError, parse_smiles, scaffold_key

__all__ = [
    "RoleSpec",
    "TaskManifest",
    "DataRecord",
    "SplitSpec",
    "LoadedTable",
    "CorpusError",
    "read_manifest",
    "write_manifest",
    "validate_manifest",
    "load_table",
    "assign_splits",
    "fit_label_range",
    "write_split_audit",
]

TASK_KINDS = ("binary", "regression", "generation")
ROLE_KINDS = ("smiles", "amino_acid", "nucleotide", "text")
SPLIT_METHODS = ("random", "scaffold", "cold_start", "combination", "temporal")
METRICS = ("auroc", "auprc", "accuracy", "spearman", "pearson", "mae", "mse", "set_accuracy")
LOWER_IS_BETTER_METRICS = {"mae", "mse"}

# Feature-type tag for each combination of role kinds present, mirroring the
# seven feature categories used in the result tables.
_FEATURE_TAGS = {
    frozenset({"smiles"}): "SMILES",
    frozenset({"amino_acid"}): "Amino acid",
    frozenset({"nucleotide"}): "Nucleotide",
    frozenset({"amino_acid", "smiles"}): "Amino acid + SMILES",
    frozenset({"nucleotide", "amino_acid"}): "Nucleotide + Amino acid",
    frozenset({"smiles", "text"}): "SMILES + Text",
    frozenset({"amino_acid", "text"}): "Amino acid + Text",
}

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RoleSpec:
    name: str
    kind: str
    column: str
    label: str  # display label used as the prompt role line prefix


@dataclass(frozen=True)
class TaskManifest:
    task_id: str
    task_kind: str
    roles: tuple[RoleSpec, ...]
    instruction: str
    context: str
    question: str
    label_column: str
    metric: str
    split_method: str
    lower_is_better: bool = False
    label_range: tuple[float, float] | None = None
    cold_start_role: str | None = None
    combination_roles: tuple[str, str] | None = None
    timestamp_column: str | None = None
    subtask_column: str | None = None

    @property
    def feature_type(self) -> str:
        kinds = frozenset(r.kind for r in self.roles)
        return _FEATURE_TAGS.get(kinds, " + ".join(sorted(kinds)))

    def role(self, name: str) -> RoleSpec:
        for r in self.roles:
            if r.name == name:
                return r
        raise KeyError(name)

    def similarity_roles(self) -> tuple[str, list[RoleSpec]]:
        """Kind of the first similarity-capable role and all roles of that kind."""
        for r in self.roles:
            if r.kind in ("smiles", "amino_acid", "nucleotide"):
                return r.kind, [x for x in self.roles if x.kind == r.kind]
        return "", []


@dataclass
class DataRecord:
    record_id: str
    features: dict[str, str]
    label: bool | float | str
    subtask: str | None = None
    timestamp: str | None = None
    split: str | None = None


@dataclass(frozen=True)
class SplitSpec:
    method: str = "random"
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 1

    def __post_init__(self):
        if any(f <= 0 for f in self.fractions):
            raise ValueError("split fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass
class LoadedTable:
    records: list[DataRecord]
    dropped: int


# ---------------------------------------------------------------------------
# Manifest file format
# ---------------------------------------------------------------------------


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def read_manifest(path) -> TaskManifest:
    data: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if ":" not in line:
                raise CorpusError(f"{path}:{lineno}: expected 'key: value'")
            key, _, value = line.partition(":")
            data[key.strip()] = _unescape(value.strip())

    def need(key: str) -> str:
        if key not in data:
            raise CorpusError(f"{path}: missing required key {key!r}")
        return data[key]

    role_names = need("roles").split()
    roles = []
    for name in role_names:
        roles.append(
            RoleSpec(
                name=name,
                kind=need(f"role.{name}.kind"),
                column=need(f"role.{name}.column"),
                label=need(f"role.{name}.label"),
            )
        )
    label_range = None
    if "label_min" in data or "label_max" in data:
        label_range = (float(need("label_min")), float(need("label_max")))
    combo = None
    if "combination_roles" in data:
        parts = data["combination_roles"].split()
        if len(parts) != 2:
            raise CorpusError(f"{path}: combination_roles needs exactly two names")
        combo = (parts[0], parts[1])
    metric = need("metric")
    return TaskManifest(
        task_id=need("task_id"),
        task_kind=need("task_kind"),
        roles=tuple(roles),
        instruction=need("instruction"),
        context=need("context"),
        question=need("question"),
        label_column=need("label_column"),
        metric=metric,
        split_method=need("split_method"),
        lower_is_better=data.get(
            "lower_is_better", "true" if metric in LOWER_IS_BETTER_METRICS else "false"
        ).lower()
        == "true",
        label_range=label_range,
        cold_start_role=data.get("cold_start_role"),
        combination_roles=combo,
        timestamp_column=data.get("timestamp_column"),
        subtask_column=data.get("subtask_column"),
    )


def write_manifest(manifest: TaskManifest, path) -> None:
    lines = [
        f"task_id: {manifest.task_id}",
        f"task_kind: {manifest.task_kind}",
        f"metric: {manifest.metric}",
        f"lower_is_better: {'true' if manifest.lower_is_better else 'false'}",
        f"split_method: {manifest.split_method}",
        f"label_column: {manifest.label_column}",
        f"roles: {' '.join(r.name for r in manifest.roles)}",
    ]
    for r in manifest.roles:
        lines += [
            f"role.{r.name}.kind: {r.kind}",
            f"role.{r.name}.column: {r.column}",
            f"role.{r.name}.label: {r.label}",
        ]
    if manifest.label_range is not None:
        lines += [
            f"label_min: {manifest.label_range[0]!r}",
            f"label_max: {manifest.label_range[1]!r}",
        ]
    if manifest.cold_start_role:
        lines.append(f"cold_start_role: {manifest.cold_start_role}")
    if manifest.combination_roles:
        lines.append(f"combination_roles: {' '.join(manifest.combination_roles)}")
    if manifest.timestamp_column:
        lines.append(f"timestamp_column: {manifest.timestamp_column}")
    if manifest.subtask_column:
        lines.append(f"subtask_column: {manifest.subtask_column}")
    lines += [
        f"instruction: {_escape(manifest.instruction)}",
        f"context: {_escape(manifest.context)}",
        f"question: {_escape(manifest.question)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_manifest(manifest: TaskManifest) -> list[str]:
    """All invariant violations, as data; an empty list means valid."""
    problems = []
    if manifest.task_kind not in TASK_KINDS:
        problems.append(f"unknown task_kind {manifest.task_kind!r}")
    if manifest.metric not in METRICS:
        problems.append(f"unknown metric {manifest.metric!r}")
    if manifest.split_method not in SPLIT_METHODS:
        problems.append(f"unknown split_method {manifest.split_method!r}")
    if not manifest.roles:
        problems.append("no roles declared")
    names = [r.name for r in manifest.roles]
    if len(set(names)) != len(names):
        problems.append("duplicate role names")
    for r in manifest.roles:
        if r.kind not in ROLE_KINDS:
            problems.append(f"role {r.name!r} has unknown kind {r.kind!r}")
        if not r.label:
            problems.append(f"role {r.name!r} has an empty label")
    if manifest.metric in LOWER_IS_BETTER_METRICS and not manifest.lower_is_better:
        problems.append(f"metric {manifest.metric} must be lower_is_better")
    if manifest.metric not in LOWER_IS_BETTER_METRICS and manifest.lower_is_better:
        problems.append(f"metric {manifest.metric} must not be lower_is_better")
    if manifest.task_kind == "regression":
        if manifest.label_range is None:
            problems.append("regression manifest needs a label range")
        else:
            lo, hi = manifest.label_range
            if not (lo < hi):
                problems.append("label range must satisfy min < max")
    if manifest.split_method == "scaffold" and not any(
        r.kind == "smiles" for r in manifest.roles
    ):
        problems.append("scaffold split needs a smiles role")
    if manifest.split_method == "cold_start":
        if not manifest.cold_start_role:
            problems.append("cold_start split needs cold_start_role")
        elif manifest.cold_start_role not in names:
            problems.append(f"cold_start_role {manifest.cold_start_role!r} is not a role")
    if manifest.split_method == "combination":
        combo = manifest.combination_roles or tuple(names[:2])
        if len(combo) != 2 or any(c not in names for c in combo):
            problems.append("combination split needs two declared roles")
    if manifest.split_method == "temporal" and not manifest.timestamp_column:
        problems.append("temporal split needs timestamp_column")
    allowed = set(names) | {"subtask"}
    for field_name, text in (
        ("instruction", manifest.instruction),
        ("context", manifest.context),
        ("question", manifest.question),
    ):
        for ref in _PLACEHOLDER.findall(text or ""):
            if ref not in allowed:
                problems.append(f"{field_name} references undeclared role {ref!r}")
    return problems


# ---------------------------------------------------------------------------
# Table ingestion
# ---------------------------------------------------------------------------


def _open_reader(path):
    suffix = Path(path).suffix.lower()
    fh = open(path, encoding="utf-8", newline="")
    if suffix == ".tsv":
        return fh, csv.reader(fh, delimiter="\t")
    if suffix == ".csv":
        return fh, csv.reader(fh)
    sample = fh.read(4096)
    fh.seek(0)
    delimiter = "\t" if sample.count("\t") >= sample.count(",") else ","
    return fh, csv.reader(fh, delimiter=delimiter)


def _parse_label(raw: str, kind: str):
    if kind == "binary":
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "1.0"):
            return True
        if lowered in ("0", "false", "no", "0.0"):
            return False
        return float(raw) != 0.0
    if kind == "regression":
        return float(raw)
    return raw


def load_table(path, manifest: TaskManifest) -> LoadedTable:
    """Read a delimited table into typed records.

    Rows with any empty mapped cell are dropped and counted. Raises on a
    missing column or when no usable rows remain.
    """
    fh, reader = _open_reader(path)
    with fh:
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}
        needed = [r.column for r in manifest.roles] + [manifest.label_column]
        if manifest.subtask_column:
            needed.append(manifest.subtask_column)
        if manifest.timestamp_column:
            needed.append(manifest.timestamp_column)
        missing = [c for c in needed if c not in index]
        if missing:
            raise CorpusError(f"{path}: missing columns {missing}")

        records = []
        dropped = 0
        for row_num, row in enumerate(reader):
            cells = {}
            ok = True
            for column in needed:
                i = index[column]
                value = row[i].strip() if i < len(row) else ""
                if not value:
                    ok = False
                    break
                cells[column] = value
            if not ok:
                dropped += 1
                continue
            try:
                label = _parse_label(cells[manifest.label_column], manifest.task_kind)
            except ValueError:
                dropped += 1
                continue
            records.append(
                DataRecord(
                    record_id=str(row_num),
                    features={r.name: cells[r.column] for r in manifest.roles},
                    label=label,
                    subtask=cells.get(manifest.subtask_column) if manifest.subtask_column else None,
                    timestamp=cells.get(manifest.timestamp_column) if manifest.timestamp_column else None,
                )
            )
    if not records:
        raise CorpusError(f"{path}: no usable rows (dropped {dropped})")
    return LoadedTable(records=records, dropped=dropped)


# ---------------------------------------------------------------------------
# Split assignment
# ---------------------------------------------------------------------------


def _cut_points(n: int, fractions) -> tuple[int, int]:
    train_end = round(fractions[0] * n)
    valid_end = round((fractions[0] + fractions[1]) * n)
    return train_end, valid_end


def _first_smiles_role(manifest: TaskManifest) -> str:
    for r in manifest.roles:
        if r.kind == "smiles":
            return r.name
    raise CorpusError("no smiles role for scaffold split")


def _timestamp_sort_key(value: str):
    try:
        return (0, float(value), "")
    except ValueError:
        return (1, 0.0, value)


def _group_records(records, key_fn) -> dict:
    groups: dict[object, list[int]] = {}
    for i, record in enumerate(records):
        groups.setdefault(key_fn(record), []).append(i)
    return groups


def assign_splits(
    records: list[DataRecord], manifest: TaskManifest, spec: SplitSpec
) -> list[DataRecord]:
    """Return copies of the records with train/valid/test assigned.

    random: seeded shuffle, fraction cut. temporal: stable sort on the
    timestamp column, fraction cut. scaffold: group by scaffold key, pack
    groups largest-first into train, then valid, then test. cold_start /
    combination: group by the entity key (or unordered role pair), shuffle
    the groups with the seed, and fill splits to their targets in order.
    """
    method = spec.method
    n = len(records)
    if n == 0:
        return []
    train_end, valid_end = _cut_points(n, spec.fractions)
    assignment = ["test"] * n

    if method == "random":
        order = list(range(n))
        random.Random(spec.seed).shuffle(order)
        for pos, idx in enumerate(order):
            assignment[idx] = (
                "train" if pos < train_end else "valid" if pos < valid_end else "test"
            )
    elif method == "temporal":
        for record in records:
            if record.timestamp is None:
                raise CorpusError("temporal split needs timestamps on every record")
        order = sorted(range(n), key=lambda i: (_timestamp_sort_key(records[i].timestamp), i))
        for pos, idx in enumerate(order):
            assignment[idx] = (
                "train" if pos < train_end else "valid" if pos < valid_end else "test"
            )
    elif method == "scaffold":
        role = _first_smiles_role(manifest)

        def key_fn(record):
            try:
                return scaffold_key(parse_smiles(record.features[role]))
            except SmilesParseError:
                return ""

        groups = _group_records(records, key_fn)
        ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        counts = {"train": 0, "valid": 0}
        for _, members in ordered:
            if counts["train"] + len(members) <= train_end:
                bucket = "train"
            elif counts["valid"] + len(members) <= valid_end - train_end:
                bucket = "valid"
            else:
                bucket = "test"
            if bucket in counts:
                counts[bucket] += len(members)
            for idx in members:
                assignment[idx] = bucket
    elif method in ("cold_start", "combination"):
        if method == "cold_start":
            role = manifest.cold_start_role
            if not role:
                raise CorpusError("cold_start split needs cold_start_role")
            key_fn = lambda record: record.features[role]
        else:
            combo = manifest.combination_roles or tuple(r.name for r in manifest.roles[:2])
            if len(combo) != 2:
                raise CorpusError("combination split needs two roles")
            key_fn = lambda record: tuple(
                sorted((record.features[combo[0]], record.features[combo[1]]))
            )
        groups = _group_records(records, key_fn)
        keys = sorted(groups, key=str)
        random.Random(spec.seed).shuffle(keys)
        assigned = 0
        for key in keys:
            members = groups[key]
            if assigned < train_end:
                bucket = "train"
            elif assigned < valid_end:
                bucket = "valid"
            else:
                bucket = "test"
            for idx in members:
                assignment[idx] = bucket
            assigned += len(members)
    else:
        raise CorpusError(f"unsupported split method {method!r}")

    return [replace_split(record, assignment[i]) for i, record in enumerate(records)]


def replace_split(record: DataRecord, split: str) -> DataRecord:
    return DataRecord(
        record_id=record.record_id,
        features=dict(record.features),
        label=record.label,
        subtask=record.subtask,
        timestamp=record.timestamp,
        split=split,
    )


def fit_label_range(records: list[DataRecord], manifest: TaskManifest) -> TaskManifest:
    """Freeze the regression label range from the train split only."""
    if manifest.task_kind != "regression":
        return manifest
    train_labels = [r.label for r in records if r.split == "train"]
    if not train_labels:
        raise CorpusError(f"{manifest.task_id}: no train records to fit a label range")
    lo, hi = min(train_labels), max(train_labels)
    if lo == hi:
        raise CorpusError(f"{manifest.task_id}: degenerate label range [{lo}, {hi}]")
    return replace(manifest, label_range=(float(lo), float(hi)))


def write_split_audit(records: list[DataRecord], path) -> None:
    """Two-column TSV (record id, split) for audit."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(f"{record.record_id}\t{record.split}\n")
