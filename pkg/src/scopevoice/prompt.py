"""Patient-specific initial prompt in the chat wire format.

The document seeds every LLM session with the full decision context:
executable functions, segment inventory, pairwise distances, guideline
text, and example sentence/result pairs (shipped heuristics plus any
stored corrections, in order). Rendering is canonical so identical
inputs produce byte-identical prompts. The misspelled wire key
"guidlines" is part of the format and kept as is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .dispatch import FunctionCall, Registry, parse_call_text, render_calls
from .errors import InvalidCorrectionResult, MatrixCaseMismatch, RegistryEmpty, SchemaViolation
from .proximity import DistanceMatrix
from .scene import PatientCase

DESCRIPTION_TEXT = (
    "Depending on given sentences, Return only appropriate method or methods "
    "from the executable methods list without explanation."
)

DISTANCE_DECIMALS = 2

PROMPT_SCHEMA = {
    "type": "object",
    "required": [
        "description",
        "executableMethods",
        "organTypes",
        "OrganCategories",
        "distanceData",
        "guidlines",
        "sentencesAndResultsExamples",
    ],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string", "minLength": 1},
        "executableMethods": {
            "type": "array", "minItems": 1, "items": {"type": "string"},
        },
        "organTypes": {
            "type": "array", "minItems": 1, "items": {"type": "string"},
        },
        "OrganCategories": {
            "type": "array", "items": {"type": "string"},
        },
        "distanceData": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": {"type": "number", "minimum": 0},
            },
        },
        "guidlines": {
            "type": "object", "additionalProperties": {"type": "string"},
        },
        "sentencesAndResultsExamples": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["sentence", "result"],
                "additionalProperties": False,
                "properties": {
                    "sentence": {"type": "string", "minLength": 1},
                    "result": {"type": "string", "minLength": 1},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class PromptExample:
    sentence: str
    result: str  # one or more rendered calls, newline-separated


@dataclass(frozen=True)
class Correction:
    sentence: str
    result: str
    noted_at: str  # ISO-8601 UTC


@dataclass
class ExampleStore:
    """Heuristic seed examples plus the append-only correction log."""

    heuristic: list[PromptExample] = field(default_factory=list)
    corrections: list[Correction] = field(default_factory=list)
    log_path: Optional[Path] = None

    def all_examples(self) -> list[PromptExample]:
        return list(self.heuristic) + [PromptExample(c.sentence, c.result) for c in self.corrections]


def load_heuristic_examples() -> list[PromptExample]:
    """Shipped seed examples (versioned data file, editable without a rebuild)."""
    raw = resources.files("scopevoice.data").joinpath("heuristic_examples.json").read_text()
    doc = json.loads(raw)
    examples = []
    for i, item in enumerate(doc.get("examples", [])):
        if not isinstance(item, dict) or "sentence" not in item or "result" not in item:
            raise SchemaViolation(f"heuristic_examples.json: examples[{i}] needs sentence and result")
        examples.append(PromptExample(item["sentence"], item["result"]))
    return examples


def open_example_store(case_id: str, corrections_dir: str | Path | None = None,
                       heuristic: Optional[list[PromptExample]] = None) -> ExampleStore:
    """Store backed by corrections/<case_id>.jsonl when a directory is given."""
    store = ExampleStore(heuristic=list(heuristic) if heuristic is not None else load_heuristic_examples())
    if corrections_dir is not None:
        path = Path(corrections_dir) / f"{case_id}.jsonl"
        store.log_path = path
        if path.is_file():
            for line_no, line in enumerate(path.read_text().splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    store.corrections.append(
                        Correction(row["sentence"], row["result"], row["noted_at"])
                    )
                except (json.JSONDecodeError, KeyError) as e:
                    raise SchemaViolation(f"{path.name}:{line_no}: bad correction row ({e})") from e
    return store


def append_correction(store: ExampleStore, sentence: str, result: list[FunctionCall],
                      registry: Registry) -> ExampleStore:
    """Validate and append one correction; persists when the store has a log."""
    if not sentence.strip():
        raise InvalidCorrectionResult("empty sentence")
    if not result:
        raise InvalidCorrectionResult("correction carries no calls")
    for call in result:
        reason = registry.validate_call(call)
        if reason:
            raise InvalidCorrectionResult(reason)
    correction = Correction(
        sentence=sentence,
        result=render_calls(result),
        noted_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    store.corrections.append(correction)
    if store.log_path is not None:
        store.log_path.parent.mkdir(parents=True, exist_ok=True)
        with store.log_path.open("a") as fh:
            fh.write(json.dumps({
                "sentence": correction.sentence,
                "result": correction.result,
                "noted_at": correction.noted_at,
            }) + "\n")
    return store


@dataclass(frozen=True)
class PromptDocument:
    description: str
    executable_methods: tuple[str, ...]
    organ_types: tuple[str, ...]
    organ_categories: tuple[str, ...]
    distance_data: dict[str, dict[str, float]]
    guidelines: dict[str, str]  # wire key: "guidlines"
    examples: tuple[PromptExample, ...]

    def to_wire(self) -> dict:
        return {
            "description": self.description,
            "executableMethods": list(self.executable_methods),
            "organTypes": list(self.organ_types),
            "OrganCategories": list(self.organ_categories),
            "distanceData": {a: dict(row) for a, row in self.distance_data.items()},
            "guidlines": dict(self.guidelines),
            "sentencesAndResultsExamples": [
                {"sentence": e.sentence, "result": e.result} for e in self.examples
            ],
        }


def build_initial_prompt(case: PatientCase, m: DistanceMatrix, registry: Registry,
                         store: ExampleStore) -> PromptDocument:
    """Assemble the document; every invariant is checked before returning."""
    if len(registry) == 0:
        raise RegistryEmpty("no functions registered")
    if tuple(m.ids) != tuple(case.segment_ids):
        raise MatrixCaseMismatch(
            f"matrix ids {list(m.ids)} do not match case segments {case.segment_ids}"
        )
    categories: list[str] = []
    for seg in case.segments:
        if seg.category.value not in categories:
            categories.append(seg.category.value)
    examples = store.all_examples()
    for example in examples:
        calls = parse_call_text(example.result)
        if not calls:
            raise SchemaViolation(f"example '{example.sentence}': result has no parsable call")
        for call in calls:
            if call.name not in registry:
                raise SchemaViolation(
                    f"example '{example.sentence}': function '{call.name}' not in registry"
                )
    doc = PromptDocument(
        description=DESCRIPTION_TEXT,
        executable_methods=tuple(registry.signatures()),
        organ_types=tuple(case.segment_ids),
        organ_categories=tuple(categories),
        distance_data=m.to_nested_dict(decimals=DISTANCE_DECIMALS),
        guidelines={r.rule_id: r.description for r in case.guidelines},
        examples=tuple(examples),
    )
    jsonschema.validate(doc.to_wire(), PROMPT_SCHEMA)
    return doc


def render_json(doc: PromptDocument) -> str:
    """Canonical serialization: fixed key order, 2-decimal distances, UTF-8."""
    return json.dumps(doc.to_wire(), indent=2, ensure_ascii=False) + "\n"


def parse_prompt_json(text: str) -> PromptDocument:
    """Inverse of render_json; validates against the wire schema."""
    try:
        wire = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"prompt document: not valid JSON ({e})") from e
    jsonschema.validate(wire, PROMPT_SCHEMA)
    return PromptDocument(
        description=wire["description"],
        executable_methods=tuple(wire["executableMethods"]),
        organ_types=tuple(wire["organTypes"]),
        organ_categories=tuple(wire["OrganCategories"]),
        distance_data={a: dict(row) for a, row in wire["distanceData"].items()},
        guidelines=dict(wire["guidlines"]),
        examples=tuple(PromptExample(e["sentence"], e["result"])
                       for e in wire["sentencesAndResultsExamples"]),
    )
