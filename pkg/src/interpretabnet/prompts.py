"""Deterministic assembly of the mask-interpretation prompt.

The prompt is plain text in a fixed section order: optional persona
sentence, output instruction, dataset description, one sentence per step
mask, then up to two in-context example blocks (example prompt + its
expected output) for few-shot conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError, DataError
from .interpret import SalientSummary

OUTPUT_INSTRUCTION = (
    "Conduct aggregate analysis on the description of the following feature "
    "mask. Please output ONLY a dictionary and no other natural language "
    "generation when generating the sentence as shown in the in-context "
    "example below. Please use single-word classification that encapsulates "
    "the meaning of the features if possible."
)

EXAMPLES_HEADER = "Here are in-context examples for few-shot learning."


@dataclass(frozen=True)
class DatasetMeta:
    """What the prompt says about the dataset being interpreted."""

    name: str
    description: str
    n_test: int
    n_features: int


@dataclass
class PromptSections:
    dataset_description: str
    mask_description: str
    in_context_examples: list[tuple[str, str]]
    output_instruction: str = OUTPUT_INSTRUCTION
    persona_prefix: str | None = None


@dataclass
class PromptBundle:
    text: str
    sections: PromptSections
    expected_schema: dict[str, str] = field(default_factory=dict)

    @property
    def expected_keys(self) -> list[str]:
        return list(self.expected_schema)


def _ordinal(n: int) -> str:
    if 10 <= n % 100 <= 13:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def _and_join(items) -> str:
    items = [str(i) for i in items]
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def _dataset_sentence(meta: DatasetMeta) -> str:
    desc = meta.description.strip()
    lead = f"The {meta.name} dataset is considered"
    if desc:
        joiner = "" if desc.startswith((",", ".")) else " "
        lead = f"{lead}{joiner}{desc}"
    if not lead.endswith("."):
        lead += "."
    return (
        f"{lead} There are {meta.n_test} test samples and "
        f"{meta.n_features} features."
    )


def _mask_sentence(step: int, last: bool, indices, names) -> str:
    if not indices:
        raise DataError(f"step {step} has no salient features to describe")
    plural = len(indices) > 1
    noun = "features" if plural else "feature"
    verb = "are" if plural else "is"
    opening = f"At the {_ordinal(step)} step of feature selection,"
    if last:
        opening = f"Lastly, at the {_ordinal(step)} step of feature selection,"
    return (
        f"{opening} we observe mask {step} with the main {noun} highlighted "
        f"as {_and_join(indices)} which {verb} {_and_join(names)}."
    )


def _mask_paragraph(summary: SalientSummary) -> str:
    sentences = []
    for step, entries in enumerate(summary.per_step):
        indices = [i for i, _, _ in entries]
        names = [name for _, name, _ in entries]
        if any(not str(n).strip() for n in names):
            raise DataError(f"step {step} has empty feature names")
        last = step == summary.n_steps - 1 and summary.n_steps > 1
        sentences.append(_mask_sentence(step, last, indices, names))
    return " ".join(sentences)


def compile_prompt(
    dataset_meta: DatasetMeta,
    summary: SalientSummary,
    examples=(),
    persona: str | None = None,
) -> PromptBundle:
    """Assemble the interpretation prompt; pure function of its inputs.

    ``examples`` is a sequence of 0 to 2 (example_prompt, example_output)
    pairs appended verbatim; ``persona`` prepends exactly one sentence.
    """
    if summary.n_steps < 1:
        raise DataError("summary must describe at least one step")
    examples = list(examples)
    if len(examples) > 2:
        raise ConfigError("at most 2 in-context examples are supported")

    instruction = OUTPUT_INSTRUCTION
    if persona:
        persona = persona.strip()
        if not persona.endswith("."):
            persona += "."
        instruction = f"{persona} {instruction}"

    dataset_par = _dataset_sentence(dataset_meta)
    mask_par = _mask_paragraph(summary)

    parts = [instruction, dataset_par, mask_par]
    if examples:
        parts.append(EXAMPLES_HEADER)
        for ex_prompt, ex_output in examples:
            parts.append(ex_prompt.strip())
            out = ex_output.strip()
            parts.append(out if out.startswith("Output:") else f"Output: {out}")
    text = "\n\n".join(parts)

    schema = {f"Mask {k}": "string" for k in range(summary.n_steps)}
    schema["Aggregate"] = "string"
    return PromptBundle(
        text=text,
        sections=PromptSections(
            dataset_description=dataset_par,
            mask_description=mask_par,
            in_context_examples=examples,
            persona_prefix=persona,
        ),
        expected_schema=schema,
    )


def load_corpus() -> dict[str, tuple[str, str]]:
    """Shipped in-context example blocks, keyed by dataset slug."""
    corpus = {}
    root = resources.files("interpretabnet") / "corpus"
    for prompt_file in sorted(root.iterdir()):
        if not prompt_file.name.endswith("_prompt.txt"):
            continue
        key = prompt_file.name[: -len("_prompt.txt")]
        output_file = root / f"{key}_output.txt"
        corpus[key] = (
            prompt_file.read_text(encoding="utf-8").strip(),
            output_file.read_text(encoding="utf-8").strip(),
        )
    return corpus


def select_examples(
    corpus: dict[str, tuple[str, str]],
    exclude: str | None = None,
    rotation: int = 0,
    count: int = 2,
) -> list[tuple[str, str]]:
    """Rotate through the corpus, skipping the dataset under analysis.

    ``rotation`` shifts which examples lead, reproducing a k-fold style
    rotation over the shipped corpus.
    """
    keys = [k for k in sorted(corpus) if k != exclude]
    if not keys:
        return []
    shift = rotation % len(keys)
    rotated = keys[shift:] + keys[:shift]
    return [corpus[k] for k in rotated[:count]]
