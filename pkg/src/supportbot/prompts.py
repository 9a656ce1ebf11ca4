"""System prompt variants for the conversation agent.

Three variants are exposed.  ``full_rules`` is the complete robot character
with both the behavior section and the numbered IMPORTANT rules.
``no_rules`` is the same text truncated right before the IMPORTANT block.
``relaxed_rules`` keeps the structure of the full prompt but names no tool
at all, leaving the model to find the function surface on its own.
"""

from __future__ import annotations

from pathlib import Path

VARIANTS = ("full_rules", "relaxed_rules", "no_rules")

# CLI-facing shorthand for the variant names.
VARIANT_ALIASES = {
    "full": "full_rules",
    "relaxed": "relaxed_rules",
    "none": "no_rules",
}

RULES_MARKER = "IMPORTANT: Obey the following rules:"

_PROMPT_DIR = Path(__file__).parent / "prompts"


def _read(name: str) -> str:
    return (_PROMPT_DIR / f"{name}.txt").read_text(encoding="utf-8")


def resolve_variant(name: str) -> str:
    """Accept either a canonical variant name or a CLI alias."""
    canonical = VARIANT_ALIASES.get(name, name)
    if canonical not in VARIANTS:
        raise ValueError(f"unknown prompt variant {name!r}")
    return canonical


def system_prompt(variant: str) -> str:
    variant = resolve_variant(variant)
    if variant == "no_rules":
        full = _read("full_rules")
        return full[: full.index(RULES_MARKER)]
    return _read(variant)
