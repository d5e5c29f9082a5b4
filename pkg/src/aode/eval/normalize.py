"""Transcript normalization applied to both references and hypotheses before WER."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

__all__ = [
    "NormalizationConfig",
    "default_config",
    "load_config",
    "normalize_text",
    "load_hesitations",
    "load_contractions",
]

# Punctuation is anything that is neither a word character nor whitespace;
# underscore counts as punctuation too.
_PUNCT = re.compile(r"[^\w\s']|_")
# Apostrophes survive only with a letter on both sides ("don't", not "'90s").
_LOOSE_APOSTROPHE = re.compile(r"(?<![^\W\d_])'|'(?![^\W\d_])")


def _read_lines(text: str) -> list[str]:
    return [ln for ln in (raw.strip() for raw in text.splitlines()) if ln and not ln.startswith("#")]


def load_hesitations(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files(__package__).joinpath("data/hesitations.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(_read_lines(text))


def load_contractions(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        text = resources.files(__package__).joinpath("data/contractions.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    table = {}
    for line in _read_lines(text):
        expanded, _, short = line.partition("\t")
        if not short:
            raise ValueError(f"contraction line without a tab: {line!r}")
        table[" ".join(expanded.split())] = short.strip()
    return table


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True
    contraction_table: Mapping[str, str] = field(default_factory=dict)
    hesitation_set: frozenset[str] = frozenset()
    # extra text -> text stages run after the built-in ones
    plugins: tuple[Callable[[str], str], ...] = ()


@lru_cache(maxsize=None)
def default_config() -> NormalizationConfig:
    return NormalizationConfig(
        contraction_table=load_contractions(),
        hesitation_set=load_hesitations(),
    )


def load_config(path: str | Path) -> NormalizationConfig:
    """Read a JSON normalization config.

    Recognised keys: ``lowercase``, ``strip_punctuation``,
    ``collapse_whitespace`` (booleans), ``contractions`` (object or path to a
    TSV file) and ``hesitations`` (list or path to a text file). Missing
    tables fall back to the shipped defaults.
    """
    import json

    raw = json.loads(Path(path).read_text("utf-8"))
    base = Path(path).parent
    contractions = raw.get("contractions")
    if contractions is None:
        table = load_contractions()
    elif isinstance(contractions, str):
        table = load_contractions(base / contractions)
    else:
        table = {" ".join(k.split()): v for k, v in contractions.items()}
    hesitations = raw.get("hesitations")
    if hesitations is None:
        hes = load_hesitations()
    elif isinstance(hesitations, str):
        hes = load_hesitations(base / hesitations)
    else:
        hes = frozenset(hesitations)
    return NormalizationConfig(
        lowercase=bool(raw.get("lowercase", True)),
        strip_punctuation=bool(raw.get("strip_punctuation", True)),
        collapse_whitespace=bool(raw.get("collapse_whitespace", True)),
        contraction_table=table,
        hesitation_set=hes,
    )


def _contract(tokens: list[str], table: Mapping[str, str]) -> list[str]:
    if not table:
        return tokens
    phrases = {tuple(k.split()): v for k, v in table.items()}
    longest = max(len(p) for p in phrases)

    def match_at(i: int) -> int:
        for size in range(min(longest, len(tokens) - i), 0, -1):
            if tuple(tokens[i:i + size]) in phrases:
                return size
        return 0

    out = []
    i = 0
    while i < len(tokens):
        size = match_at(i)
        # an overlapping phrase that reaches further wins ("they will not" -> "they won't")
        if size and not any(j + match_at(j) > i + size for j in range(i + 1, i + size)):
            out.append(phrases[tuple(tokens[i:i + size])])
            i += size
        else:
            out.append(tokens[i])
            i += 1
    return out


def normalize_text(text: str, cfg: NormalizationConfig | None = None) -> str:
    """Lowercase, strip punctuation, drop hesitations and contract phrases.

    Hesitations are removed before contraction so that "do um not" and
    "do not" normalize identically.
    """
    cfg = default_config() if cfg is None else cfg
    if cfg.lowercase:
        text = text.lower()
    if cfg.strip_punctuation:
        text = _PUNCT.sub(" ", text)
        text = _LOOSE_APOSTROPHE.sub(" ", text)
    if cfg.collapse_whitespace:
        tokens = text.split()
    else:
        tokens = text.split(" ")
    if cfg.hesitation_set:
        tokens = [t for t in tokens if t not in cfg.hesitation_set]
    tokens = _contract(tokens, cfg.contraction_table)
    text = " ".join(tokens)
    for stage in cfg.plugins:
        text = stage(text)
    if cfg.collapse_whitespace:
        text = " ".join(text.split())
    return text
