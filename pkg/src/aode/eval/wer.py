"""Word error rate from minimum edit-distance alignment.

The alignment kernel is compiled (``_calign``) when the extension is
available and falls back to the pure Python ``_align_py`` otherwise;
``BACKEND`` names the one in use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import _align_py

try:
    from . import _calign as _kernel

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    _kernel = _align_py
    BACKEND = "python"

__all__ = [
    "BACKEND",
    "EmptyReference",
    "WerBreakdown",
    "align_counts",
    "word_error_rate",
    "corpus_wer",
]


class EmptyReference(ValueError):
    pass


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            raise EmptyReference("WER undefined for an empty reference")
        return self.errors / self.ref_len

    def __add__(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )

    def as_dict(self) -> dict:
        return {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_len": self.ref_len,
            "wer": self.wer,
        }


def _encode(ref: Sequence[str], hyp: Sequence[str]) -> tuple[list[int], list[int]]:
    vocab: dict[str, int] = {}
    r = [vocab.setdefault(t, len(vocab)) for t in ref]
    h = [vocab.setdefault(t, len(vocab)) for t in hyp]
    return r, h


def align_counts(ref: Sequence[str], hyp: Sequence[str], *, kernel=None) -> tuple[int, int, int]:
    """``(S, D, I)`` for token sequences; ``kernel`` overrides the backend."""
    r, h = _encode(ref, hyp)
    return (kernel or _kernel).align_counts(r, h)


def word_error_rate(ref: Sequence[str], hyp: Sequence[str]) -> WerBreakdown:
    if not ref:
        raise EmptyReference("empty reference; pool utterances with corpus_wer")
    s, d, i = align_counts(ref, hyp)
    return WerBreakdown(s, d, i, len(ref))


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> WerBreakdown:
    """Pool S/D/I and reference lengths over utterances.

    An empty reference contributes its whole hypothesis as insertions.
    """
    total = WerBreakdown(0, 0, 0, 0)
    for ref, hyp in pairs:
        if ref:
            s, d, i = align_counts(ref, hyp)
            total += WerBreakdown(s, d, i, len(ref))
        else:
            total += WerBreakdown(0, 0, len(hyp), 0)
    if total.ref_len == 0:
        raise EmptyReference("all references are empty")
    return total
