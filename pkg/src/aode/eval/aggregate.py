"""Multi-domain aggregation: geometric mean and per-domain reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .wer import WerBreakdown

__all__ = ["geometric_mean", "EvalReport", "eval_report", "format_sig"]


def geometric_mean(values: Iterable[float]) -> float:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("geometric mean of an empty list")
    bad = [v for v in vals if not v > 0]
    if bad:
        raise ValueError(f"geometric mean needs positive values, got {bad}")
    g = math.exp(math.fsum(math.log(v) for v in vals) / len(vals))
    # exp(log(v)) can miss v by an ulp; the true mean never leaves [min, max]
    return min(max(g, min(vals)), max(vals))


def format_sig(value: float | None, digits: int = 3) -> str:
    """Render with ``digits`` significant figures, keeping trailing zeros."""
    if value is None:
        return "n/a"
    if value == 0 or not math.isfinite(value):
        return f"{value:.{digits - 1}f}" if value == 0 else str(value)
    magnitude = math.floor(math.log10(abs(value)))
    # rounding can carry into the next decade (9.996 -> 10.0)
    rounded = round(value, digits - 1 - magnitude)
    if rounded != 0:
        magnitude = math.floor(math.log10(abs(rounded)))
    decimals = max(digits - 1 - magnitude, 0)
    return f"{rounded:.{decimals}f}"


@dataclass(frozen=True)
class EvalReport:
    per_domain: Mapping[str, WerBreakdown]

    @property
    def percentages(self) -> dict[str, float]:
        return {name: 100.0 * b.wer for name, b in self.per_domain.items()}

    @property
    def geometric_mean(self) -> float | None:
        """Geometric mean of per-domain WER percentages; ``None`` if any is zero."""
        pct = list(self.percentages.values())
        if any(p <= 0 for p in pct):
            return None
        return geometric_mean(pct)

    def as_dict(self) -> dict:
        return {
            "domains": {name: b.as_dict() for name, b in self.per_domain.items()},
            "geometric_mean": self.geometric_mean,
        }

    def render(self) -> str:
        names = list(self.per_domain)
        header = ["domain", "S", "D", "I", "N", "WER%"]
        rows = [
            [n, str(b.substitutions), str(b.deletions), str(b.insertions), str(b.ref_len),
             format_sig(100.0 * b.wer)]
            for n, b in ((n, self.per_domain[n]) for n in names)
        ]
        rows.append(["geometric mean", "", "", "", "", format_sig(self.geometric_mean)])
        widths = [max(len(r[c]) for r in [header, *rows]) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(w) if c == 0 else cell.rjust(w)
                           for c, (cell, w) in enumerate(zip(r, widths)))
                 for r in [header, *rows]]
        return "\n".join(lines)


def eval_report(per_domain: Mapping[str, WerBreakdown]) -> EvalReport:
    if not per_domain:
        raise ValueError("eval_report needs at least one domain")
    return EvalReport(dict(per_domain))
