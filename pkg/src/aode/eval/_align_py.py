"""Pure Python minimum-edit-distance alignment (fallback for ``_calign``)."""

from __future__ import annotations

from typing import Sequence


def align_counts(ref: Sequence[int], hyp: Sequence[int]) -> tuple[int, int, int]:
    """Return ``(substitutions, deletions, insertions)`` of a minimum unit-cost
    alignment of ``hyp`` against ``ref``.

    The backtrace runs from the end of both sequences and, among optimal
    moves, takes the diagonal (match/substitution) first, then insertion,
    then deletion.
    """
    n, m = len(ref), len(hyp)
    width = m + 1
    dist = list(range(width))
    dist.extend([0] * (n * width))
    for i in range(1, n + 1):
        row = i * width
        prev = row - width
        dist[row] = i
        r = ref[i - 1]
        for j in range(1, width):
            diag = dist[prev + j - 1] + (r != hyp[j - 1])
            up = dist[prev + j] + 1
            left = dist[row + j - 1] + 1
            best = diag if diag < up else up
            dist[row + j] = best if best < left else left

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i * width + j]
        if i > 0 and j > 0:
            cost = ref[i - 1] != hyp[j - 1]
            if dist[(i - 1) * width + j - 1] + cost == here:
                subs += cost
                i -= 1
                j -= 1
                continue
        if j > 0 and dist[i * width + j - 1] + 1 == here:
            ins += 1
            j -= 1
            continue
        dels += 1
        i -= 1
    return subs, dels, ins
