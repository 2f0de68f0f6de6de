"""Ground-truth important-statement labels.

A statement set's informativity is the LCS recall of its concatenated tokens
against the reference comment. Statements are ranked by individual
informativity and scanned in rank order; one is accepted exactly when it
strictly increases the joint informativity of everything accepted so far.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .metrics import rouge_l_recall
from .segmenter import SegmentedSnippet


@dataclass(frozen=True)
class TraceStep:
    index: int
    informativity: float


@dataclass(frozen=True)
class LabeledSnippet:
    snippet: SegmentedSnippet
    labels: tuple[int, ...]
    trace: tuple[TraceStep, ...]

    @property
    def important_indices(self) -> tuple[int, ...]:
        return tuple(i for i, l in enumerate(self.labels) if l == 1)


def informativity(
    selected: Iterable[int], snippet: SegmentedSnippet, comment: Sequence[str]
) -> float:
    """LCS recall of the selected statements, concatenated in source order."""
    tokens: list[str] = []
    for i in sorted(set(selected)):
        tokens.extend(snippet.statements[i].tokens)
    if not tokens:
        return 0.0
    return rouge_l_recall(comment, tokens)


def label_statements(snippet: SegmentedSnippet, comment: Sequence[str]) -> LabeledSnippet:
    """Greedy 0/1 labels for every statement of a snippet.

    Ties in the ranking go to the earlier statement. When no statement has
    positive informativity, the rank-1 statement is forcibly labeled 1 so the
    extractor always sees a positive example.
    """
    n = len(snippet.statements)
    individual = [informativity([i], snippet, comment) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-individual[i], i))

    accepted: list[int] = []
    best = 0.0
    trace: list[TraceStep] = []
    for i in order:
        joint = informativity(accepted + [i], snippet, comment)
        if joint > best:
            accepted.append(i)
            best = joint
            trace.append(TraceStep(index=i, informativity=joint))
    if not accepted:
        forced = order[0]
        accepted.append(forced)
        trace.append(TraceStep(index=forced, informativity=0.0))

    labels = tuple(1 if i in accepted else 0 for i in range(n))
    return LabeledSnippet(snippet=snippet, labels=labels, trace=tuple(trace))
