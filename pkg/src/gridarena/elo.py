"""Pairwise records and Bradley-Terry ratings anchored at 1000.

Strengths are fit by minorization-maximization on the win/loss/draw counts
(draws count as half a win each way), then mapped to the Elo scale with
r_i = anchor + 400*log10(s_i / geometric_mean(s)).  The fit is
order-independent and deterministic, and for two players it converges to
the closed form 400*log10(wins/losses).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import DegenerateRecord

_STRENGTH_FLOOR = 1e-12


@dataclass
class PairwiseRecords:
    """wins[(a, b)] counts a's wins against b; draws[(a, b)] with a < b."""

    wins: dict = field(default_factory=lambda: defaultdict(float))
    draws: dict = field(default_factory=lambda: defaultdict(float))
    policies: set = field(default_factory=set)

    def add_result(self, a: str, b: str, score_a: float, score_b: float) -> None:
        self.policies.update((a, b))
        if score_a > score_b:
            self.wins[(a, b)] += 1
        elif score_b > score_a:
            self.wins[(b, a)] += 1
        else:
            self.draws[tuple(sorted((a, b)))] += 1

    def games_between(self, a: str, b: str) -> float:
        return self.wins.get((a, b), 0.0) + self.wins.get((b, a), 0.0) \
            + self.draws.get(tuple(sorted((a, b))), 0.0)

    def effective_wins(self, a: str, b: str) -> float:
        """a's wins against b with draws counted half."""
        return self.wins.get((a, b), 0.0) \
            + 0.5 * self.draws.get(tuple(sorted((a, b))), 0.0)


def pairwise_records(score_table: list[dict[str, float]]) -> PairwiseRecords:
    """Per-episode game scores -> accumulated pairwise win/loss/draw counts.

    Each episode contributes one comparison per policy pair present in it;
    the higher game score wins the comparison.
    """
    records = PairwiseRecords()
    for scores in score_table:
        names = sorted(scores)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                records.add_result(a, b, scores[a], scores[b])
    return records


@dataclass
class EloTable:
    ratings: dict
    anchor: float
    iterations: int
    log_likelihood: float

    def gap(self, a: str, b: str) -> float:
        return self.ratings[a] - self.ratings[b]


def elo_ratings(records: PairwiseRecords, anchor: float = 1000.0,
                tol: float = 1e-9, max_iter: int = 200_000) -> EloTable:
    """Fit Bradley-Terry strengths by MM and anchor the mean rating.

    Raises DegenerateRecord for a policy with no comparisons at all.  A
    policy with zero effective wins is floored at a tiny strength so every
    rating stays finite.
    """
    names = sorted(records.policies)
    if len(names) < 2:
        raise DegenerateRecord("need at least two policies")
    n = {(a, b): records.games_between(a, b) for a in names for b in names if a != b}
    w = {(a, b): records.effective_wins(a, b) for a in names for b in names if a != b}
    total_wins = {a: sum(w[(a, b)] for b in names if b != a) for a in names}
    for a in names:
        if sum(n[(a, b)] for b in names if b != a) == 0:
            raise DegenerateRecord(f"policy {a!r} has no games")

    s = {a: 1.0 for a in names}
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new_s = {}
        for a in names:
            denom = sum(n[(a, b)] / (s[a] + s[b]) for b in names
                        if b != a and n[(a, b)] > 0)
            new_s[a] = max(total_wins[a] / denom, _STRENGTH_FLOOR) \
                if denom > 0 else s[a]
        # Normalize to geometric mean 1 to pin the gauge freedom.
        log_mean = sum(math.log(v) for v in new_s.values()) / len(names)
        scale = math.exp(-log_mean)
        new_s = {a: v * scale for a, v in new_s.items()}
        change = max(abs(new_s[a] - s[a]) / s[a] for a in names)
        s = new_s
        if change < tol:
            break

    log_likelihood = 0.0
    for a in names:
        for b in names:
            if a != b and w[(a, b)] > 0:
                log_likelihood += w[(a, b)] * math.log(s[a] / (s[a] + s[b]))
    ratings = {a: anchor + 400.0 * math.log10(s[a]) for a in names}
    return EloTable(ratings, anchor, iterations, log_likelihood)
