"""Transparent lotteries: round a panel distribution to m equally likely tickets.

The randomized pairwise rounding used here preserves every agent's selection
probability in expectation (over the rounding randomness and the final
draw), which is the property that lets the pre-lottery guarantees carry over
to the live draw. Individual runs carry no worst-case promise; the
closed-form deviation bounds of the non-constructive rounding results are
reported alongside for reference.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .model import Instance, instance_hash
from .panels import Panel, PanelDistribution, ProbabilityAssignment

_INT_SNAP = 1e-9


@dataclass(frozen=True)
class UniformLottery:
    """Exactly m tickets; duplicates allowed; ticket i wins with chance 1/m."""

    m: int
    tickets: tuple[Panel, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("m must be at least 1")
        if len(self.tickets) != self.m:
            raise ValidationError(f"expected {self.m} tickets, got {len(self.tickets)}")

    def distribution(self) -> PanelDistribution:
        counts: dict[tuple[str, ...], int] = {}
        for panel in self.tickets:
            counts[panel.members] = counts.get(panel.members, 0) + 1
        return PanelDistribution(
            tuple((Panel(members), cnt / self.m) for members, cnt in sorted(counts.items()))
        )


def pipage_round(dist: PanelDistribution, m: int, seed: int) -> UniformLottery:
    """Round a distribution to an m-uniform lottery, unbiased per panel.

    Scale probabilities by m, then repeatedly take the two lowest-indexed
    fractional coordinates and shift mass between them: up by d1 or down by
    d2 (the distances to the nearest integers), choosing up with probability
    d2/(d1+d2) so each coordinate's expectation is untouched. Every step
    makes at least one coordinate integral.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    rng = random.Random(seed)
    counts, _rounds = _round_counts([prob * m for _, prob in dist.entries], rng)
    if sum(counts) != m:
        raise ValidationError("rounded ticket counts drifted; distribution mass must sum to 1")
    tickets: list[Panel] = []
    for (panel, _), cnt in zip(dist.entries, counts):
        tickets.extend([panel] * cnt)
    return UniformLottery(m=m, tickets=tuple(tickets))


def _round_counts(x: list[float], rng: random.Random) -> tuple[list[int], int]:
    """Pairwise randomized rounding of x (sum integral) to integers.

    Returns the counts and the number of pairing rounds used, which is at
    most len(x) - 1 because every round makes a coordinate integral.
    """

    def snap(value: float) -> float:
        nearest = round(value)
        return float(nearest) if abs(value - nearest) < _INT_SNAP else value

    x = [snap(v) for v in x]
    rounds = 0
    for _ in range(len(x) + 1):
        fractional = [i for i, v in enumerate(x) if v != math.floor(v)]
        if not fractional:
            break
        if len(fractional) == 1:
            # Total mass is integral, so a lone fractional entry is float
            # noise; snap it.
            x[fractional[0]] = float(round(x[fractional[0]]))
            break
        rounds += 1
        i, j = fractional[0], fractional[1]
        up_i = math.ceil(x[i]) - x[i]
        down_j = x[j] - math.floor(x[j])
        d1 = min(up_i, down_j)
        down_i = x[i] - math.floor(x[i])
        up_j = math.ceil(x[j]) - x[j]
        d2 = min(down_i, up_j)
        if rng.random() < d2 / (d1 + d2):
            x[i] += d1
            x[j] -= d1
        else:
            x[i] -= d2
            x[j] += d2
        x[i] = snap(x[i])
        x[j] = snap(x[j])
    return [int(round(v)) for v in x], rounds


def rounding_bounds(k: int, vector_count: int, m: int) -> tuple[float, float]:
    """Worst-case probability deviation bounds of the existence results.

    b1 = k/m; b2 scales with the number of distinct feature vectors W as
    (sqrt((1 + ln2/lnW)/2) * sqrt(W lnW) + 1)/m. The smaller of the two is
    the advertised bound.
    """
    if vector_count < 2:
        raise ValidationError("vector count must be at least 2")
    if m < 1:
        raise ValidationError("m must be at least 1")
    b1 = k / m
    log_w = math.log(vector_count)
    b2 = (math.sqrt(0.5 * (1.0 + math.log(2.0) / log_w)) * math.sqrt(vector_count * log_w) + 1.0) / m
    return b1, b2


def lottery_marginals(instance: Instance, lottery: UniformLottery) -> ProbabilityAssignment:
    """Ticket-counting probabilities: appearances / m, exactly as the public
    would tabulate them from the released panel list."""
    pi = {agent_id: 0.0 for agent_id in instance.agent_ids}
    for panel in lottery.tickets:
        for agent_id in panel.members:
            pi[agent_id] += 1.0
    return ProbabilityAssignment({a: v / lottery.m for a, v in pi.items()})


def write_lottery(lottery: UniformLottery, path: str | Path, instance: Instance, seed: int) -> None:
    """One ticket per line (tab-separated from its number), plus a JSON
    sidecar carrying m, the instance fingerprint, and the seed."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for number, panel in enumerate(lottery.tickets, start=1):
            fh.write(f"{number}\t{','.join(panel.members)}\n")
    sidecar = {"m": lottery.m, "instance_hash": instance_hash(instance), "seed": seed}
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_lottery(path: str | Path) -> UniformLottery:
    tickets: list[Panel] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            _, _, members = line.partition("\t")
            tickets.append(Panel(tuple(members.split(","))))
    return UniformLottery(m=len(tickets), tickets=tuple(tickets))
