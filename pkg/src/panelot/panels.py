"""Reasoning over valid panels.

Agents with the same feature vector are interchangeable for every objective
this package optimizes, so all search happens in *composition* space: a
composition assigns a seat count to each vector group. A pool with millions
of valid panels typically has only a handful of valid compositions, which is
what makes the exact weighted-panel oracle and brute enumeration tractable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import (
    CapExceededError,
    NonCoalitionExclusionError,
    PanelotError,
    ValidationError,
)
from .model import FeatureVector, Instance

# Absolute tolerance for probability bookkeeping throughout the package.
PROB_EPS = 1e-9

# Expanding one composition into concrete panels needs lcm(group sizes)
# panels; beyond this the distribution is not meaningfully materializable.
MAX_EXPANSION_PANELS = 1_000_000


@dataclass(frozen=True)
class Panel:
    """A concrete panel: a sorted k-tuple of distinct agent ids."""

    members: tuple[str, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.members))
        if len(set(ordered)) != len(ordered):
            raise ValidationError("panel members must be distinct")
        object.__setattr__(self, "members", ordered)

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self.members

    def composition(self, instance: Instance) -> "PanelComposition":
        counts: dict[FeatureVector, int] = {}
        for agent_id in self.members:
            vector = instance.vector_of[agent_id]
            counts[vector] = counts.get(vector, 0) + 1
        return PanelComposition(tuple(sorted(counts.items())))

    def is_valid(self, instance: Instance) -> bool:
        if len(self.members) != instance.k:
            return False
        if any(agent_id not in instance.vector_of for agent_id in self.members):
            return False
        for idx, feature in enumerate(instance.scheme.features):
            for value in instance.scheme.values[feature]:
                count = sum(1 for a in self.members if instance.vector_of[a][idx] == value)
                lo, hi = instance.quota(feature, value)
                if not lo <= count <= hi:
                    return False
        return True


@dataclass(frozen=True)
class PanelComposition:
    """Seat counts per feature vector, summing to k."""

    items: tuple[tuple[FeatureVector, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted((v, c) for v, c in self.items if c > 0)))

    @property
    def counts(self) -> dict[FeatureVector, int]:
        return dict(self.items)

    def seats(self, vector: FeatureVector) -> int:
        return self.counts.get(vector, 0)

    def size(self) -> int:
        return sum(c for _, c in self.items)

    def is_valid(self, instance: Instance) -> bool:
        counts = self.counts
        if sum(counts.values()) != instance.k:
            return False
        if any(c > instance.group_size(v) for v, c in counts.items()):
            return False
        for idx, feature in enumerate(instance.scheme.features):
            for value in instance.scheme.values[feature]:
                total = sum(c for v, c in counts.items() if v[idx] == value)
                lo, hi = instance.quota(feature, value)
                if not lo <= total <= hi:
                    return False
        return True


@dataclass(frozen=True)
class PanelDistribution:
    """A probability distribution over distinct panels."""

    entries: tuple[tuple[Panel, float], ...]

    def __post_init__(self):
        total = 0.0
        seen: set[tuple[str, ...]] = set()
        for panel, prob in self.entries:
            if prob < -PROB_EPS:
                raise ValidationError(f"negative probability {prob} on panel {panel.members}")
            if panel.members in seen:
                raise ValidationError(f"panel {panel.members} appears twice in the support")
            seen.add(panel.members)
            total += prob
        if abs(total - 1.0) > PROB_EPS:
            raise ValidationError(f"support probabilities sum to {total}, expected 1")

    def support(self) -> list[Panel]:
        return [panel for panel, _ in self.entries]

    def to_json(self) -> dict:
        return {
            "panels": [
                {"members": list(panel.members), "prob": prob} for panel, prob in self.entries
            ]
        }

    @staticmethod
    def from_json(payload: dict) -> "PanelDistribution":
        return PanelDistribution(
            tuple((Panel(tuple(p["members"])), float(p["prob"])) for p in payload["panels"])
        )


@dataclass(frozen=True)
class ProbabilityAssignment:
    """Per-agent selection probabilities, plus group views when anonymous."""

    pi: Mapping[str, float]

    def min(self) -> float:
        return min(self.pi.values())

    def max(self) -> float:
        return max(self.pi.values())

    def total(self) -> float:
        return sum(self.pi.values())

    def values(self) -> list[float]:
        return [self.pi[a] for a in sorted(self.pi)]

    def anonymity_gap(self, instance: Instance) -> float:
        """Largest within-group probability spread."""
        gap = 0.0
        for members in instance.groups.values():
            probs = [self.pi[a] for a in members]
            gap = max(gap, max(probs) - min(probs))
        return gap

    def group_probabilities(self, instance: Instance, tol: float = 1e-6) -> dict[FeatureVector, float]:
        """Vector-indexed probabilities; requires anonymity within ``tol``."""
        gap = self.anonymity_gap(instance)
        if gap > tol:
            raise ValidationError(f"assignment is not anonymous (within-group gap {gap:.3g} > {tol:.3g})")
        return {
            vector: sum(self.pi[a] for a in members) / len(members)
            for vector, members in instance.groups.items()
        }


# ---------------------------------------------------------------------------
# Composition search
# ---------------------------------------------------------------------------


class _CompositionSearch:
    """Shared DFS machinery over seat-count vectors with quota propagation.

    Vectors are visited in canonical sorted order and counts ascend, so the
    first solution found is the lexicographically smallest one.
    """

    def __init__(self, instance: Instance, min_counts: Mapping[FeatureVector, int] | None = None):
        self.instance = instance
        self.vectors = instance.present_vectors()
        self.sizes = [instance.group_size(v) for v in self.vectors]
        self.min_counts = [0 if min_counts is None else min_counts.get(v, 0) for v in self.vectors]
        self.k = instance.k
        self.features = instance.scheme.features
        self.pairs = instance.scheme.feature_value_pairs()
        self.quota = {pair: instance.quota(*pair) for pair in self.pairs}
        # avail[i][(f,v)] = number of agents with f=v among groups i..end
        self.avail: list[dict[tuple[str, str], int]] = []
        running = {pair: 0 for pair in self.pairs}
        tail: list[dict[tuple[str, str], int]] = [dict(running)]
        for i in range(len(self.vectors) - 1, -1, -1):
            vector, size = self.vectors[i], self.sizes[i]
            running = dict(tail[-1])
            for f_idx, feature in enumerate(self.features):
                running[(feature, vector[f_idx])] += size
            tail.append(running)
        self.avail = list(reversed(tail))
        self.min_suffix = [0] * (len(self.vectors) + 1)
        for i in range(len(self.vectors) - 1, -1, -1):
            self.min_suffix[i] = self.min_suffix[i + 1] + self.min_counts[i]

    def _candidate_range(self, i: int, assigned: int) -> range:
        rem = self.k - assigned
        hi = min(self.sizes[i], rem - self.min_suffix[i + 1])
        return range(self.min_counts[i], hi + 1)

    def _prune(self, i: int, assigned: int, committed: dict[tuple[str, str], int]) -> bool:
        """True if no completion of this node can satisfy the quotas."""
        rem = self.k - assigned
        for feature in self.features:
            need = 0
            room = 0
            for value in self.instance.scheme.values[feature]:
                lo, hi = self.quota[(feature, value)]
                got = committed[(feature, value)]
                if got > hi:
                    return True
                need += max(0, lo - got)
                room += min(hi - got, self.avail[i][(feature, value)])
            if need > rem or room < rem:
                return True
        return False

    def iter_compositions(self) -> Iterator[dict[FeatureVector, int]]:
        committed = {pair: 0 for pair in self.pairs}
        counts: list[int] = []

        def dfs(i: int, assigned: int) -> Iterator[dict[FeatureVector, int]]:
            if i == len(self.vectors):
                # _prune with no groups left verifies the quotas exactly.
                if assigned == self.k and not self._prune(i, assigned, committed):
                    yield {v: c for v, c in zip(self.vectors, counts) if c > 0}
                return
            if self._prune(i, assigned, committed):
                return
            vector = self.vectors[i]
            for c in self._candidate_range(i, assigned):
                for f_idx, feature in enumerate(self.features):
                    committed[(feature, vector[f_idx])] += c
                counts.append(c)
                yield from dfs(i + 1, assigned + c)
                counts.pop()
                for f_idx, feature in enumerate(self.features):
                    committed[(feature, vector[f_idx])] -= c
        yield from dfs(0, 0)

    def best_composition(self, group_prefix: Mapping[FeatureVector, Sequence[float]]) -> dict[FeatureVector, int] | None:
        """Exact max-weight composition via branch and bound.

        ``group_prefix[v][c]`` is the best total weight of c agents from group
        v (prefix sums of the group's weights in descending order). The bound
        ignores quotas: current score plus the ``rem`` largest weights still
        available downstream can never be beaten.
        """
        # suffix_top[i] = descending weights of all agents in groups i..end,
        # truncated to k entries.
        n_vec = len(self.vectors)
        suffix_top: list[list[float]] = [[] for _ in range(n_vec + 1)]
        for i in range(n_vec - 1, -1, -1):
            prefix = group_prefix[self.vectors[i]]
            weights = [prefix[c + 1] - prefix[c] for c in range(len(prefix) - 1)]
            merged = sorted(weights + suffix_top[i + 1], reverse=True)[: self.k]
            suffix_top[i] = merged
        suffix_cum = [[0.0] for _ in range(n_vec + 1)]
        for i in range(n_vec + 1):
            acc = 0.0
            for w in suffix_top[i]:
                acc += w
                suffix_cum[i].append(acc)

        committed = {pair: 0 for pair in self.pairs}
        counts: list[int] = []
        best: dict[str, object] = {"score": -math.inf, "counts": None}

        def dfs(i: int, assigned: int, score: float) -> None:
            rem = self.k - assigned
            if i == n_vec:
                if (
                    assigned == self.k
                    and not self._prune(i, assigned, committed)
                    and score > best["score"] + 1e-12
                ):
                    best["score"] = score
                    best["counts"] = list(counts)
                return
            if self._prune(i, assigned, committed):
                return
            if rem >= len(suffix_cum[i]):
                return  # not enough agents left
            if score + suffix_cum[i][rem] <= best["score"] + 1e-12:
                return
            vector = self.vectors[i]
            prefix = group_prefix[vector]
            for c in self._candidate_range(i, assigned):
                for f_idx, feature in enumerate(self.features):
                    committed[(feature, vector[f_idx])] += c
                counts.append(c)
                dfs(i + 1, assigned + c, score + prefix[c])
                counts.pop()
                for f_idx, feature in enumerate(self.features):
                    committed[(feature, vector[f_idx])] -= c

        dfs(0, 0, 0.0)
        if best["counts"] is None:
            return None
        return {v: c for v, c in zip(self.vectors, best["counts"]) if c > 0}


def feasible_compositions(instance: Instance, cap: int | None = None) -> list[PanelComposition]:
    """All valid seat-count compositions, in deterministic lexicographic order."""
    out: list[PanelComposition] = []
    for counts in _CompositionSearch(instance).iter_compositions():
        out.append(PanelComposition(tuple(counts.items())))
        if cap is not None and len(out) > cap:
            raise CapExceededError(f"more than {cap} valid compositions")
    return out


# Composition spaces up to this size are enumerated once per instance and
# memoized, turning every oracle call into a vectorized scoring pass; larger
# spaces fall back to branch and bound per query.
_COMP_CACHE_ATTR = "_cached_composition_matrix"
_COMP_CACHE_LIMIT = 300_000


def _composition_matrix(instance: Instance):
    """(vectors, count-matrix in lex order), or False when the space is too big."""
    cached = getattr(instance, _COMP_CACHE_ATTR, None)
    if cached is not None:
        return cached
    import numpy as np

    search = _CompositionSearch(instance)
    rows: list[list[int]] = []
    for counts in search.iter_compositions():
        rows.append([counts.get(v, 0) for v in search.vectors])
        if len(rows) > _COMP_CACHE_LIMIT:
            object.__setattr__(instance, _COMP_CACHE_ATTR, False)
            return False
    matrix = np.array(rows, dtype=np.int32).reshape(len(rows), len(search.vectors))
    value = (search.vectors, matrix)
    object.__setattr__(instance, _COMP_CACHE_ATTR, value)
    return value


def has_valid_panel(instance: Instance) -> bool:
    cache = _composition_matrix(instance)
    if cache is not False:
        return cache[1].shape[0] > 0
    for _ in _CompositionSearch(instance).iter_compositions():
        return True
    return False


def _vector_coverable(instance: Instance, vector: FeatureVector) -> bool:
    """Is there a valid composition seating at least one agent of ``vector``?"""
    cache = _composition_matrix(instance)
    if cache is not False:
        vectors, matrix = cache
        column = vectors.index(vector)
        return bool((matrix[:, column] > 0).any())
    search = _CompositionSearch(instance, min_counts={vector: 1})
    for _ in search.iter_compositions():
        return True
    return False


def panel_oracle(instance: Instance, weights: Mapping[str, float],
                 min_counts: Mapping[FeatureVector, int] | None = None) -> Panel | None:
    """A valid panel maximizing total agent weight, or None if none exists.

    Exact: the search enumerates compositions with a sound optimistic bound,
    and within a composition each group contributes its heaviest agents.
    Ties break toward the lexicographically smallest composition, then the
    smallest agent ids.
    """
    group_sorted: dict[FeatureVector, list[str]] = {}
    group_prefix: dict[FeatureVector, list[float]] = {}
    for vector, members in instance.groups.items():
        ordered = sorted(members, key=lambda a: (-weights.get(a, 0.0), a))
        group_sorted[vector] = ordered
        prefix = [0.0]
        for agent_id in ordered:
            prefix.append(prefix[-1] + weights.get(agent_id, 0.0))
        group_prefix[vector] = prefix

    counts = _best_counts(instance, group_prefix, min_counts)
    if counts is None:
        return None
    members: list[str] = []
    for vector, c in counts.items():
        members.extend(group_sorted[vector][:c])
    return Panel(tuple(members))


def _best_counts(
    instance: Instance,
    group_prefix: Mapping[FeatureVector, Sequence[float]],
    min_counts: Mapping[FeatureVector, int] | None,
) -> dict[FeatureVector, int] | None:
    cache = _composition_matrix(instance)
    if cache is False:
        search = _CompositionSearch(instance, min_counts=min_counts)
        return search.best_composition(group_prefix)

    import numpy as np

    vectors, matrix = cache
    if matrix.shape[0] == 0:
        return None
    scores = np.zeros(matrix.shape[0])
    for column, vector in enumerate(vectors):
        prefix = np.asarray(group_prefix[vector])
        scores += prefix[matrix[:, column]]
    if min_counts:
        mask = np.ones(matrix.shape[0], dtype=bool)
        for vector, needed in min_counts.items():
            mask &= matrix[:, vectors.index(vector)] >= needed
        if not mask.any():
            return None
        scores[~mask] = -math.inf
    best = int(np.argmax(scores))  # lex order in the matrix; first max wins
    row = matrix[best]
    return {v: int(c) for v, c in zip(vectors, row) if c > 0}


def enumerate_panels(instance: Instance, cap: int = 1_000_000) -> list[Panel]:
    """All valid panels, each exactly once, in deterministic order.

    Compositions are enumerated first; the total panel count is checked
    against ``cap`` before any expansion happens.
    """
    compositions = feasible_compositions(instance)
    total = 0
    for comp in compositions:
        count = 1
        for vector, c in comp.items:
            count *= math.comb(instance.group_size(vector), c)
        total += count
        if total > cap:
            raise CapExceededError(f"instance has more than {cap} valid panels")
    panels: list[Panel] = []
    for comp in compositions:
        pools = [
            itertools.combinations(instance.groups[vector], c) for vector, c in comp.items
        ]
        for pick in itertools.product(*pools):
            members = tuple(itertools.chain.from_iterable(pick))
            panels.append(Panel(members))
    return panels


def marginals(instance: Instance, dist: PanelDistribution) -> ProbabilityAssignment:
    """Per-agent selection probabilities implied by a panel distribution."""
    pi = {agent_id: 0.0 for agent_id in instance.agent_ids}
    for panel, prob in dist.entries:
        if not panel.is_valid(instance):
            raise ValidationError(f"support panel {panel.members} is not valid for this instance")
        for agent_id in panel.members:
            pi[agent_id] += prob
    return ProbabilityAssignment(pi)


def structurally_excluded(instance: Instance) -> set[str]:
    """Agents that appear on no valid panel.

    Group-level query: agents sharing a vector are interchangeable, so one
    forced-inclusion feasibility check per present vector suffices.
    """
    excluded: set[str] = set()
    for vector in instance.present_vectors():
        if not _vector_coverable(instance, vector):
            excluded.update(instance.groups[vector])
    return excluded


def strip_self_excluders(instance: Instance, coalition: set[str] | frozenset[str]) -> Instance:
    """Drop manipulators whose reported vector lies on no valid panel.

    Raises if a non-coalition agent is excluded: size-bounded coalitions are
    supposed to make that impossible, and the metrics are undefined when it
    happens. Removing agents who are on no panel leaves the set of valid
    panels unchanged, so a single pass cannot create new exclusions.
    """
    excluded = structurally_excluded(instance)
    if not excluded:
        return instance
    truthful_excluded = excluded - set(coalition)
    if truthful_excluded:
        raise NonCoalitionExclusionError(
            f"misreport structurally excluded truthful agents: {sorted(truthful_excluded)}"
        )
    kept = [(a, v) for a, v in instance.agents if a not in excluded]
    return instance.replace_agents(kept)


def expand_composition_distribution(
    instance: Instance,
    comp_dist: Sequence[tuple[PanelComposition, float]],
) -> PanelDistribution:
    """Realize a distribution over compositions as a distribution over panels.

    Seats reserved for each vector group are filled round-robin across the
    group's members, so every member of group w ends up with probability
    exactly t_w / n_w, where t_w is the group's expected seat count. The
    construction needs lcm(group sizes) panels per composition.
    """
    total = 0.0
    for comp, prob in comp_dist:
        if prob < -PROB_EPS:
            raise ValidationError("composition probabilities must be non-negative")
        total += prob
    if abs(total - 1.0) > PROB_EPS:
        raise ValidationError(f"composition probabilities sum to {total}, expected 1")

    accum: dict[tuple[str, ...], float] = {}
    for comp, prob in comp_dist:
        if prob <= PROB_EPS:
            continue
        if not comp.is_valid(instance):
            raise ValidationError(f"composition {comp.items} is not valid for this instance")
        group_sizes = [instance.group_size(v) for v, _ in comp.items]
        n_panels = math.lcm(*group_sizes) if group_sizes else 1
        if n_panels > MAX_EXPANSION_PANELS:
            raise PanelotError(
                f"round-robin expansion would need {n_panels} panels (cap {MAX_EXPANSION_PANELS})"
            )
        share = prob / n_panels
        for j in range(n_panels):
            members: list[str] = []
            for vector, seats in comp.items:
                group = instance.groups[vector]
                size = len(group)
                start = (j * seats) % size
                members.extend(group[(start + t) % size] for t in range(seats))
            key = tuple(sorted(members))
            accum[key] = accum.get(key, 0.0) + share
    entries = tuple((Panel(members), prob) for members, prob in sorted(accum.items()))
    return PanelDistribution(entries)
