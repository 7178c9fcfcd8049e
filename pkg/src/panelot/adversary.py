"""Manipulation modeling: misreports, attack strategies, and worst-case metrics.

The coalition model: a set of agents may report arbitrary feature vectors
while everyone else is truthful. Metrics are worst case over coalitions and
reported vectors, with agents of equal truthful vector treated as
interchangeable (every objective here is anonymous), which collapses the
search space to multisets.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import (
    BudgetExceededError,
    CoalitionTooLargeError,
    NonCoalitionExclusionError,
    ValidationError,
)
from .model import FeatureVector, Instance, pool_share
from .panels import strip_self_excluders, structurally_excluded
from .solver import SolveConfig, SolveResult, solve

METRIC_INT = "int"  # largest probability gain of a coalition member
METRIC_EXT = "ext"  # largest probability loss inflicted on an outsider
METRIC_COMP = "comp"  # most expected seats shifted onto one feature value
METRIC_FAIRNESS = "fairness"  # worst-case minimum probability under attack

SEARCH_MU = "mu"
SEARCH_EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class Misreport:
    """A coalition and what each member reports (truthful members may repeat
    their real vector)."""

    coalition: frozenset[str]
    reported: Mapping[str, FeatureVector]

    def __post_init__(self):
        extra = set(self.reported) - set(self.coalition)
        if extra:
            raise ValidationError(f"reported vectors for non-coalition agents: {sorted(extra)}")

    def describe(self) -> str:
        if not self.coalition:
            return "-"
        parts = []
        for agent_id in sorted(self.coalition):
            vec = self.reported.get(agent_id)
            parts.append(f"{agent_id}->{'|'.join(vec) if vec else 'truthful'}")
        return ";".join(parts)


@dataclass(frozen=True)
class ManipReport:
    metric: str
    value: float
    witness: Misreport
    algorithm: str
    search: str


def coalition_size_cap(instance: Instance) -> int:
    """Largest coalition size that provably cannot exclude truthful agents."""
    return max(0, instance.min_group_size() - instance.k)


def apply_misreport(instance: Instance, mis: Misreport, strict: bool = False) -> Instance:
    """The manipulated instance: reported vectors, self-excluders removed.

    ``strict`` additionally enforces the safe coalition-size bound
    max(0, smallest group - k); without it, the only hard requirement is
    that no truthful agent ends up structurally excluded.
    """
    unknown = set(mis.coalition) - set(instance.agent_ids)
    if unknown:
        raise ValidationError(f"coalition members not in the pool: {sorted(unknown)}")
    if strict and len(mis.coalition) > coalition_size_cap(instance):
        raise CoalitionTooLargeError(
            f"coalition of {len(mis.coalition)} exceeds the safe bound {coalition_size_cap(instance)}"
        )
    for vector in mis.reported.values():
        instance.scheme.check_vector(vector)
    agents = tuple(
        (agent_id, mis.reported.get(agent_id, vector)) for agent_id, vector in instance.agents
    )
    manipulated = instance.replace_agents(agents, label=f"{instance.label}~manip")
    return strip_self_excluders(manipulated, set(mis.coalition))


def mu_vector(instance: Instance) -> FeatureVector:
    """The most-underrepresented vector: per feature, the value whose quota
    midpoint most exceeds its pool share.

    Only values present in the pool compete; a quota-constrained value with
    zero pool share is an error. Ties resolve to the earliest value in scheme
    order.
    """
    chosen: list[str] = []
    for f_idx, feature in enumerate(instance.scheme.features):
        best_value = None
        best_ratio = -math.inf
        for value in instance.scheme.values[feature]:
            share = pool_share(instance, feature, value)
            if share == 0:
                if (feature, value) in instance.quotas:
                    raise ValidationError(
                        f"pair ({feature}, {value}) is quota-constrained but absent from the pool"
                    )
                continue
            lo, hi = instance.quota(feature, value)
            ratio = ((lo + hi) / 2.0) / float(share)
            if ratio > best_ratio + 1e-12:
                best_ratio = ratio
                best_value = value
        assert best_value is not None
        chosen.append(best_value)
    return tuple(chosen)


def _group_probabilities(instance: Instance, result: SolveResult) -> dict[FeatureVector, float]:
    return result.pi.group_probabilities(instance, tol=1e-6)


def worst_mu_manipulator(instance: Instance, config: SolveConfig) -> ManipReport:
    """Largest probability gain any single agent can get by reporting the
    most-underrepresented vector.

    One re-solve per truthful vector group (members are interchangeable);
    the reported value is clamped at zero, matching a rational manipulator
    who can always stay truthful.
    """
    target = mu_vector(instance)
    base = solve(instance, config)
    base_groups = _group_probabilities(instance, base)

    best_gain = 0.0
    best_witness = Misreport(frozenset(), {})
    for vector in instance.present_vectors():
        if vector == target:
            continue
        agent_id = instance.groups[vector][0]
        mis = Misreport(frozenset({agent_id}), {agent_id: target})
        manipulated = apply_misreport(instance, mis)
        if agent_id not in manipulated.vector_of:
            continue  # reporting the target vector excluded them outright
        attacked = solve(manipulated, config)
        attacked_groups = _group_probabilities(manipulated, attacked)
        gain = attacked_groups[target] - base_groups[vector]
        if gain > best_gain:
            best_gain = gain
            best_witness = mis
    return ManipReport(
        metric=METRIC_INT,
        value=best_gain,
        witness=best_witness,
        algorithm=config.objective.spec_string(),
        search=SEARCH_MU,
    )


def _coalition_choices(instance: Instance, c: int):
    """Multisets of c truthful vector groups, capped by group sizes."""
    vectors = instance.present_vectors()
    for combo in itertools.combinations_with_replacement(vectors, c):
        counts = Counter(combo)
        if all(instance.group_size(v) >= cnt for v, cnt in counts.items()):
            yield counts


def _report_choices(scheme_vectors: list[FeatureVector], counts: Counter):
    """Per-group multisets of reported vectors, expanded over the coalition."""
    per_group = []
    groups = sorted(counts)
    for vector in groups:
        per_group.append(
            list(itertools.combinations_with_replacement(scheme_vectors, counts[vector]))
        )
    for assignment in itertools.product(*per_group):
        yield dict(zip(groups, assignment))


def manip_metric_exhaustive(
    instance: Instance,
    config: SolveConfig,
    c: int,
    metric: str,
    strict: bool = False,
    budget: int = 200_000,
) -> ManipReport:
    """Exact worst case over all size-c coalitions and reported vectors.

    Search is canonicalized by truthful vector group. Misreports that would
    structurally exclude a truthful agent fall outside the model: they floor
    the fairness metric at zero and are skipped for the gain metrics.
    """
    if metric not in (METRIC_INT, METRIC_EXT, METRIC_COMP, METRIC_FAIRNESS):
        raise ValidationError(f"unknown metric {metric!r}")
    algorithm = config.objective.spec_string()

    if metric == METRIC_FAIRNESS and structurally_excluded(instance):
        return ManipReport(metric, 0.0, Misreport(frozenset(), {}), algorithm, SEARCH_EXHAUSTIVE)

    if strict and c > coalition_size_cap(instance):
        raise CoalitionTooLargeError(
            f"coalition of {c} exceeds the safe bound {coalition_size_cap(instance)}"
        )

    base = solve(instance, config)
    base_groups = _group_probabilities(instance, base)

    if c == 0:
        value = min(base_groups.values()) if metric == METRIC_FAIRNESS else 0.0
        return ManipReport(metric, value, Misreport(frozenset(), {}), algorithm, SEARCH_EXHAUSTIVE)

    all_vectors = instance.scheme.all_vectors()
    n_groups = len(instance.present_vectors())
    coalition_count = math.comb(n_groups + c - 1, c)
    report_count = math.comb(len(all_vectors) + c - 1, c)
    if coalition_count * report_count > budget:
        raise BudgetExceededError(
            f"{coalition_count * report_count} misreport candidates exceed the budget {budget}"
        )

    solve_cache: dict[tuple, dict[FeatureVector, float] | None] = {}
    best_value = -math.inf if metric != METRIC_FAIRNESS else math.inf
    best_witness = Misreport(frozenset(), {})

    for counts in _coalition_choices(instance, c):
        members: dict[FeatureVector, list[str]] = {
            vector: list(instance.groups[vector][: counts[vector]]) for vector in counts
        }
        for reports in _report_choices(all_vectors, counts):
            coalition = frozenset(itertools.chain.from_iterable(members.values()))
            reported = {}
            for vector, agent_list in members.items():
                for agent_id, rep in zip(agent_list, reports[vector]):
                    reported[agent_id] = rep
            mis = Misreport(coalition, reported)

            pool_key = tuple(
                sorted(
                    Counter(
                        reported.get(a, v) for a, v in instance.agents
                    ).items()
                )
            )
            try:
                manipulated = apply_misreport(instance, mis)
            except NonCoalitionExclusionError:
                if metric == METRIC_FAIRNESS and 0.0 < best_value:
                    best_value, best_witness = 0.0, mis
                continue
            if pool_key not in solve_cache:
                attacked = solve(manipulated, config)
                solve_cache[pool_key] = _group_probabilities(manipulated, attacked)
            attacked_groups = solve_cache[pool_key]

            def prob_after(agent_id: str) -> float:
                if agent_id not in manipulated.vector_of:
                    return 0.0  # removed as a self-excluder
                return attacked_groups[manipulated.vector_of[agent_id]]

            if metric == METRIC_INT:
                value = max(
                    prob_after(a) - base_groups[instance.vector_of[a]] for a in coalition
                )
            elif metric == METRIC_EXT:
                outsiders = [a for a in instance.agent_ids if a not in coalition]
                value = max(
                    base_groups[instance.vector_of[a]] - prob_after(a) for a in outsiders
                )
            elif metric == METRIC_COMP:
                value = -math.inf
                for f_idx, feature in enumerate(instance.scheme.features):
                    for fv in instance.scheme.values[feature]:
                        shift = sum(
                            prob_after(a) - base_groups[instance.vector_of[a]]
                            for a, vec in instance.agents
                            if vec[f_idx] == fv
                        )
                        value = max(value, shift)
            else:  # fairness
                value = min(prob_after(a) for a in manipulated.agent_ids)

            better = value < best_value if metric == METRIC_FAIRNESS else value > best_value
            if better:
                best_value = value
                best_witness = mis

    if metric != METRIC_FAIRNESS:
        best_value = max(best_value, 0.0)
    return ManipReport(metric, float(best_value), best_witness, algorithm, SEARCH_EXHAUSTIVE)


def feature_bias_spread(instance: Instance, feature: str) -> float:
    """Spread of quota-midpoint/pool-share ratios across a feature's values."""
    ratios = []
    f_idx = instance.scheme.features.index(feature)
    for value in instance.scheme.values[feature]:
        share = pool_share(instance, feature, value)
        if share == 0:
            continue
        lo, hi = instance.quota(feature, value)
        ratios.append(((lo + hi) / 2.0) / float(share))
    if not ratios:
        return 0.0
    return max(ratios) - min(ratios)


def drop_features(instance: Instance, count: int) -> Instance:
    """Remove the quota constraints of the ``count`` most biased features.

    Features are ranked by their ratio spread, descending; dropped features
    keep their agent data but fall back to the vacuous (0, k) quotas.
    """
    if not 0 <= count < len(instance.scheme.features):
        raise ValidationError(f"can drop between 0 and {len(instance.scheme.features) - 1} features")
    if count == 0:
        return instance
    ranked = sorted(
        instance.scheme.features,
        key=lambda f: (-feature_bias_spread(instance, f), instance.scheme.features.index(f)),
    )
    dropped = set(ranked[:count])
    quotas = {
        (f, v): bounds for (f, v), bounds in instance.quotas.items() if f not in dropped
    }
    return Instance(
        scheme=instance.scheme,
        agents=instance.agents,
        k=instance.k,
        quotas=quotas,
        label=f"{instance.label}-drop{count}",
    )


# ---------------------------------------------------------------------------
# Constructed lower-bound families
# ---------------------------------------------------------------------------

KIND_EXAMPLE1 = "example1"
KIND_EXAMPLE2 = "example2"
KIND_THM31 = "thm31"
KIND_THM43 = "thm43"


def make_lb_instance(kind: str, **params) -> tuple[Instance, Misreport]:
    """Constructed instances with known analytic behavior, plus the coalition
    that attacks them (empty for the two example fixtures).

    thm31/thm43 build the three-binary-feature pools whose post-manipulation
    panels come in exactly two types, pinning the small groups' probabilities
    to closed forms; see the tests for the formulas they are checked against.
    """
    kind = kind.lower()
    if kind == KIND_EXAMPLE1:
        from .fixtures import small_group_instance

        n = params.get("n", 6)
        k = params.get("k", 3)
        n_min = params.get("n_min", 2)
        return small_group_instance(n=n, k=k, scarce=n_min), Misreport(frozenset(), {})
    if kind == KIND_EXAMPLE2:
        from .fixtures import linked_fate_instance

        n = params.get("n", 8)
        k = params.get("k", 4)
        return linked_fate_instance(n=n, k=k), Misreport(frozenset(), {})
    if kind in (KIND_THM31, KIND_THM43):
        return _make_two_type_instance(kind, **params)
    raise ValidationError(f"unknown constructed-instance kind {kind!r}")


def _make_two_type_instance(kind: str, n: int, k: int, n_min: int, c: int) -> tuple[Instance, Misreport]:
    if k % 2 != 0 or k < 6:
        raise ValidationError("k must be even and at least 6")
    if (n - n_min) % 2 != 0:
        raise ValidationError("n - n_min must be even")
    if n_min > n // 2:
        raise ValidationError("n_min cannot exceed n/2")
    if kind == KIND_THM31:
        if not (k + 3 <= n_min):
            raise ValidationError("need n_min >= k + 3")
        if not (3 <= c <= n_min - k):
            raise ValidationError("need 3 <= c <= n_min - k")
    else:
        if not (k + 5 <= n_min and n_min <= n // k):
            raise ValidationError("need k + 5 <= n_min <= n/k")
        if not (5 <= c <= n_min - k):
            raise ValidationError("need 5 <= c <= n_min - k")

    scheme = _three_feature_scheme()
    agents: list[tuple[str, FeatureVector]] = []
    side = (n - n_min) // 2
    idx = 1
    for vector, size in ((("0", "0", "0"), side), (("1", "1", "0"), side), (("1", "1", "1"), n_min)):
        for _ in range(size):
            agents.append((f"a{idx}", vector))
            idx += 1
    half = k // 2
    quotas = {
        ("f1", "1"): (half + 1, half + 1),
        ("f1", "0"): (half - 1, half - 1),
        ("f2", "1"): (half + 1, half + 1),
        ("f2", "0"): (half - 1, half - 1),
        ("f3", "1"): (2, 2),
        ("f3", "0"): (k - 2, k - 2),
    }
    instance = Instance(
        scheme=scheme, agents=tuple(agents), k=k, quotas=quotas, label=kind
    )

    column = instance.groups[("1", "1", "1")]
    if kind == KIND_THM31:
        coalition = list(column[:c])
        reported: dict[str, FeatureVector] = {coalition[0]: ("1", "1", "1")}
        reported[coalition[1]] = ("0", "1", "0")
        for agent_id in coalition[2:]:
            reported[agent_id] = ("1", "0", "0")
    else:
        insiders = list(column[: c - 2])
        mover_up = instance.groups[("0", "0", "0")][0]
        mover_side = instance.groups[("1", "1", "0")][0]
        coalition = insiders + [mover_up, mover_side]
        reported = {mover_up: ("1", "1", "1"), mover_side: ("0", "1", "0")}
        reported[insiders[0]] = ("0", "0", "0")
        reported[insiders[1]] = ("1", "1", "0")
        for agent_id in insiders[2:]:
            reported[agent_id] = ("1", "0", "0")
    return instance, Misreport(frozenset(coalition), reported)


def _three_feature_scheme():
    from .model import FeatureScheme

    return FeatureScheme(
        features=("f1", "f2", "f3"),
        values={"f1": ("0", "1"), "f2": ("0", "1"), "f3": ("0", "1")},
    )
