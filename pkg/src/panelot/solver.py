"""Maximally equal panel distributions.

Two backends share the same master formulations over *composition columns*:

* ``brute`` enumerates every valid composition and optimizes over all of them;
* ``colgen`` generates columns on demand with the exact weighted-panel
  oracle, using the textbook stopping rule: stop once the best panel outside
  the support beats the best in-support panel by at most ``eps_colgen``
  (in objective units).

Master solves are self-contained: linear objectives run on the bundled
simplex solver, the goldilocks family reduces to a one-dimensional convex
search over an enforced minimum floor with an inner min-max LP, and nash
runs Frank-Wolfe with away steps and exact line search on the column simplex.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from ._simplex import solve_lp
from .errors import (
    NoValidPanelError,
    RestartLimitError,
    SolverError,
    StructuralExclusionError,
    ValidationError,
)
from .model import FeatureVector, Instance
from .objectives import (
    GAMMA_AUTO_BALANCED,
    GAMMA_AUTO_SELECTION_BIAS,
    GAMMA_FIXED,
    EqualityObjective,
    Kind,
    evaluate,
    gamma_balanced,
    gamma_selection_bias,
)
from .panels import (
    Panel,
    PanelComposition,
    PanelDistribution,
    ProbabilityAssignment,
    expand_composition_distribution,
    feasible_compositions,
    marginals,
    panel_oracle,
)

# Columns with less than this much mass are dropped from the final support.
_SUPPORT_EPS = 1e-12
# Dual weight above this marks a constraint as binding in every optimum.
_DUAL_EPS = 1e-7


@dataclass(frozen=True)
class SolveConfig:
    """Knobs for a solve run; defaults suit desk-scale instances."""

    objective: EqualityObjective
    backend: str = "colgen"  # "brute" | "colgen"
    eps_master: float = 1e-8
    eps_colgen: float = 1e-3
    tau_anon: float = 0.01
    max_columns: int = 2000
    seed: int = 42
    nash_gap: float = 1e-7  # Frank-Wolfe duality-gap target, objective units
    nash_max_iters: int = 20_000
    composition_cap: int = 200_000

    def __post_init__(self):
        if self.backend not in ("brute", "colgen"):
            raise ValidationError(f"unknown backend {self.backend!r}")
        for name in ("eps_master", "eps_colgen", "tau_anon", "nash_gap"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")


@dataclass
class SolveResult:
    """A solved panel distribution with its marginals and diagnostics."""

    distribution: PanelDistribution
    pi: ProbabilityAssignment
    objective: EqualityObjective
    objective_value: float
    iterations: int
    converged: bool
    certificate: float | None = None

    def to_json(self) -> dict:
        return {
            "objective": self.objective.spec_string(),
            "gamma": self.objective.gamma,
            "value": self.objective_value,
            "converged": self.converged,
            "pi": {agent: prob for agent, prob in sorted(self.pi.pi.items())},
            "panels": [
                {"members": list(panel.members), "prob": prob}
                for panel, prob in self.distribution.entries
            ],
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# Column pool
# ---------------------------------------------------------------------------


class _ColumnPool:
    """Composition columns plus the seats/group-size matrix the masters use."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.vectors = instance.present_vectors()
        self.index = {v: i for i, v in enumerate(self.vectors)}
        self.sizes = np.array([instance.group_size(v) for v in self.vectors], dtype=float)
        self.columns: list[PanelComposition] = []
        self._keys: set[tuple] = set()
        self._cols: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def add(self, comp: PanelComposition) -> bool:
        if comp.items in self._keys:
            return False
        col = np.zeros(len(self.vectors))
        for vector, seats in comp.items:
            col[self.index[vector]] = seats
        self._keys.add(comp.items)
        self.columns.append(comp)
        self._cols.append(col / self.sizes)
        self._matrix = None
        return True

    def __contains__(self, comp: PanelComposition) -> bool:
        return comp.items in self._keys

    def __len__(self) -> int:
        return len(self.columns)

    @property
    def A(self) -> np.ndarray:
        """Group-probability matrix: A[w, c] = seats of group w in column c / n_w."""
        if self._matrix is None:
            self._matrix = np.column_stack(self._cols)
        return self._matrix


@dataclass
class _MasterSolution:
    q: np.ndarray
    value: float
    group_duals: np.ndarray  # pricing weights per group
    p: np.ndarray  # group probabilities A @ q


# ---------------------------------------------------------------------------
# LP masters
# ---------------------------------------------------------------------------


def _lp_master(
    pool: _ColumnPool,
    kind: str,
    floors: dict[int, float] | None = None,
    ceilings: dict[int, float] | None = None,
    free_groups: set[int] | None = None,
    gamma: float = 0.0,
) -> _MasterSolution:
    """Solve one LP master over the pool's columns.

    kind "max_min":   max t  s.t. p_w >= t on free groups (t is the value);
    kind "min_max":   min s  s.t. p_w <= s on all groups;
    kind "linear":    min s - gamma * r  s.t. r <= p_w <= s.
    ``floors``/``ceilings`` add hard bounds p_w >= / <= value for single
    groups. Group duals are summed across every row a group appears in, which
    is exactly the pricing weight a new column must be scored against.
    """
    A = pool.A
    n_groups, n_cols = A.shape
    floors = floors or {}
    ceilings = ceilings or {}

    rows: list[tuple[int | None, np.ndarray, dict[str, float], float, float]] = []
    # (group, q-coefficients, extra-var coeffs, slack sign, rhs)
    if kind == "max_min":
        extras = ["t"]
        cost = {"t": -1.0}
        groups = free_groups if free_groups is not None else set(range(n_groups))
        for w in sorted(groups):
            rows.append((w, A[w], {"t": -1.0}, -1.0, 0.0))
    elif kind == "min_max":
        extras = ["s"]
        cost = {"s": 1.0}
        for w in range(n_groups):
            rows.append((w, A[w], {"s": -1.0}, +1.0, 0.0))
    elif kind == "linear":
        extras = ["s", "r"]
        cost = {"s": 1.0, "r": -gamma}
        for w in range(n_groups):
            rows.append((w, A[w], {"s": -1.0}, +1.0, 0.0))
        for w in range(n_groups):
            rows.append((w, A[w], {"r": -1.0}, -1.0, 0.0))
    else:
        raise SolverError(f"unknown master kind {kind}")

    for w, floor_value in sorted(floors.items()):
        rows.append((w, A[w], {}, -1.0, floor_value))
    for w, ceiling_value in sorted(ceilings.items()):
        rows.append((w, A[w], {}, +1.0, ceiling_value))
    rows.append((None, np.ones(n_cols), {}, 0.0, 1.0))

    extra_pos = {name: n_cols + i for i, name in enumerate(extras)}
    n_slack = sum(1 for row in rows if row[3] != 0.0)
    n_vars = n_cols + len(extras) + n_slack
    M = np.zeros((len(rows), n_vars))
    b = np.zeros(len(rows))
    slack_at = n_cols + len(extras)
    for r, (w, q_coeff, extra_coeff, slack_sign, rhs) in enumerate(rows):
        M[r, :n_cols] = q_coeff
        for name, coeff in extra_coeff.items():
            M[r, extra_pos[name]] = coeff
        if slack_sign != 0.0:
            M[r, slack_at] = slack_sign
            slack_at += 1
        b[r] = rhs
    c = np.zeros(n_vars)
    for name, coeff in cost.items():
        c[extra_pos[name]] = coeff

    res = solve_lp(c, M, b)
    if res.status == "infeasible":
        raise SolverError("master LP infeasible (floor above what the columns can support)")
    if res.status != "optimal":
        raise SolverError(f"master LP ended with status {res.status}")

    q = res.x[:n_cols].copy()
    q[q < 0.0] = 0.0
    group_duals = np.zeros(n_groups)
    for r, (w, *_rest) in enumerate(rows):
        if w is not None:
            group_duals[w] += res.duals[r]
    if kind == "max_min":
        value = res.x[extra_pos["t"]]
    else:
        value = res.objective
    return _MasterSolution(q=q, value=float(value), group_duals=group_duals, p=A @ q)


# ---------------------------------------------------------------------------
# Column generation driver
# ---------------------------------------------------------------------------


@dataclass
class _ColgenOutcome:
    solution: _MasterSolution
    gap: float
    rounds: int
    converged: bool


def _price_and_extend(
    instance: Instance,
    pool: _ColumnPool,
    solution: _MasterSolution,
    eta_scale: float,
) -> tuple[float, PanelComposition | None]:
    """One pricing step: best panel anywhere vs best panel in the support.

    Returns the gap in objective units and the new column (None when the
    oracle's best already sits in the pool).
    """
    mu = solution.group_duals
    eta = {}
    for vector, members in instance.groups.items():
        weight = mu[pool.index[vector]] / len(members)
        for agent_id in members:
            eta[agent_id] = weight
    best_panel = panel_oracle(instance, eta)
    if best_panel is None:
        raise NoValidPanelError("no valid panel exists")
    comp = best_panel.composition(instance)
    score = sum(mu[pool.index[v]] * seats / instance.group_size(v) for v, seats in comp.items)

    col_scores = mu @ pool.A
    support = solution.q > 1e-9
    support_best = float(col_scores[support].max()) if support.any() else float(col_scores.max())
    gap = (score - support_best) * eta_scale
    if comp in pool:
        return min(gap, 0.0), None
    return gap, comp


def _run_colgen(
    instance: Instance,
    pool: _ColumnPool,
    master,
    config: SolveConfig,
    eta_scale: float = 1.0,
) -> _ColgenOutcome:
    """Alternate master solves and pricing until the stopping rule holds."""
    rounds = 0
    while True:
        solution = master(pool)
        rounds += 1
        if config.backend == "brute":
            return _ColgenOutcome(solution, 0.0, rounds, True)
        gap, new_comp = _price_and_extend(instance, pool, solution, eta_scale)
        if new_comp is None or gap <= config.eps_colgen:
            return _ColgenOutcome(solution, max(gap, 0.0), rounds, True)
        if len(pool) >= config.max_columns:
            return _ColgenOutcome(solution, gap, rounds, False)
        pool.add(new_comp)


# ---------------------------------------------------------------------------
# Objective-specific drivers
# ---------------------------------------------------------------------------


def _goldilocks_search(
    instance: Instance,
    pool: _ColumnPool,
    gamma: float,
    config: SolveConfig,
) -> tuple[_MasterSolution, float, int, bool, float]:
    """Minimize max/(k/n) + gamma*(k/n)/min via a floor search.

    For a fixed floor t on the minimum probability, the best reachable
    maximum is an LP; the upper envelope V(t) = minmax(t)/(k/n) +
    gamma*(k/n)/t is convex in t, so a golden-section search over t finds
    the global optimum. Column generation runs inside every evaluation, so
    the shared pool ends up supporting the optimal floor exactly.
    """
    ideal = instance.k / instance.n
    iterations = 0
    converged = True

    maximin = _run_colgen(instance, pool, lambda p: _lp_master(p, "max_min"), config)
    iterations += maximin.rounds
    converged &= maximin.converged
    t_hi = max(maximin.solution.value, 0.0)
    if t_hi <= 0.0:
        # Some group is stuck at probability zero; every feasible point has
        # infinite objective. Hand back the most sensible representative:
        # min-max over the pool.
        fallback = _run_colgen(instance, pool, lambda p: _lp_master(p, "min_max"), config)
        iterations += fallback.rounds
        return fallback.solution, math.inf, iterations, converged and fallback.converged, fallback.gap

    cache: dict[float, tuple[float, _ColgenOutcome]] = {}

    def value_at(t: float) -> float:
        nonlocal iterations, converged
        if t in cache:
            return cache[t][0]
        outcome = _run_colgen(
            instance,
            pool,
            lambda p: _lp_master(p, "min_max", floors={w: t for w in range(len(p.vectors))}),
            config,
            eta_scale=1.0 / ideal,
        )
        iterations += outcome.rounds
        converged &= outcome.converged
        v = outcome.solution.value / ideal + gamma * ideal / t
        cache[t] = (v, outcome)
        return v

    v_hi = value_at(t_hi)
    t_lo = min(t_hi, gamma * ideal / v_hi) if math.isfinite(v_hi) else t_hi
    t_lo = max(t_lo * 0.5, t_hi * 1e-12)

    lo, hi = t_lo, t_hi
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = value_at(x1), value_at(x2)
    for _ in range(200):
        if hi - lo <= max(1e-13, 1e-10 * t_hi):
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = value_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = value_at(x2)

    best_t = min(cache, key=lambda t: cache[t][0])
    best_value, best_outcome = cache[best_t]
    return best_outcome.solution, best_value, iterations, converged, best_outcome.gap


def _nash_geomean(pool: _ColumnPool, q: np.ndarray) -> tuple[float, np.ndarray]:
    p = pool.A @ q
    if (p <= 0.0).any():
        return 0.0, p
    log_mean = float(pool.sizes @ np.log(p)) / pool.sizes.sum()
    return math.exp(log_mean), p


def _nash_line_search(pool: _ColumnPool, p: np.ndarray, delta: np.ndarray, h_max: float) -> float:
    """Maximize sum(n_w log(p_w + h*delta_w)) for h in [0, h_max] by bisection."""

    def derivative(h: float) -> float:
        denom = p + h * delta
        if (denom <= 0.0).any():
            return -math.inf
        return float(pool.sizes @ (delta / denom))

    if derivative(h_max * (1.0 - 1e-12)) >= 0.0:
        return h_max
    lo, hi = 0.0, h_max
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if derivative(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _nash_frank_wolfe(
    instance: Instance,
    pool: _ColumnPool,
    config: SolveConfig,
) -> tuple[_MasterSolution, int, bool, float]:
    """Frank-Wolfe with away steps and exact line search on the column simplex.

    Pricing against the full composition space reuses the panel oracle with
    weights 1/pi_i (the objective gradient through an agent's probability).
    The duality gap of the log objective converts to geometric-mean units via
    gap * geomean / n, which is what the stopping thresholds are read in.
    """
    n_total = pool.sizes.sum()
    # Start from a small covering mix rather than all columns: every group
    # needs positive probability for the log objective, but a fat support
    # only slows the away steps that would drain it again.
    covered: set[int] = set()
    support: list[int] = []
    for idx, comp in enumerate(pool.columns):
        groups_hit = {pool.index[v] for v, _ in comp.items}
        if not groups_hit <= covered:
            support.append(idx)
            covered |= groups_hit
        if len(covered) == len(pool.vectors):
            break
    q = np.zeros(len(pool))
    q[support] = 1.0 / len(support)
    iterations = 0
    converged = False
    gap_value_units = math.inf

    for _outer in range(200):
        # Inner loop: optimize over the current pool.
        for _ in range(config.nash_max_iters):
            iterations += 1
            A = pool.A
            p = A @ q
            grad = (pool.sizes / p) @ A  # d/dq_c of sum n_w log p_w
            fw_idx = int(np.argmax(grad))
            baseline = float(pool.sizes.sum())  # q . grad is identically n
            fw_gap_log = grad[fw_idx] - baseline
            geomean, _ = _nash_geomean(pool, q)
            gap_value_units = geomean * max(fw_gap_log, 0.0) / n_total
            if gap_value_units <= 0.5 * config.nash_gap:
                break
            active = np.flatnonzero(q > 1e-15)
            away_idx = int(active[np.argmin(grad[active])])
            away_gap_log = baseline - grad[away_idx]
            if fw_gap_log >= away_gap_log or len(active) == 1:
                direction = -q.copy()
                direction[fw_idx] += 1.0
                h_max = 1.0
            else:
                direction = q.copy()
                direction[away_idx] -= 1.0
                h_max = q[away_idx] / (1.0 - q[away_idx]) if q[away_idx] < 1.0 else 1.0
            delta = A @ direction
            h = _nash_line_search(pool, p, delta, h_max)
            if h <= 0.0:
                break
            q = q + h * direction
            q[q < 1e-15] = 0.0
            total = q.sum()
            if total <= 0.0:
                raise SolverError("nash iterate lost all mass")
            q /= total

        if config.backend == "brute":
            converged = gap_value_units <= config.nash_gap
            break

        # Pricing over the full composition space.
        p = pool.A @ q
        eta = {}
        for vector, members in instance.groups.items():
            weight = 1.0 / max(p[pool.index[vector]], 1e-300)
            for agent_id in members:
                eta[agent_id] = weight
        best_panel = panel_oracle(instance, eta)
        if best_panel is None:
            raise NoValidPanelError("no valid panel exists")
        comp = best_panel.composition(instance)
        score = sum(seats / max(p[pool.index[v]], 1e-300) for v, seats in comp.items)
        geomean, _ = _nash_geomean(pool, q)
        outside_gap = geomean * max(score - n_total, 0.0) / n_total
        if comp in pool or outside_gap <= max(config.eps_colgen, config.nash_gap):
            converged = True
            gap_value_units = max(outside_gap, gap_value_units)
            break
        if len(pool) >= config.max_columns:
            converged = False
            break
        q = np.append(q * (1.0 - 1e-6), 1e-6)
        pool.add(comp)

    A = pool.A
    return (
        _MasterSolution(q=q, value=-_nash_geomean(pool, q)[0], group_duals=np.zeros(len(pool.vectors)), p=A @ q),
        iterations,
        converged,
        gap_value_units,
    )


# ---------------------------------------------------------------------------
# Pool setup and result assembly
# ---------------------------------------------------------------------------


def _initial_pool(instance: Instance, config: SolveConfig) -> _ColumnPool:
    """Seed the pool and enforce that nobody is structurally excluded.

    Brute backend: every valid composition. Colgen: one covering column per
    vector group, found by forced-inclusion oracle calls; a group the oracle
    cannot cover is exactly a structurally excluded group.
    """
    pool = _ColumnPool(instance)
    if config.backend == "brute":
        comps = feasible_compositions(instance, cap=config.composition_cap)
        if not comps:
            raise NoValidPanelError("the quotas admit no valid panel")
        covered: set[FeatureVector] = set()
        for comp in comps:
            pool.add(comp)
            covered.update(v for v, _ in comp.items)
        missing = [v for v in pool.vectors if v not in covered]
        if missing:
            raise StructuralExclusionError(
                f"agents with vectors {missing} appear on no valid panel"
            )
        return pool

    ones = {agent_id: 0.0 for agent_id in instance.agent_ids}
    any_panel = panel_oracle(instance, ones)
    if any_panel is None:
        raise NoValidPanelError("the quotas admit no valid panel")
    pool.add(any_panel.composition(instance))
    for vector in pool.vectors:
        weights = {agent_id: 0.0 for agent_id in instance.agent_ids}
        for agent_id in instance.groups[vector]:
            weights[agent_id] = 1.0
        covering = panel_oracle(instance, weights, min_counts={vector: 1})
        if covering is None:
            raise StructuralExclusionError(
                f"agents with vector {vector} appear on no valid panel"
            )
        pool.add(covering.composition(instance))
    return pool


def _assemble_result(
    instance: Instance,
    pool: _ColumnPool,
    q: np.ndarray,
    objective: EqualityObjective,
    iterations: int,
    converged: bool,
    certificate: float | None,
    tau_anon: float = 0.01,
) -> SolveResult:
    keep = q > _SUPPORT_EPS
    comps = [pool.columns[i] for i in np.flatnonzero(keep)]
    probs = q[keep]
    probs = probs / probs.sum()
    dist = expand_composition_distribution(
        instance, [(comp, float(prob)) for comp, prob in zip(comps, probs)]
    )
    pi = marginals(instance, dist)
    # Round-robin expansion makes this exact; a breach means a solver bug.
    gap = pi.anonymity_gap(instance)
    if gap > tau_anon:
        raise SolverError(f"within-group probability gap {gap} exceeds the anonymity tolerance")
    value = evaluate(objective, pi, instance.k, instance.n)
    return SolveResult(
        distribution=dist,
        pi=pi,
        objective=objective,
        objective_value=value,
        iterations=iterations,
        converged=converged,
        certificate=certificate,
    )


def _resolve_gamma(instance: Instance, config: SolveConfig) -> tuple[EqualityObjective, int]:
    """Pin down auto gammas; balanced mode needs the two extreme pre-solves."""
    objective = config.objective
    if objective.kind != Kind.GOLDILOCKS or objective.gamma_mode == GAMMA_FIXED:
        return objective, 0
    if objective.gamma_mode == GAMMA_AUTO_SELECTION_BIAS:
        gamma = gamma_selection_bias(instance)
        return replace(objective, gamma=gamma, gamma_mode=GAMMA_FIXED), 0
    if objective.gamma_mode == GAMMA_AUTO_BALANCED:
        maximin_cfg = replace(config, objective=EqualityObjective(Kind.MAXIMIN))
        minimax_cfg = replace(config, objective=EqualityObjective(Kind.MINIMAX))
        res_min = solve(instance, maximin_cfg)
        res_max = solve(instance, minimax_cfg)
        gamma = gamma_balanced(
            res_min.pi.min(), res_max.pi.max(), instance.n, instance.k
        )
        extra = res_min.iterations + res_max.iterations
        return replace(objective, gamma=gamma, gamma_mode=GAMMA_FIXED), extra
    raise ValidationError(f"unknown gamma mode {objective.gamma_mode!r}")


def _uniform_feasible_shortcut(solution: _MasterSolution, instance: Instance) -> bool:
    return solution.value >= instance.k / instance.n - 1e-11


def solve(instance: Instance, config: SolveConfig) -> SolveResult:
    """Compute a maximally equal panel distribution for the configured objective.

    Raises NO_VALID_PANEL / STRUCTURAL_EXCLUSION when the instance is
    unusable; returns converged=False with a certificate gap when a column
    budget runs out.
    """
    objective, extra_iters = _resolve_gamma(instance, config)
    if objective.kind == Kind.LEXIMIN:
        result = solve_leximin(instance, replace(config, objective=objective))
        result.iterations += extra_iters
        return result

    pool = _initial_pool(instance, config)

    if len(pool.vectors) == 1:
        # Degenerate single-group pool: the uniform composition is optimal
        # for every objective considered here.
        comp = pool.columns[0]
        q = np.zeros(len(pool))
        q[0] = 1.0
        result = _assemble_result(
            instance, pool, q, objective, 1 + extra_iters, True, 0.0, config.tau_anon
        )
        return result

    if objective.kind == Kind.MAXIMIN:
        outcome = _run_colgen(instance, pool, lambda p: _lp_master(p, "max_min"), config)
        iterations, converged, gap = outcome.rounds, outcome.converged, outcome.gap
        solution = outcome.solution
        if objective.tie_break:
            floor = {w: solution.value - 1e-12 for w in range(len(pool.vectors))}
            tb = _run_colgen(
                instance, pool, lambda p: _lp_master(p, "min_max", floors=floor), config
            )
            solution = tb.solution
            iterations += tb.rounds
            converged &= tb.converged
            gap = max(gap, tb.gap)
    elif objective.kind == Kind.MINIMAX:
        outcome = _run_colgen(instance, pool, lambda p: _lp_master(p, "min_max"), config)
        iterations, converged, gap = outcome.rounds, outcome.converged, outcome.gap
        solution = outcome.solution
        if objective.tie_break:
            ceiling = {w: solution.value + 1e-12 for w in range(len(pool.vectors))}
            tb = _run_colgen(
                instance, pool, lambda p: _lp_master(p, "max_min", ceilings=ceiling), config
            )
            solution = tb.solution
            iterations += tb.rounds
            converged &= tb.converged
            gap = max(gap, tb.gap)
    elif objective.kind == Kind.LINEAR:
        outcome = _run_colgen(
            instance, pool, lambda p: _lp_master(p, "linear", gamma=objective.gamma), config
        )
        solution, iterations, converged, gap = (
            outcome.solution,
            outcome.rounds,
            outcome.converged,
            outcome.gap,
        )
    elif objective.kind == Kind.NASH:
        # If perfectly equal probabilities are feasible they are optimal for
        # every objective here, and the max-min LP finds them exactly,
        # which iterative nash refinement cannot.
        pre = _run_colgen(instance, pool, lambda p: _lp_master(p, "max_min"), config)
        if _uniform_feasible_shortcut(pre.solution, instance):
            solution, iterations, converged, gap = pre.solution, pre.rounds, pre.converged, pre.gap
        else:
            solution, iterations, converged, gap = _nash_frank_wolfe(instance, pool, config)
            iterations += pre.rounds
    elif objective.kind == Kind.GOLDILOCKS:
        solution, _value, iterations, converged, gap = _goldilocks_search(
            instance, pool, objective.gamma, config
        )
    else:
        raise ValidationError(f"solve cannot handle objective {objective.kind}")

    result = _assemble_result(
        instance, pool, solution.q, objective, iterations + extra_iters, converged, gap,
        config.tau_anon,
    )
    return result


def solve_nash(instance: Instance, config: SolveConfig) -> SolveResult:
    """Convenience dispatch of solve() with the nash objective."""
    return solve(instance, replace(config, objective=EqualityObjective(Kind.NASH)))


def solve_leximin(instance: Instance, config: SolveConfig) -> SolveResult:
    """Maximize the lowest probability, then the next lowest, group by group.

    Groups are frozen once their floor constraint is binding in every optimum
    (positive dual); if duals identify nothing new, the groups sitting at the
    current level are frozen instead so every round makes progress.
    """
    pool = _initial_pool(instance, config)
    n_groups = len(pool.vectors)
    frozen: dict[int, float] = {}
    iterations = 0
    converged = True
    gap = 0.0
    solution: _MasterSolution | None = None

    while len(frozen) < n_groups:
        free = set(range(n_groups)) - set(frozen)
        floors = {w: level - config.eps_master for w, level in frozen.items()}

        def master(p: _ColumnPool, free=free, floors=floors) -> _MasterSolution:
            return _lp_master(p, "max_min", floors=floors, free_groups=free)

        outcome = _run_colgen(instance, pool, master, config)
        solution = outcome.solution
        iterations += outcome.rounds
        converged &= outcome.converged
        gap = max(gap, outcome.gap)
        level = solution.value

        if not frozen and level >= instance.k / instance.n - 1e-11:
            # Perfectly equal probabilities are feasible, hence the unique
            # leximin outcome; the first-round solution realizes them exactly.
            break

        newly = [w for w in sorted(free) if solution.group_duals[w] > _DUAL_EPS]
        if not newly:
            newly = [w for w in sorted(free) if solution.p[w] <= level + 10 * config.eps_master]
        if not newly:
            newly = [min(free, key=lambda w: solution.p[w])]
        for w in newly:
            frozen[w] = max(level, 0.0)

    assert solution is not None
    objective = EqualityObjective(Kind.LEXIMIN)
    return _assemble_result(
        instance, pool, solution.q, objective, iterations, converged, gap, config.tau_anon
    )


# ---------------------------------------------------------------------------
# Deviation oracle
# ---------------------------------------------------------------------------


def deviation_delta(instance: Instance, config: SolveConfig | None = None) -> float:
    """Smallest achievable worst-side multiplicative deviation from k/n.

    delta = min over feasible assignments of max((k/n)/min(pi), max(pi)/(k/n)),
    found by bisecting the crossing of the decreasing term (k/n)/t against the
    nondecreasing term minmax(t)/(k/n) over the enforced floor t. Brute
    columns make every inner LP exact.
    """
    cfg = config or SolveConfig(objective=EqualityObjective(Kind.MAXIMIN), backend="brute")
    cfg = replace(cfg, backend="brute")
    pool = _initial_pool(instance, cfg)
    ideal = instance.k / instance.n

    t_max = _lp_master(pool, "max_min").value
    if t_max <= 0.0:
        return math.inf

    def minmax_at(t: float) -> float:
        floors = {w: t for w in range(len(pool.vectors))}
        return _lp_master(pool, "min_max", floors=floors).value

    def d_value(t: float) -> float:
        return max(ideal / t, minmax_at(t) / ideal)

    best = d_value(t_max)
    g_hi = ideal / t_max - minmax_at(t_max) / ideal
    if g_hi >= 0.0:
        return best
    lo, hi = t_max * 1e-9, t_max
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ideal / mid - minmax_at(mid) / ideal > 0.0:
            lo = mid
        else:
            hi = mid
    for t in (lo, hi, 0.5 * (lo + hi)):
        best = min(best, d_value(t))
    return best


# ---------------------------------------------------------------------------
# Greedy baseline
# ---------------------------------------------------------------------------


def solve_legacy(instance: Instance, seed: int, restart_limit: int = 10_000) -> Panel:
    """The greedy heuristic long used in practice: fill one seat at a time.

    Each step finds the most desperate feature value by the ratio
    (still needed for the lower quota) / (people left holding it) and picks
    uniformly among the remaining holders. Dead ends restart the whole build
    with a fresh derived seed.
    """
    pairs = instance.scheme.feature_value_pairs()
    feature_idx = {f: i for i, f in enumerate(instance.scheme.features)}

    for attempt in range(restart_limit):
        rng = random.Random(f"{seed}:{attempt}")
        remaining: dict[str, FeatureVector] = dict(instance.vector_of)
        selected_counts = {pair: 0 for pair in pairs}
        panel: list[str] = []
        failed = False

        def remaining_with(pair: tuple[str, str]) -> list[str]:
            f_i = feature_idx[pair[0]]
            return sorted(a for a, vec in remaining.items() if vec[f_i] == pair[1])

        while len(panel) < instance.k and not failed:
            best_pair = None
            best_ratio = -math.inf
            for pair in pairs:
                lo, hi = instance.quota(*pair)
                left = len(remaining_with(pair))
                need = lo - selected_counts[pair]
                if need > 0 and left < need:
                    failed = True
                    break
                if left == 0 or hi == 0 or selected_counts[pair] >= hi:
                    continue
                ratio = need / left
                if ratio > best_ratio:
                    best_ratio = ratio
                    best_pair = pair
            if failed or best_pair is None:
                failed = True
                break
            candidates = remaining_with(best_pair)
            choice = candidates[rng.randrange(len(candidates))]
            panel.append(choice)
            vector = remaining.pop(choice)
            for f_i, feature in enumerate(instance.scheme.features):
                pair = (feature, vector[f_i])
                selected_counts[pair] += 1
                lo, hi = instance.quota(*pair)
                if selected_counts[pair] >= hi:
                    # Quota full: everyone left holding this value is out.
                    for other in remaining_with(pair):
                        del remaining[other]
            if len(remaining) == 0 and len(panel) < instance.k:
                failed = True

        if not failed and len(panel) == instance.k:
            candidate = Panel(tuple(panel))
            if candidate.is_valid(instance):
                return candidate

    raise RestartLimitError(f"no valid panel found in {restart_limit} greedy restarts")


def approximation_ratios(
    instance: Instance,
    result: SolveResult,
    min_opt: float,
    max_opt: float,
) -> tuple[float, float]:
    """How close a result's extremes come to the optimal extremes.

    ``min_opt`` must come from a maximin solve and ``max_opt`` from a minimax
    solve on the same instance. The first ratio is NaN when the optimal
    minimum is zero.
    """
    lo, hi = result.pi.min(), result.pi.max()
    min_ratio = math.nan if min_opt <= 0.0 else lo / min_opt
    if max_opt <= 0.0:
        raise ValidationError("optimal maximum cannot be zero for a nonempty panel")
    return (min_ratio, hi / max_opt)
