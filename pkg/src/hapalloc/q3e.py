"""Lexicographic QoS-then-energy-efficiency power allocation under zero forcing.

Stage 1 maximizes the number of QoS-satisfied users: per-user minimum RF
costs ||p_min,k w_k||^2 are additive, so the cheapest-first prefix that fits
the budget is an optimal satisfied set.  Stage 2 maximizes energy efficiency
on the resulting feasible face: over all coefficients when every user fits
(full satisfaction), or over the leftover users and leftover budget when not
(satisfied users stay pinned at their minimum coefficients and their spend
still counts in the communication power).

The numeric backend is projected gradient ascent on the exact EE objective
using the capped-simplex projector below; the barrier-augmented losses are
used only by the neural backend (see ``neuro``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .beamforming import (
    RateModel,
    ZfBeamformer,
    min_power_coefficients,
    surrogate_rates,
    zf_beamformer,
)
from .channel import Scenario
from .config import PowerLedger, static_comm_power


@dataclass(frozen=True)
class BarrierConfig:
    """Barrier weight and numeric-solver halting parameters."""

    lambda_: float = 1e-2
    epsilon: float = 1e-6  # slack floor inside the log terms
    max_iters: int = 5000
    step_tolerance: float = 1e-9  # relative EE improvement threshold

    def __post_init__(self):
        if self.lambda_ < 0 or self.epsilon <= 0:
            raise ValueError("barrier weight must be >= 0 and epsilon > 0")


@dataclass(frozen=True)
class FeasibilityPartition:
    """Greedy satisfiable-user prefix and the leftover budget."""

    satisfied_set: tuple[int, ...]  # prefix of order_g, greedy order
    order_g: tuple[int, ...]  # all users, ascending min-cost order
    residual_budget: float  # W left after pinning the satisfied set
    min_cost_per_user: np.ndarray  # ||p_min,k w_k||^2 per user, W
    full_feasible: bool
    p_min: np.ndarray  # per-user minimum coefficients
    p_tot: float  # the RF budget the partition was built for


@dataclass(frozen=True)
class Q3eSolution:
    """Allocated coefficients with their rates, EE, and solver diagnostics."""

    p: np.ndarray
    q_set: tuple[int, ...]
    rates: np.ndarray  # bps, all users
    ee: float  # bps/W
    p_com: float  # W
    rf_spent: float  # W
    solver_tag: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PowerProblem:
    """One EE-maximization instance on a fixed feasibility partition.

    ``free`` users are optimized; the rest sit pinned at their minimum
    coefficients with spend ``pinned_spend``.  The EE numerator covers
    ``objective_users`` (everyone for full satisfaction, only the free
    users otherwise), while communication power always counts all spend.
    """

    rate_model: RateModel
    w_norms_sq: np.ndarray
    p_min: np.ndarray
    budget: float  # budget available to the free users, W
    ledger: PowerLedger
    free: np.ndarray  # bool mask of optimized users
    objective_users: np.ndarray  # bool mask for the EE numerator
    lower_bound: np.ndarray  # per-user floor for the free users
    pinned_p: np.ndarray  # coefficients of non-free users (0 where free)
    full_qos: bool = True  # True: all users bounded below by p_min (barrier on each)

    @property
    def n_users(self) -> int:
        return len(self.w_norms_sq)

    @property
    def pinned_spend(self) -> float:
        c = self.w_norms_sq
        return float(np.sum(c[~self.free] * self.pinned_p[~self.free] ** 2))

    def assemble(self, p_free: np.ndarray) -> np.ndarray:
        p = self.pinned_p.copy()
        p[self.free] = p_free
        return p

    def rf_spent(self, p: np.ndarray) -> float:
        return float(np.sum(self.w_norms_sq * p * p))

    def comm_power(self, p: np.ndarray) -> float:
        return self.ledger.xi * self.rf_spent(p) + static_comm_power(self.ledger)

    def objective(self, p: np.ndarray) -> float:
        """EE restricted to the objective users, bps/W."""
        rates = surrogate_rates(p, self.rate_model)
        d = self.comm_power(p)
        if d <= 0.0:
            return 0.0
        return float(np.sum(rates[self.objective_users])) / d

    def objective_gradient(self, p: np.ndarray) -> np.ndarray:
        m = self.rate_model
        c = self.w_norms_sq
        rates = surrogate_rates(p, m)
        numer = float(np.sum(rates[self.objective_users]))
        denom = self.comm_power(p)
        d_numer = np.where(
            self.objective_users,
            2.0 * m.bw_hz * m.gammas * p / (np.log(2.0) * (m.n0_w + m.gammas * p * p)),
            0.0,
        )
        d_denom = 2.0 * self.ledger.xi * c * p
        grad = (d_numer * denom - numer * d_denom) / (denom * denom)
        grad[~self.free] = 0.0
        return grad


def feasibility_partition(p_mins, w_norms_sq, p_tot: float) -> FeasibilityPartition:
    """Greedy maximal satisfiable set under the RF budget.

    Users are ordered by ascending minimum RF cost (ties broken by index,
    so the order is deterministic); the satisfied set is the longest prefix
    whose cumulative cost fits the budget.
    """
    p_min = np.asarray(p_mins, dtype=float)
    c = np.asarray(w_norms_sq, dtype=float)
    if p_min.shape != c.shape:
        raise ValueError("p_min and beam-norm vectors must have equal length")
    if p_tot < 0:
        raise ValueError("budget must be >= 0")
    costs = c * p_min * p_min
    order = np.lexsort((np.arange(len(costs)), costs))
    cumulative = np.cumsum(costs[order])
    m = int(np.searchsorted(cumulative, p_tot, side="right"))
    prefix_cost = float(cumulative[m - 1]) if m > 0 else 0.0
    return FeasibilityPartition(
        satisfied_set=tuple(int(i) for i in order[:m]),
        order_g=tuple(int(i) for i in order),
        residual_budget=p_tot - prefix_cost,
        min_cost_per_user=costs,
        full_feasible=(m == len(costs)),
        p_min=p_min,
        p_tot=float(p_tot),
    )


def project_capped(p_raw, p_min_mask, w_norms_sq, p_tot: float) -> np.ndarray:
    """Project raw coefficients onto {p >= mask, sum c_k p_k^2 <= budget}.

    Coefficients are first clamped to the mask; if the clamped point is
    affordable it is returned unchanged, otherwise the squared coefficients
    are interpolated between the mask point and the clamped point with
    alpha = (budget - mask cost) / (clamped cost - mask cost), which meets
    the budget with equality.  The mask itself must be affordable.
    """
    p_raw = np.asarray(p_raw, dtype=float)
    m = np.asarray(p_min_mask, dtype=float)
    c = np.asarray(w_norms_sq, dtype=float)
    p_m = float(np.sum(c * m * m))
    if p_m > p_tot * (1.0 + 1e-12) + 1e-300:
        raise ValueError(f"mask cost {p_m} exceeds budget {p_tot}; mask unaffordable")
    p_hat = np.maximum(p_raw, m)
    p_0 = float(np.sum(c * p_hat * p_hat))
    if p_0 <= p_tot:
        return p_hat
    alpha = (p_tot - p_m) / (p_0 - p_m)
    alpha = min(1.0, max(0.0, alpha))
    return np.sqrt(m * m + alpha * (p_hat * p_hat - m * m))


def _project_free(problem: PowerProblem, p_free: np.ndarray) -> np.ndarray:
    return project_capped(
        p_free,
        problem.lower_bound[problem.free],
        problem.w_norms_sq[problem.free],
        problem.budget,
    )


def _ascend(problem: PowerProblem, starts: Sequence[np.ndarray], cfg: BarrierConfig):
    """Projected gradient ascent with backtracking line search, multi-start."""
    best_p = None
    best_val = -np.inf
    total_iters = 0
    for start in starts:
        p_free = _project_free(problem, np.asarray(start, dtype=float))
        p = problem.assemble(p_free)
        val = problem.objective(p)
        step = 1.0
        for _ in range(cfg.max_iters):
            total_iters += 1
            grad = problem.objective_gradient(p)[problem.free]
            gnorm = float(np.linalg.norm(grad))
            if gnorm == 0.0:
                break
            t = step / gnorm
            accepted = False
            for _ in range(50):
                cand_free = _project_free(problem, p[problem.free] + t * grad)
                cand = problem.assemble(cand_free)
                cand_val = problem.objective(cand)
                if cand_val > val:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            rel = (cand_val - val) / max(abs(val), 1e-300)
            p, val = cand, cand_val
            step = max(t * gnorm * 2.0, 1e-12)
            if rel < cfg.step_tolerance:
                break
        if val > best_val:
            best_val, best_p = val, p
    return best_p, best_val, total_iters


def _solution_from(problem: PowerProblem, p: np.ndarray, q_set, tag: str, diag: dict) -> Q3eSolution:
    rates = surrogate_rates(p, problem.rate_model)
    rf = problem.rf_spent(p)
    p_com = problem.ledger.xi * rf + static_comm_power(problem.ledger)
    ee = float(np.sum(rates)) / p_com if p_com > 0 else 0.0
    return Q3eSolution(
        p=p,
        q_set=tuple(sorted(int(i) for i in q_set)),
        rates=rates,
        ee=ee,
        p_com=p_com,
        rf_spent=rf,
        solver_tag=tag,
        diagnostics=diag,
    )


def _full_qos_problem(partition, beamformer, rate_model, ledger) -> PowerProblem:
    k = len(partition.p_min)
    free = np.ones(k, dtype=bool)
    return PowerProblem(
        rate_model=rate_model,
        w_norms_sq=np.asarray(beamformer.w_norms_sq, dtype=float),
        p_min=partition.p_min,
        budget=partition.p_tot,
        ledger=ledger,
        free=free,
        objective_users=np.ones(k, dtype=bool),
        lower_bound=partition.p_min.copy(),
        pinned_p=np.zeros(k),
        full_qos=True,
    )


def _partial_qos_problem(partition, beamformer, rate_model, ledger) -> PowerProblem:
    k = len(partition.p_min)
    free = np.ones(k, dtype=bool)
    free[list(partition.satisfied_set)] = False
    pinned = np.zeros(k)
    pinned[~free] = partition.p_min[~free]
    return PowerProblem(
        rate_model=rate_model,
        w_norms_sq=np.asarray(beamformer.w_norms_sq, dtype=float),
        p_min=partition.p_min,
        budget=partition.residual_budget,
        ledger=ledger,
        free=free,
        objective_users=free.copy(),
        lower_bound=np.zeros(k),
        pinned_p=pinned,
        full_qos=False,
    )


def _numeric_starts(problem: PowerProblem) -> list[np.ndarray]:
    c = problem.w_norms_sq[problem.free]
    floor = problem.lower_bound[problem.free]
    n = len(c)
    starts = [floor.copy()]
    if n > 0 and problem.budget > 0:
        spread = np.sqrt(problem.budget / (n * c))
        starts.append(np.maximum(spread, floor))
        # equal-headroom full spend above the floor (the qos-only layout)
        starts.append(_equal_headroom(floor, c, problem.budget))
    return starts


def _equal_headroom(p_base: np.ndarray, c: np.ndarray, budget: float) -> np.ndarray:
    """p_k = base_k + delta / sqrt(c_k) with the total cost meeting the budget."""
    base_cost = float(np.sum(c * p_base * p_base))
    if budget <= base_cost or len(c) == 0:
        return p_base.copy()
    a = float(len(c))
    b = 2.0 * float(np.sum(np.sqrt(c) * p_base))
    c0 = base_cost - budget
    delta = (-b + np.sqrt(b * b - 4.0 * a * c0)) / (2.0 * a)
    return p_base + delta / np.sqrt(c)


def solve_full_qos(
    partition: FeasibilityPartition,
    beamformer: ZfBeamformer,
    rate_model: RateModel,
    ledger: PowerLedger,
    cfg: BarrierConfig | None = None,
) -> Q3eSolution:
    """Maximize system EE with every user held at or above its QoS minimum."""
    if not partition.full_feasible:
        raise ValueError("full-satisfaction solver requires a fully feasible partition")
    cfg = cfg or BarrierConfig()
    problem = _full_qos_problem(partition, beamformer, rate_model, ledger)
    p, _, iters = _ascend(problem, _numeric_starts(problem), cfg)
    diag = {"iterations": iters, "backend": "numeric"}
    return _solution_from(problem, p, range(problem.n_users), "numeric", diag)


def solve_partial_qos(
    partition: FeasibilityPartition,
    beamformer: ZfBeamformer,
    rate_model: RateModel,
    ledger: PowerLedger,
    cfg: BarrierConfig | None = None,
) -> Q3eSolution:
    """Maximize leftover-user EE on the residual budget, satisfied users pinned.

    The EE numerator covers only the users outside the satisfied set; the
    pinned users' spend still counts in the communication power.
    """
    if partition.full_feasible:
        raise ValueError("partial-satisfaction solver requires an infeasible partition")
    cfg = cfg or BarrierConfig()
    problem = _partial_qos_problem(partition, beamformer, rate_model, ledger)
    p, _, iters = _ascend(problem, _numeric_starts(problem), cfg)
    diag = {"iterations": iters, "backend": "numeric"}
    return _solution_from(problem, p, partition.satisfied_set, "numeric", diag)


def q3e(
    scenario: Scenario,
    beamformer: ZfBeamformer,
    p_tot: float,
    ledger: PowerLedger,
    cfg=None,
    backend: str = "numeric",
) -> Q3eSolution:
    """Two-stage allocation: maximize satisfied users, then energy efficiency.

    ``backend`` selects the stage-2 optimizer: "numeric" (projected gradient
    ascent) or "mlp" (the constrained-trained network from ``neuro``; ``cfg``
    may then be a ``neuro.TrainConfig``).
    """
    model = RateModel(scenario.bw_hz, scenario.n0_w, scenario.gammas())
    p_min = min_power_coefficients(scenario.qos_rates(), model)
    partition = feasibility_partition(p_min, beamformer.w_norms_sq, p_tot)

    if backend == "numeric":
        bcfg = cfg if isinstance(cfg, BarrierConfig) else BarrierConfig()
        if partition.full_feasible:
            return solve_full_qos(partition, beamformer, model, ledger, bcfg)
        return solve_partial_qos(partition, beamformer, model, ledger, bcfg)
    if backend == "mlp":
        from . import neuro  # deferred: neuro depends on this module

        problem = (
            _full_qos_problem(partition, beamformer, model, ledger)
            if partition.full_feasible
            else _partial_qos_problem(partition, beamformer, model, ledger)
        )
        tcfg = cfg if isinstance(cfg, neuro.TrainConfig) else neuro.TrainConfig()
        net = neuro.train(problem, tcfg)
        p_free = _project_free(problem, neuro.mlp_forward(net, neuro.problem_features(problem))[problem.free])
        p = problem.assemble(p_free)
        q = range(problem.n_users) if partition.full_feasible else partition.satisfied_set
        return _solution_from(problem, p, q, "mlp", {"backend": "mlp"})
    raise ValueError(f"unknown backend {backend!r}; expected 'numeric' or 'mlp'")


def baseline_max_sum_rate(
    scenario: Scenario, beamformer: ZfBeamformer, p_tot: float, ledger: PowerLedger
) -> Q3eSolution:
    """Sum-rate maximization under the budget (water-filling), no QoS stage.

    In x_k = p_k^2 the problem is concave with one linear constraint; the
    KKT solution is x_k = max(0, 1/(nu c_k ln 2) - N_0/gamma_k) with the
    water level nu bisected until the budget is met.
    """
    model = RateModel(scenario.bw_hz, scenario.n0_w, scenario.gammas())
    c = np.asarray(beamformer.w_norms_sq, dtype=float)
    floor = model.n0_w / model.gammas

    def spend(nu):
        x = np.maximum(0.0, 1.0 / (nu * c * np.log(2.0)) - floor)
        return float(np.sum(c * x)), x

    x = np.zeros_like(c)
    if p_tot > 0:
        lo, hi = 1e-30, 1e30
        for _ in range(200):
            nu = np.sqrt(lo * hi)
            s, x = spend(nu)
            if s > p_tot:
                lo = nu
            else:
                hi = nu
        _, x = spend(np.sqrt(lo * hi))
    p = np.sqrt(x)
    rates = surrogate_rates(p, model)
    q = [k for k in range(len(p)) if rates[k] >= scenario.qos_rates()[k] * (1.0 - 1e-12)]
    rf = float(np.sum(c * x))
    p_com = ledger.xi * rf + static_comm_power(ledger)
    ee = float(np.sum(rates)) / p_com if p_com > 0 else 0.0
    return Q3eSolution(
        p=p, q_set=tuple(q), rates=rates, ee=ee, p_com=p_com, rf_spent=rf,
        solver_tag="max_sum_rate", diagnostics={},
    )


def baseline_qos_only(
    scenario: Scenario, beamformer: ZfBeamformer, p_tot: float, ledger: PowerLedger
) -> Q3eSolution:
    """Greedy QoS stage, then the residual spread as equal per-user headroom.

    Shares stage 1 with the lexicographic solver but has no EE objective:
    leftover budget is spent on the satisfied users with equal headroom
    delta/sqrt(c_k) so the budget is consumed exactly.
    """
    model = RateModel(scenario.bw_hz, scenario.n0_w, scenario.gammas())
    p_min = min_power_coefficients(scenario.qos_rates(), model)
    c = np.asarray(beamformer.w_norms_sq, dtype=float)
    partition = feasibility_partition(p_min, c, p_tot)
    q = list(partition.satisfied_set)
    p = np.zeros_like(p_min)
    if q:
        idx = np.array(q, dtype=int)
        p[idx] = _equal_headroom(p_min[idx], c[idx], p_tot)
    rates = surrogate_rates(p, model)
    rf = float(np.sum(c * p * p))
    p_com = ledger.xi * rf + static_comm_power(ledger)
    ee = float(np.sum(rates)) / p_com if p_com > 0 else 0.0
    return Q3eSolution(
        p=p, q_set=tuple(sorted(q)), rates=rates, ee=ee, p_com=p_com, rf_spent=rf,
        solver_tag="qos_only", diagnostics={},
    )


def solution_to_dict(sol: Q3eSolution) -> dict:
    """JSON-ready export of a solution."""
    return {
        "p": [float(x) for x in sol.p],
        "q_set": list(sol.q_set),
        "rates_bps": [float(r) for r in sol.rates],
        "ee_bps_per_w": sol.ee,
        "rf_spent_w": sol.rf_spent,
        "solver_tag": sol.solver_tag,
        "iterations": int(sol.diagnostics.get("iterations", 0)),
    }


def scenario_beamformer(scenario: Scenario) -> ZfBeamformer:
    """Zero-forcing beamformer for a scenario's steering vectors."""
    return zf_beamformer(scenario.steering_vectors())
