"""Feed-forward network trained per allocation instance, with hand-rolled backprop.

The network maps the instance's sufficient statistics (normalized channel
powers, QoS spectral efficiencies, beam costs, and the budget scale) to raw
power coefficients.  Every forward pass is pushed through the capped-simplex
projector before the loss is evaluated, so all iterates are feasible; the
loss is the negative EE objective plus log-barrier terms on the constraint
slacks.  Optimization is Adam with early stopping on the true (barrier-free)
EE of the projected output, and the best checkpoint is returned.

Gradients flow through the projector's smooth scaling branch; the clamp
max(p, m) passes no gradient on the clamped side (subgradient convention).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .q3e import BarrierConfig, PowerProblem, project_capped

DEFAULT_HIDDEN = (64, 64, 32, 32)


class TrainingError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


@dataclass
class TrainingLog:
    """Where training stopped, where the best checkpoint sat, and the worst
    budget overshoot observed across all projected iterates."""

    best_epoch: int = 0
    stopped_epoch: int = 0
    best_ee: float = -np.inf
    max_budget_overshoot: float = 0.0


@dataclass
class MlpNetwork:
    """Fully connected stack: ReLU on every layer except the last."""

    layer_widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    log: TrainingLog | None = None

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 2000
    patience: int = 50
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    anneal_every: int = 200  # halve the barrier weight this often
    project_scaling: bool = True  # False: clamp only, no budget rescale (ablation)
    use_soft_loss: bool = True  # False: drop the barrier terms (ablation)

    def __post_init__(self):
        if not (0 < self.patience < self.max_epochs):
            raise ValueError("require 0 < patience < max_epochs")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")


def init_network(layer_widths, seed: int = 0) -> MlpNetwork:
    """Symmetric uniform fan-in initialization, seeded for determinism."""
    widths = tuple(int(w) for w in layer_widths)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for w_in, w_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / math.sqrt(w_in)
        weights.append(rng.uniform(-bound, bound, size=(w_in, w_out)))
        biases.append(rng.uniform(-bound, bound, size=w_out))
    return MlpNetwork(layer_widths=widths, weights=weights, biases=biases)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _forward_trace(net: MlpNetwork, x: np.ndarray):
    """Forward pass returning the raw coefficients and the activation cache."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.layer_widths[0],):
        raise ValueError(
            f"feature length {x.shape} does not match input width {net.layer_widths[0]}"
        )
    pre, post = [], [x]
    h = x
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < n_layers - 1 else z
        post.append(h)
    sp = _softplus(pre[-1])
    p_tilde = sp * sp  # squared softplus keeps outputs positive with smooth gradients
    return p_tilde, (pre, post, sp)


def mlp_forward(net: MlpNetwork, features) -> np.ndarray:
    """Raw nonnegative power coefficients for one instance's features."""
    p_tilde, _ = _forward_trace(net, features)
    return p_tilde


def _backward(net: MlpNetwork, cache, d_p_tilde: np.ndarray):
    """Backprop from d(loss)/d(p_tilde) to per-layer weight/bias gradients."""
    pre, post, sp = cache
    sigmoid = 1.0 / (1.0 + np.exp(-pre[-1]))
    delta = d_p_tilde * 2.0 * sp * sigmoid  # through the squared softplus
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = np.outer(post[i], delta)
        grads_b[i] = delta.copy()
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return grads_w, grads_b


def problem_features(problem: PowerProblem) -> np.ndarray:
    """Sufficient statistics of an instance: 3 per-user features plus the budget scale."""
    m = problem.rate_model
    gammas = np.asarray(m.gammas, dtype=float)
    c = np.asarray(problem.w_norms_sq, dtype=float)
    # spectral-efficiency targets implied by the minimum coefficients
    r_bits = np.log2(1.0 + gammas * problem.p_min**2 / m.n0_w)
    p_ref = float(np.sum(c * problem.p_min**2))
    scale = problem.budget / max(p_ref, 1e-30) if p_ref > 0 else 1.0
    return np.concatenate([gammas / gammas.max(), r_bits, c / c.max(), [scale]])


def network_for(problem: PowerProblem, cfg: TrainConfig) -> MlpNetwork:
    """Network sized for the instance, with its raw output started mid-slack.

    The final-layer bias is set so the initial raw coefficients sit above the
    clamp masks and strictly inside the budget (half the budget slack split
    equally in squared-coefficient space).  Both boundaries are gradient
    dead zones: the clamp passes nothing on the clamped side, and once the
    raw output overshoots the budget the scaling branch pins the projected
    point to the budget surface, where the radial gradient component
    vanishes.  Starting mid-slack keeps the interior barrier wall effective.
    """
    k = problem.n_users
    net = init_network((3 * k + 1, *cfg.hidden, k), seed=cfg.seed)
    targets = np.maximum(problem.lower_bound, 0.0).astype(float)
    free = problem.free
    n_free = max(int(np.sum(free)), 1)
    mask_cost = float(np.sum(problem.w_norms_sq[free] * problem.lower_bound[free] ** 2))
    slack = max(problem.budget - mask_cost, 0.0)
    targets[free] = np.sqrt(
        problem.lower_bound[free] ** 2 + 0.5 * slack / (n_free * problem.w_norms_sq[free])
    )
    targets = np.maximum(targets, 1e-3)
    y = np.sqrt(targets)  # want softplus(z) = sqrt(target) exactly
    net.weights[-1][:] = 0.0  # zero output head makes the start point exact
    net.biases[-1] = np.log(np.expm1(y))
    return net


# ---------------------------------------------------------------------------
# barrier losses
# ---------------------------------------------------------------------------


def _safe_log(x: float, eps: float) -> float:
    return math.log(max(x, eps))


def loss_full_qos(p, problem: PowerProblem, barrier: BarrierConfig) -> float:
    """Negative EE plus barriers on the per-user floors and the budget slack.

    Every log argument is evaluated as ln(max(x, eps)) so the loss stays
    finite when a slack touches zero.
    """
    p = np.asarray(p, dtype=float)
    eps = barrier.epsilon
    ee = problem.objective(p)
    slack = problem.budget - problem.rf_spent(p)
    logs = sum(_safe_log(pk - mk + eps, eps) for pk, mk in zip(p, problem.p_min))
    logs += _safe_log(slack + eps, eps)
    return -ee - barrier.lambda_ * logs


def loss_partial_qos(p, problem: PowerProblem, barrier: BarrierConfig) -> float:
    """Negative leftover-user EE plus a barrier on the residual-budget slack.

    Pinned users are read from the problem, not from ``p``, so the loss
    depends only on the free coordinates.
    """
    p = np.asarray(p, dtype=float)
    eps = barrier.epsilon
    q = problem.assemble(p[problem.free])
    ee = problem.objective(q)
    free_spend = float(np.sum(problem.w_norms_sq[problem.free] * q[problem.free] ** 2))
    slack = problem.budget - free_spend
    return -ee - barrier.lambda_ * _safe_log(slack + eps, eps)


def instance_loss(p, problem: PowerProblem, barrier: BarrierConfig) -> float:
    return (loss_full_qos if problem.full_qos else loss_partial_qos)(p, problem, barrier)


def _loss_gradient(p: np.ndarray, problem: PowerProblem, barrier: BarrierConfig) -> np.ndarray:
    """Analytic d(loss)/dp; zero on pinned coordinates."""
    eps = barrier.epsilon
    grad = -problem.objective_gradient(p)
    c = problem.w_norms_sq
    if barrier.lambda_ > 0:
        if problem.full_qos:
            x = p - problem.p_min + eps
            grad -= barrier.lambda_ * np.where(x > eps, 1.0 / np.maximum(x, eps), 0.0)
            slack = problem.budget - problem.rf_spent(p) + eps
            if slack > eps:
                grad += barrier.lambda_ * 2.0 * c * p / slack
        else:
            free_spend = float(np.sum(c[problem.free] * p[problem.free] ** 2))
            slack = problem.budget - free_spend + eps
            if slack > eps:
                g = barrier.lambda_ * 2.0 * c * p / slack
                g[~problem.free] = 0.0
                grad += g
    grad[~problem.free] = 0.0
    return grad


# ---------------------------------------------------------------------------
# projection with gradient
# ---------------------------------------------------------------------------


def _project_with_grad(p_tilde, mask, c, budget, scaling: bool):
    """Project and return a closure mapping d(loss)/dp back to d(loss)/dp_tilde."""
    p_tilde = np.asarray(p_tilde, dtype=float)
    mask = np.asarray(mask, dtype=float)
    c = np.asarray(c, dtype=float)
    clamped = p_tilde > mask  # gradient passes only where the clamp is inactive
    p_hat = np.maximum(p_tilde, mask)
    p_0 = float(np.sum(c * p_hat * p_hat))
    if not scaling or p_0 <= budget:
        p = p_hat

        def backward(d_p):
            return d_p * clamped

        return p, backward

    p_m = float(np.sum(c * mask * mask))
    alpha = (budget - p_m) / (p_0 - p_m)
    alpha = min(1.0, max(0.0, alpha))
    sq = mask * mask + alpha * (p_hat * p_hat - mask * mask)
    p = np.sqrt(sq)

    def backward(d_p):
        safe_p = np.where(p > 0.0, p, 1.0)
        # diagonal term: dp_k/dp_hat_k at fixed alpha
        diag = np.where(p > 0.0, alpha * p_hat / safe_p, math.sqrt(alpha))
        # coupling through alpha's dependence on every clamped coefficient
        s = float(np.sum(np.where(p > 0.0, d_p * (p_hat * p_hat - mask * mask) / (2.0 * safe_p), 0.0)))
        d_alpha = -2.0 * alpha * c * p_hat / (p_0 - p_m)
        return (d_p * diag + s * d_alpha) * clamped

    return p, backward


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _ee_scale(problem: PowerProblem) -> float:
    """Per-instance EE scale so the default barrier weight is meaningful."""
    c = problem.w_norms_sq[problem.free]
    floor = problem.lower_bound[problem.free]
    n = max(len(c), 1)
    spread = np.sqrt(problem.budget / (n * c)) if problem.budget > 0 else floor
    p_free = project_capped(np.maximum(spread, floor), floor, c, problem.budget)
    ref = problem.objective(problem.assemble(p_free))
    return ref if ref > 0 else 1.0


def train(problem: PowerProblem, cfg: TrainConfig | None = None) -> MlpNetwork:
    """Optimize the network on one instance with in-loop feasibility projection.

    Each epoch is one full-instance step: forward pass, projection, barrier
    loss, Adam update.  The barrier weight is halved every ``anneal_every``
    epochs and internally rescaled by the instance's EE magnitude so the
    configured weight is unit-free.  Early stopping tracks the barrier-free
    EE of the projected output and the best checkpoint is returned.
    """
    cfg = cfg or TrainConfig()
    net = network_for(problem, cfg)
    features = problem_features(problem)
    free = problem.free
    c_free = problem.w_norms_sq[free]
    floor_free = problem.lower_bound[free]
    ee_scale = _ee_scale(problem)

    m_w = [np.zeros_like(w) for w in net.weights]
    v_w = [np.zeros_like(w) for w in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]

    log = TrainingLog()
    best_val = -np.inf
    best_epoch = 0
    best_weights = None
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        lam = cfg.barrier.lambda_ * 0.5 ** ((epoch - 1) // cfg.anneal_every)
        if not cfg.use_soft_loss:
            lam = 0.0
        barrier = BarrierConfig(
            lambda_=lam * ee_scale,
            epsilon=cfg.barrier.epsilon,
            max_iters=cfg.barrier.max_iters,
            step_tolerance=cfg.barrier.step_tolerance,
        )

        # divergence is detected explicitly below, so transient overflow in a
        # diverging forward pass is expected rather than a numerics bug
        with np.errstate(over="ignore", invalid="ignore"):
            p_tilde, cache = _forward_trace(net, features)
            if not np.all(np.isfinite(p_tilde)):
                raise TrainingError(epoch)
            p_free, proj_backward = _project_with_grad(
                p_tilde[free], floor_free, c_free, problem.budget, cfg.project_scaling
            )
            p = problem.assemble(p_free)
            val = problem.objective(p)
            loss = instance_loss(p, problem, barrier)
        if not np.isfinite(loss):
            raise TrainingError(epoch)
        free_spend = float(np.sum(c_free * p_free**2))
        log.max_budget_overshoot = max(log.max_budget_overshoot, free_spend - problem.budget)
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_weights = (
                [w.copy() for w in net.weights],
                [b.copy() for b in net.biases],
            )

        d_p = _loss_gradient(p, problem, barrier)
        d_p_tilde = np.zeros_like(p_tilde)
        d_p_tilde[free] = proj_backward(d_p[free])
        grads_w, grads_b = _backward(net, cache, d_p_tilde)

        t = epoch
        for i in range(len(net.weights)):
            for g, param, m1, v1 in (
                (grads_w[i], net.weights[i], m_w[i], v_w[i]),
                (grads_b[i], net.biases[i], m_b[i], v_b[i]),
            ):
                m1 *= cfg.beta1
                m1 += (1.0 - cfg.beta1) * g
                v1 *= cfg.beta2
                v1 += (1.0 - cfg.beta2) * g * g
                m_hat = m1 / (1.0 - cfg.beta1**t)
                v_hat = v1 / (1.0 - cfg.beta2**t)
                param -= cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)

        if epoch - best_epoch >= cfg.patience:
            break

    if best_weights is not None:
        net.weights, net.biases = best_weights
    log.best_epoch = best_epoch
    log.stopped_epoch = epoch
    log.best_ee = best_val
    net.log = log
    return net


def trained_coefficients(net: MlpNetwork, problem: PowerProblem, scaling: bool = True) -> np.ndarray:
    """Projected coefficient vector produced by a trained network."""
    p_tilde = mlp_forward(net, problem_features(problem))
    free = problem.free
    p_free, _ = _project_with_grad(
        p_tilde[free], problem.lower_bound[free], problem.w_norms_sq[free],
        problem.budget, scaling,
    )
    return problem.assemble(p_free)


# ---------------------------------------------------------------------------
# verification helpers
# ---------------------------------------------------------------------------


def training_loss_and_grads(net: MlpNetwork, problem: PowerProblem, barrier: BarrierConfig):
    """Full-pipeline loss (forward, project, barrier loss) and its parameter grads."""
    features = problem_features(problem)
    free = problem.free
    p_tilde, cache = _forward_trace(net, features)
    p_free, proj_backward = _project_with_grad(
        p_tilde[free], problem.lower_bound[free], problem.w_norms_sq[free],
        problem.budget, True,
    )
    p = problem.assemble(p_free)
    loss = instance_loss(p, problem, barrier)
    d_p = _loss_gradient(p, problem, barrier)
    d_p_tilde = np.zeros_like(p_tilde)
    d_p_tilde[free] = proj_backward(d_p[free])
    grads_w, grads_b = _backward(net, cache, d_p_tilde)
    return loss, grads_w, grads_b


def gradient_check(net: MlpNetwork, loss_and_grads, sample: int = 100, seed: int = 0) -> float:
    """Max relative error between backprop and central finite differences.

    ``loss_and_grads(net)`` must return (loss, weight grads, bias grads).
    A random sample of parameters is perturbed by +-1e-6 (scaled by the
    parameter magnitude) and the analytic gradient compared against the
    central difference; the worst relative error over the sample is
    returned, with the analytic magnitude floored at 1e-12.
    """
    _, grads_w, grads_b = loss_and_grads(net)
    params = [(("w", i), net.weights[i]) for i in range(len(net.weights))]
    params += [(("b", i), net.biases[i]) for i in range(len(net.biases))]
    flat = [(tag, arr, j) for tag, arr in params for j in range(arr.size)]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(flat), size=min(sample, len(flat)), replace=False)

    worst = 0.0
    for idx in picks:
        (kind, layer), arr, j = flat[idx]
        orig = arr.flat[j]
        h = 1e-6 * max(1.0, abs(orig))
        arr.flat[j] = orig + h
        lp, _, _ = loss_and_grads(net)
        arr.flat[j] = orig - h
        lm, _, _ = loss_and_grads(net)
        arr.flat[j] = orig
        fd = (lp - lm) / (2.0 * h)
        analytic = (grads_w if kind == "w" else grads_b)[layer].flat[j]
        err = abs(analytic - fd) / max(abs(analytic), 1e-12)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "hapalloc-mlp/1"


def save_checkpoint(net: MlpNetwork, path: str | Path) -> None:
    """Write layer shapes plus row-major weights as versioned JSON (bit-exact)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "layer_widths": list(net.layer_widths),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> MlpNetwork:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    widths = tuple(doc["layer_widths"])
    weights = [
        np.array(flat, dtype=float).reshape(w_in, w_out)
        for flat, w_in, w_out in zip(doc["weights"], widths[:-1], widths[1:])
    ]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return MlpNetwork(layer_widths=widths, weights=weights, biases=biases)
