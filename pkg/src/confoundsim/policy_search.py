"""Score-function policy search for factored two-decision policies.

The policy is a product of two independent softmax heads, one per
decision, each conditioned on its own covariate subset
(:class:`~confoundsim.policy.FactoredPolicyParams`).  The reward of a
joint action is the fitted model's predicted click probability, so the
objective is an expectation over contexts and both heads.

Because everything is categorical the objective and its gradient have
closed forms by enumeration (:func:`exact_objective`,
:func:`exact_gradient`); the sampled estimator
(:func:`estimate_gradient`) and the plain stochastic-ascent loop
(:func:`reinforce_optimize`) are checked against them in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import GroundTruth
from .glm import FittedModel, prediction_table
from .policy import FactoredPolicyParams
from .numerics import softmax_rows

__all__ = [
    "SearchConfig",
    "estimate_gradient",
    "exact_gradient",
    "exact_objective",
    "reinforce_optimize",
]

BASELINES = ("running-mean", "none")


@dataclass(frozen=True)
class SearchConfig:
    """Stochastic-ascent settings.

    ``baseline`` is ``"running-mean"`` (exponential moving average of the
    batch mean reward, decay :attr:`baseline_decay`, applied before each
    update so the estimator stays unbiased given the past) or ``"none"``.
    """

    learning_rate: float = 0.1
    iterations: int = 2000
    batch_size: int = 1024
    baseline: str = "running-mean"
    baseline_decay: float = 0.9
    seed: int = 0
    trace_path: str | None = None

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ValueError("baseline_decay must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def _check_compatible(model: FittedModel, params: FactoredPolicyParams, gt: GroundTruth):
    if model.feature_spec.spec != params.spec or gt.spec != params.spec:
        raise ValueError("model, params, and ground truth must share one categorical spec")


def _cell_distributions(params: FactoredPolicyParams):
    """Per-cell head distributions, (k1, k2, A) and (k1, k2, D)."""
    ctx_a, ctx_d = params.context_grids()
    pi_a = softmax_rows(params.action_logits)[ctx_a]
    pi_d = softmax_rows(params.decision_logits)[ctx_d]
    return ctx_a, ctx_d, pi_a, pi_d


def exact_objective(model: FittedModel, params: FactoredPolicyParams, gt: GroundTruth) -> float:
    """Expected model-predicted reward of the factored policy, by enumeration."""
    _check_compatible(model, params, gt)
    _, _, pi_a, pi_d = _cell_distributions(params)
    table = prediction_table(model)
    return float(np.einsum("ij,ija,ijd,ijad->", gt.covariate_weights, pi_a, pi_d, table))


def exact_gradient(model: FittedModel, params: FactoredPolicyParams, gt: GroundTruth):
    """Analytic gradient of :func:`exact_objective` in both heads' logits.

    For a softmax head the derivative in logit (c, a) is
    ``sum over contexts x in c of w(x) pi(a | c) (mbar(x, a) - V(x))``
    where ``mbar`` marginalises the reward table over the other head and
    ``V`` is the context value.  Returns ``(g_action, g_decision)`` with
    the same shapes as the logit matrices.
    """
    _check_compatible(model, params, gt)
    ctx_a, ctx_d, pi_a, pi_d = _cell_distributions(params)
    table = prediction_table(model)
    weights = gt.covariate_weights
    mbar_a = np.einsum("ijd,ijad->ija", pi_d, table)
    mbar_d = np.einsum("ija,ijad->ijd", pi_a, table)
    value = np.einsum("ija,ija->ij", pi_a, mbar_a)
    cells_a = weights[:, :, None] * pi_a * (mbar_a - value[:, :, None])
    cells_d = weights[:, :, None] * pi_d * (mbar_d - value[:, :, None])
    g_action = np.zeros_like(params.action_logits)
    g_decision = np.zeros_like(params.decision_logits)
    np.add.at(g_action, ctx_a.ravel(), cells_a.reshape(-1, pi_a.shape[-1]))
    np.add.at(g_decision, ctx_d.ravel(), cells_d.reshape(-1, pi_d.shape[-1]))
    return g_action, g_decision


def _sample_rows(p_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p_rows, axis=1)
    return np.minimum((cdf < u[:, None]).sum(axis=1), p_rows.shape[1] - 1)


def _draw_batch(table, params, gt, rng, batch_size):
    spec = params.spec
    ctx_a, ctx_d, _, _ = _cell_distributions(params)
    weight_cdf = np.cumsum(gt.covariate_weights.ravel())
    flat = np.minimum(
        np.searchsorted(weight_cdf, rng.random(batch_size), side="right"),
        spec.k1 * spec.k2 - 1,
    )
    x1, x2 = np.divmod(flat, spec.k2)
    rows_a = ctx_a[x1, x2]
    rows_d = ctx_d[x1, x2]
    pi_a = softmax_rows(params.action_logits)[rows_a]
    pi_d = softmax_rows(params.decision_logits)[rows_d]
    a = _sample_rows(pi_a, rng.random(batch_size))
    d = _sample_rows(pi_d, rng.random(batch_size))
    rewards = table[x1, x2, a, d]
    return rows_a, rows_d, a, d, rewards, pi_a, pi_d


def estimate_gradient(
    model: FittedModel,
    params: FactoredPolicyParams,
    gt: GroundTruth,
    rng: np.random.Generator,
    batch_size: int,
    baseline_value: float = 0.0,
):
    """One-batch score-function estimate of :func:`exact_gradient`.

    Contexts are drawn from the true covariate distribution, actions from
    the two heads; each sample contributes
    ``(reward - baseline_value) * (onehot - pi)`` to its context's logit
    row.  The estimate is unbiased for any ``baseline_value`` fixed before
    the batch.  Returns ``(g_action, g_decision, batch_mean_reward)``.
    """
    _check_compatible(model, params, gt)
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    table = prediction_table(model)
    rows_a, rows_d, a, d, rewards, pi_a, pi_d = _draw_batch(table, params, gt, rng, batch_size)
    advantage = rewards - baseline_value
    score_a = -pi_a
    score_a[np.arange(batch_size), a] += 1.0
    score_d = -pi_d
    score_d[np.arange(batch_size), d] += 1.0
    g_action = np.zeros_like(params.action_logits)
    g_decision = np.zeros_like(params.decision_logits)
    np.add.at(g_action, rows_a, advantage[:, None] * score_a)
    np.add.at(g_decision, rows_d, advantage[:, None] * score_d)
    g_action /= batch_size
    g_decision /= batch_size
    return g_action, g_decision, float(rewards.mean())


def reinforce_optimize(
    model: FittedModel,
    init: FactoredPolicyParams,
    config: SearchConfig,
    gt: GroundTruth,
) -> FactoredPolicyParams:
    """Plain stochastic ascent on the factored policy's logits.

    Starts from ``init`` and runs ``config.iterations`` batches.  Raises
    ``RuntimeError`` if the parameters stop being finite or if the final
    exact objective falls more than 1e-6 below the initial one.  When
    ``config.trace_path`` is set, appends one CSV row per iteration with
    the exact objective and the estimated gradient's norm.
    """
    _check_compatible(model, init, gt)
    params = init.copy()
    start = exact_objective(model, params, gt)
    rng = np.random.default_rng(config.seed)
    baseline = 0.0
    have_baseline = False
    trace = None
    if config.trace_path is not None:
        trace = open(config.trace_path, "w", encoding="utf-8")
        trace.write("iteration,exact_objective,gradient_norm\n")
    try:
        for iteration in range(config.iterations):
            use_baseline = baseline if (config.baseline == "running-mean" and have_baseline) else 0.0
            g_action, g_decision, batch_mean = estimate_gradient(
                model, params, gt, rng, config.batch_size, baseline_value=use_baseline
            )
            params = FactoredPolicyParams(
                spec=params.spec,
                action_context=params.action_context,
                decision_context=params.decision_context,
                action_logits=params.action_logits + config.learning_rate * g_action,
                decision_logits=params.decision_logits + config.learning_rate * g_decision,
            )
            if not (np.all(np.isfinite(params.action_logits)) and np.all(np.isfinite(params.decision_logits))):
                raise RuntimeError("policy search diverged: non-finite logits")
            if config.baseline == "running-mean":
                if have_baseline:
                    baseline = config.baseline_decay * baseline + (1.0 - config.baseline_decay) * batch_mean
                else:
                    baseline = batch_mean
                    have_baseline = True
            if trace is not None:
                norm = float(np.sqrt((g_action ** 2).sum() + (g_decision ** 2).sum()))
                objective = exact_objective(model, params, gt)
                trace.write(f"{iteration},{objective!r},{norm!r}\n")
    finally:
        if trace is not None:
            trace.close()
    final = exact_objective(model, params, gt)
    if not np.isfinite(final) or final < start - 1e-6:
        raise RuntimeError(
            f"policy search failed to hold its ground: objective {start:.6f} -> {final:.6f}"
        )
    return params
