"""Stochastic policies over actions, conditioned on categorical contexts.

A :class:`Policy` is a full conditional probability table over actions (or
joint action/decision cells) per ``(x1, x2)`` context, together with the
``visibility`` contract: the set of covariates the table is allowed to
depend on.  :class:`FactoredPolicyParams` holds softmax logits for a pair
of independently parameterised factors, one over actions and one over
decisions, each seeing its own covariate subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import CategoricalSpec, _canonical_subset, COVARIATE_FACTORS, context_count, context_index
from .glm import FittedModel, prediction_table
from .numerics import PROB_ATOL, softmax_rows

__all__ = [
    "FactoredPolicyParams",
    "Policy",
    "epsilon_greedy",
    "sample_action",
    "to_joint",
    "uniform_policy",
]


@dataclass
class Policy:
    """Conditional action distribution per context.

    Attributes
    ----------
    spec : CategoricalSpec
    probs : ndarray
        ``(k1, k2, n_actions)`` or ``(k1, k2, n_actions, n_decisions)``;
        each context's distribution sums to one.
    visibility : tuple
        Covariates the table may depend on; the table must be constant
        along every covariate not listed.
    epsilon : float or None
        Exploration rate for epsilon-greedy policies, else ``None``.
    source : str or None
        Free-form provenance note (e.g. which model the policy greedifies).
    """

    spec: CategoricalSpec
    probs: np.ndarray
    visibility: tuple
    epsilon: float | None = None
    source: str | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        expected = (self.spec.k1, self.spec.k2, self.spec.n_actions)
        if self.spec.n_decisions is not None:
            expected = expected + (self.spec.n_decisions,)
        if self.probs.shape != expected:
            raise ValueError(f"probs shape {self.probs.shape} does not match spec {expected}")
        if np.any(self.probs < 0):
            raise ValueError("action probabilities must be nonnegative")
        sums = self.probs.reshape(self.spec.k1, self.spec.k2, -1).sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > PROB_ATOL):
            raise ValueError("per-context action probabilities must sum to one")
        vis = _canonical_subset(self.visibility, COVARIATE_FACTORS, "covariate")
        object.__setattr__(self, "visibility", vis)
        if "x2" not in vis and not np.allclose(
            self.probs, self.probs[:, :1, ...], rtol=0.0, atol=PROB_ATOL
        ):
            raise ValueError("policy blind to x2 must not vary with x2")
        if "x1" not in vis and not np.allclose(
            self.probs, self.probs[:1, :, ...], rtol=0.0, atol=PROB_ATOL
        ):
            raise ValueError("policy blind to x1 must not vary with x1")

    @property
    def joint(self) -> bool:
        """True when the policy scores joint action/decision cells."""
        return self.probs.ndim == 4

    def cell_probs(self) -> np.ndarray:
        """Probabilities flattened to ``(k1, k2, action_cells)``."""
        return self.probs.reshape(self.spec.k1, self.spec.k2, -1)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "probs": self.probs.tolist(),
            "visibility": list(self.visibility),
            "epsilon": self.epsilon,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Policy":
        return cls(
            spec=CategoricalSpec.from_dict(payload["spec"]),
            probs=np.asarray(payload["probs"], dtype=np.float64),
            visibility=tuple(payload["visibility"]),
            epsilon=payload.get("epsilon"),
            source=payload.get("source"),
        )


def uniform_policy(spec: CategoricalSpec) -> Policy:
    """Uniform exploration over all action cells; sees no covariates."""
    shape = (spec.k1, spec.k2, spec.n_actions)
    if spec.n_decisions is not None:
        shape = shape + (spec.n_decisions,)
    cells = spec.action_cells
    return Policy(
        spec=spec,
        probs=np.full(shape, 1.0 / cells),
        visibility=(),
        epsilon=None,
        source="uniform",
    )


def greedy_cells(model: FittedModel) -> np.ndarray:
    """Per-context argmax action cell of a model, lowest index on ties."""
    table = prediction_table(model)
    spec = model.feature_spec.spec
    return np.argmax(table.reshape(spec.k1, spec.k2, -1), axis=-1)


def epsilon_greedy(model: FittedModel, epsilon: float, spec: CategoricalSpec) -> Policy:
    """Epsilon-greedy policy on a fitted model's predictions.

    The argmax cell (lowest index on ties) receives mass
    ``1 - epsilon + epsilon / cells``; every other cell ``epsilon / cells``.
    Visibility is inherited from the model's included covariates.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if spec != model.feature_spec.spec:
        raise ValueError("policy spec does not match the model's spec")
    cells = spec.action_cells
    best = greedy_cells(model)
    probs = np.full((spec.k1, spec.k2, cells), epsilon / cells)
    i, j = np.meshgrid(np.arange(spec.k1), np.arange(spec.k2), indexing="ij")
    probs[i, j, best] += 1.0 - epsilon
    if spec.n_decisions is not None:
        probs = probs.reshape(spec.k1, spec.k2, spec.n_actions, spec.n_decisions)
    return Policy(
        spec=spec,
        probs=probs,
        visibility=model.feature_spec.included,
        epsilon=epsilon,
        source=f"epsilon_greedy({model.target})",
    )


def sample_action(policy: Policy, x1: int, x2: int, rng: np.random.Generator, size=None):
    """Draw actions and their propensities for one context.

    Returns ``(a, propensity)`` or, for joint policies, ``(a, d, propensity)``.
    With ``size`` given, the components are arrays.
    """
    flat = policy.cell_probs()[x1, x2]
    cells = flat.shape[0]
    idx = rng.choice(cells, size=size, p=flat)
    prop = flat[idx]
    if size is None:
        idx, prop = int(idx), float(prop)
    if policy.joint:
        a, d = np.divmod(idx, policy.spec.n_decisions)
        if size is None:
            return int(a), int(d), prop
        return a, d, prop
    return idx, prop


@dataclass
class FactoredPolicyParams:
    """Softmax logits of a factored policy ``pi(a|ctx') * pi(d|ctx'')``.

    ``action_logits`` has one row per context of ``action_context`` (a
    covariate subset) and one column per action; ``decision_logits``
    likewise for the decision factor.
    """

    spec: CategoricalSpec
    action_context: tuple
    decision_context: tuple
    action_logits: np.ndarray
    decision_logits: np.ndarray

    def __post_init__(self):
        if self.spec.n_decisions is None:
            raise ValueError("factored policies require a spec with n_decisions")
        ctx_a = _canonical_subset(self.action_context, COVARIATE_FACTORS, "covariate")
        ctx_d = _canonical_subset(self.decision_context, COVARIATE_FACTORS, "covariate")
        object.__setattr__(self, "action_context", ctx_a)
        object.__setattr__(self, "decision_context", ctx_d)
        self.action_logits = np.asarray(self.action_logits, dtype=np.float64)
        self.decision_logits = np.asarray(self.decision_logits, dtype=np.float64)
        shape_a = (context_count(ctx_a, self.spec), self.spec.n_actions)
        shape_d = (context_count(ctx_d, self.spec), self.spec.n_decisions)
        if self.action_logits.shape != shape_a:
            raise ValueError(f"action_logits must have shape {shape_a}")
        if self.decision_logits.shape != shape_d:
            raise ValueError(f"decision_logits must have shape {shape_d}")
        if not (np.all(np.isfinite(self.action_logits)) and np.all(np.isfinite(self.decision_logits))):
            raise ValueError("factored policy logits must be finite")

    def copy(self) -> "FactoredPolicyParams":
        return FactoredPolicyParams(
            spec=self.spec,
            action_context=self.action_context,
            decision_context=self.decision_context,
            action_logits=self.action_logits.copy(),
            decision_logits=self.decision_logits.copy(),
        )

    def context_grids(self):
        """Context row index per ``(x1, x2)`` for both factors."""
        i, j = np.meshgrid(np.arange(self.spec.k1), np.arange(self.spec.k2), indexing="ij")
        ga = context_index(self.action_context, self.spec, i, j)
        gd = context_index(self.decision_context, self.spec, i, j)
        return np.asarray(ga), np.asarray(gd)


def to_joint(params: FactoredPolicyParams) -> Policy:
    """Expand factored softmax logits into a full joint policy table."""
    pa = softmax_rows(params.action_logits)
    pd = softmax_rows(params.decision_logits)
    ga, gd = params.context_grids()
    probs = pa[ga][:, :, :, None] * pd[gd][:, :, None, :]
    visibility = tuple(sorted(set(params.action_context) | set(params.decision_context),
                              key=COVARIATE_FACTORS.index))
    return Policy(
        spec=params.spec,
        probs=probs,
        visibility=visibility,
        epsilon=None,
        source="factored_softmax",
    )
