"""Ground-truth environment: exact categorical click/sale mechanisms.

The environment is a structural model over two categorical covariates and
a categorical action: ``x1 ~ p_x1``, ``x2 | x1 ~ p_x2_given_x1`` and a
Bernoulli click with probability ``sigmoid(click_logit[x1, x2, a])`` (plus
an optional decision axis, and an optional post-click sale mechanism).
Everything downstream of a policy is small enough to integrate by exact
enumeration, which is the primary evaluation route; sampling is used only
to generate logs.

:func:`confounding_gap` quantifies how far a naive covariate-blind fit on
logs produced by an x2-aware greedy policy would stray from the
interventional optimum, which is what makes an environment a useful
demonstration of confounding.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .features import CategoricalSpec
from .numerics import PROB_ATOL, sigmoid
from .policy import Policy

__all__ = [
    "ConfoundingGapReport",
    "GapEntry",
    "GroundTruth",
    "confounding_gap",
    "confounding_gap_report",
    "expected_policy_click_sale_rate",
    "expected_policy_ctr",
    "make_default_ground_truth",
    "make_separable_ground_truth",
    "marginal_click_prob",
    "oracle_policy",
    "sample_context",
    "true_click_prob",
    "true_sale_prob",
]

# Default rejection-sampling budget for make_default_ground_truth.
DEFAULT_MAX_ROUNDS = 1000
# Ground-truth logits are drawn i.i.d. uniform on this interval.
LOGIT_RANGE = (-2.0, 2.0)


@dataclass
class GroundTruth:
    """Exact data-generating mechanism.

    Attributes
    ----------
    spec : CategoricalSpec
    p_x1 : ndarray
        ``(k1,)`` marginal distribution of ``x1``.
    p_x2_given_x1 : ndarray
        ``(k1, k2)`` row-stochastic conditional of ``x2`` given ``x1``.
    click_logit : ndarray
        ``(k1, k2, n_actions)`` or ``(k1, k2, n_actions, n_decisions)``.
    sale_logit : ndarray or None
        Optional ``(k1, k2, n_actions)`` post-click sale mechanism.
    seed, min_gap, gap : metadata recorded by the default constructor so a
        serialized environment replays exactly.
    """

    spec: CategoricalSpec
    p_x1: np.ndarray
    p_x2_given_x1: np.ndarray
    click_logit: np.ndarray
    sale_logit: np.ndarray | None = None
    seed: int | None = None
    min_gap: float | None = None
    gap: float | None = None

    def __post_init__(self):
        self.p_x1 = np.asarray(self.p_x1, dtype=np.float64)
        self.p_x2_given_x1 = np.asarray(self.p_x2_given_x1, dtype=np.float64)
        self.click_logit = np.asarray(self.click_logit, dtype=np.float64)
        if self.sale_logit is not None:
            self.sale_logit = np.asarray(self.sale_logit, dtype=np.float64)
        spec = self.spec
        if self.p_x1.shape != (spec.k1,):
            raise ValueError("p_x1 must have shape (k1,)")
        if self.p_x2_given_x1.shape != (spec.k1, spec.k2):
            raise ValueError("p_x2_given_x1 must have shape (k1, k2)")
        click_shape = (spec.k1, spec.k2, spec.n_actions)
        if spec.n_decisions is not None:
            click_shape = click_shape + (spec.n_decisions,)
        if self.click_logit.shape != click_shape:
            raise ValueError(f"click_logit must have shape {click_shape}")
        if self.sale_logit is not None and self.sale_logit.shape != (spec.k1, spec.k2, spec.n_actions):
            raise ValueError("sale_logit must have shape (k1, k2, n_actions)")
        if np.any(self.p_x1 < 0) or abs(self.p_x1.sum() - 1.0) > PROB_ATOL:
            raise ValueError("p_x1 must be a probability vector")
        rows = self.p_x2_given_x1.sum(axis=1)
        if np.any(self.p_x2_given_x1 < 0) or np.any(np.abs(rows - 1.0) > PROB_ATOL):
            raise ValueError("p_x2_given_x1 rows must be probability vectors")
        for name in ("click_logit", "sale_logit"):
            t = getattr(self, name)
            if t is not None and not np.all(np.isfinite(t)):
                raise ValueError(f"{name} must be finite")

    @property
    def covariate_weights(self) -> np.ndarray:
        """Joint ``(k1, k2)`` covariate distribution ``p(x1) p(x2|x1)``."""
        return self.p_x1[:, None] * self.p_x2_given_x1

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "p_x1": self.p_x1.tolist(),
            "p_x2_given_x1": self.p_x2_given_x1.tolist(),
            "click_logit": self.click_logit.tolist(),
            "sale_logit": None if self.sale_logit is None else self.sale_logit.tolist(),
            "seed": self.seed,
            "min_gap": self.min_gap,
            "gap": self.gap,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "GroundTruth":
        sale = payload.get("sale_logit")
        return cls(
            spec=CategoricalSpec.from_dict(payload["spec"]),
            p_x1=np.asarray(payload["p_x1"], dtype=np.float64),
            p_x2_given_x1=np.asarray(payload["p_x2_given_x1"], dtype=np.float64),
            click_logit=np.asarray(payload["click_logit"], dtype=np.float64),
            sale_logit=None if sale is None else np.asarray(sale, dtype=np.float64),
            seed=payload.get("seed"),
            min_gap=payload.get("min_gap"),
            gap=payload.get("gap"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON serialization."""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GapEntry:
    """Per-x1 confounding diagnosis."""

    oracle_action: int
    confounded_action: int
    gap: float


@dataclass(frozen=True)
class ConfoundingGapReport:
    """Confounding gap per x1 state; ``gap`` is the maximum entry."""

    per_x1: tuple
    gap: float


def _click_cells(gt: GroundTruth) -> np.ndarray:
    """Click probabilities flattened to ``(k1, k2, action_cells)``."""
    sig = sigmoid(gt.click_logit)
    return sig.reshape(gt.spec.k1, gt.spec.k2, -1)


def marginal_click_prob(gt: GroundTruth) -> np.ndarray:
    """Interventional CTR ``P(c=1 | do(cell), x1)``, shape ``(k1, action_cells)``.

    Marginalises x2 with the true conditional ``p(x2 | x1)``; this is the
    backdoor-adjusted quantity a per-x1 decision should rank actions by.
    """
    return np.einsum("ij,ijc->ic", gt.p_x2_given_x1, _click_cells(gt))


def confounding_gap_report(gt: GroundTruth) -> ConfoundingGapReport:
    """How much CTR a naive x1-only refit would give up per x1 state.

    For each x1 the oracle action maximises the interventional CTR.  The
    confounded action maximises the naive conditional estimate
    ``E[c | x1, cell]`` that a covariate-blind fit converges to on logs
    produced by an x2-aware greedy policy: cells the greedy policy selects
    for some x2 inherit their own skewed x2 population (the limit of the
    epsilon-greedy logging mix as exploration shrinks), while cells the
    greedy policy never selects are reached only through uniform
    exploration and keep the unskewed ``p(x2 | x1)``.  Both actions are
    evaluated under the true ``p(x2 | x1)``; the entry's gap is the CTR
    difference, zero when the two actions coincide.
    """
    cells = _click_cells(gt)
    marginal = marginal_click_prob(gt)
    entries = []
    for i in range(gt.spec.k1):
        w = gt.p_x2_given_x1[i]
        greedy = np.argmax(cells[i], axis=1)
        naive = marginal[i].copy()
        for cell in np.unique(greedy):
            mask = greedy == cell
            denom = w[mask].sum()
            if denom > 0:
                naive[cell] = float(w[mask] @ cells[i][mask, cell] / denom)
        a_star = int(np.argmax(marginal[i]))
        a_conf = int(np.argmax(naive))
        entries.append(GapEntry(a_star, a_conf, float(marginal[i, a_star] - marginal[i, a_conf])))
    gap = max(entry.gap for entry in entries)
    return ConfoundingGapReport(per_x1=tuple(entries), gap=float(gap))


def confounding_gap(gt: GroundTruth) -> float:
    """Maximum per-x1 CTR gap; see :func:`confounding_gap_report`."""
    return confounding_gap_report(gt).gap


def make_default_ground_truth(
    spec: CategoricalSpec,
    seed: int,
    min_gap: float = 0.0,
    with_sales: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> GroundTruth:
    """Draw a random environment, rejection-sampled to a confounding gap.

    Logits are i.i.d. uniform on ``LOGIT_RANGE``; ``p_x1`` and each row of
    ``p_x2_given_x1`` are flat-Dirichlet draws.  Candidates are drawn from
    a single seeded stream until ``confounding_gap >= min_gap``, so the
    result is deterministic given ``(spec, seed, min_gap)``.

    Parameters
    ----------
    spec : CategoricalSpec
    seed : int
    min_gap : float
        Required confounding gap, in [0, 0.2].  Positive values guarantee
        the covariate-blind refit story is visible at realistic sample
        sizes instead of depending on luck.
    with_sales : bool
        Also draw a post-click sale mechanism.
    max_rounds : int
        Rejection budget; exceeding it raises ``RuntimeError``.
    """
    if not 0.0 <= min_gap <= 0.2:
        raise ValueError("min_gap must lie in [0, 0.2]")
    rng = np.random.default_rng(seed)
    click_shape = (spec.k1, spec.k2, spec.n_actions)
    if spec.n_decisions is not None:
        click_shape = click_shape + (spec.n_decisions,)
    lo, hi = LOGIT_RANGE
    for _ in range(max_rounds):
        candidate = GroundTruth(
            spec=spec,
            p_x1=rng.dirichlet(np.ones(spec.k1)),
            p_x2_given_x1=rng.dirichlet(np.ones(spec.k2), size=spec.k1),
            click_logit=rng.uniform(lo, hi, size=click_shape),
            sale_logit=rng.uniform(lo, hi, size=(spec.k1, spec.k2, spec.n_actions)) if with_sales else None,
        )
        gap = confounding_gap(candidate)
        if gap >= min_gap:
            return replace(candidate, seed=int(seed), min_gap=float(min_gap), gap=float(gap))
    raise RuntimeError(
        f"no environment reached confounding_gap >= {min_gap} within {max_rounds} rounds (seed={seed})"
    )


def make_separable_ground_truth(
    spec: CategoricalSpec,
    seed: int,
    min_sep: float = 0.0,
    with_sales: bool = True,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> GroundTruth:
    """Draw an environment whose click and sale mechanisms are separable.

    The click logit depends only on ``(x2, a)`` and the sale logit only on
    ``(x1, a)``, so sub-models that each see exactly one covariate capture
    their mechanism with nothing to marginalise: the modularised product
    policy built from them coincides with the one built from fully visible
    sub-models.

    ``min_sep`` rejection-samples until, in every context, the best
    click-times-sale product beats the runner-up by at least ``min_sep``;
    finite-sample fits then reproduce the argmaxes instead of sitting on
    ties.  Requires a spec without a decision axis.
    """
    if spec.n_decisions is not None:
        raise ValueError("separable environments are defined for single-decision specs")
    if not 0.0 <= min_sep <= 0.2:
        raise ValueError("min_sep must lie in [0, 0.2]")
    rng = np.random.default_rng(seed)
    lo, hi = LOGIT_RANGE
    for _ in range(max_rounds):
        click_by_x2 = rng.uniform(lo, hi, size=(spec.k2, spec.n_actions))
        sale_by_x1 = rng.uniform(lo, hi, size=(spec.k1, spec.n_actions))
        p_x1 = rng.dirichlet(np.ones(spec.k1))
        p_x2_given_x1 = rng.dirichlet(np.ones(spec.k2), size=spec.k1)
        candidate = GroundTruth(
            spec=spec,
            p_x1=p_x1,
            p_x2_given_x1=p_x2_given_x1,
            click_logit=np.broadcast_to(
                click_by_x2[None, :, :], (spec.k1, spec.k2, spec.n_actions)
            ).copy(),
            sale_logit=(
                np.broadcast_to(
                    sale_by_x1[:, None, :], (spec.k1, spec.k2, spec.n_actions)
                ).copy()
                if with_sales
                else None
            ),
        )
        score = sigmoid(candidate.click_logit)
        if with_sales:
            score = score * sigmoid(candidate.sale_logit)
        top2 = np.sort(score, axis=-1)[..., -2:]
        separation = float(np.min(top2[..., 1] - top2[..., 0]))
        if separation >= min_sep:
            return replace(candidate, seed=int(seed), min_gap=None, gap=None)
    raise RuntimeError(
        f"no separable environment reached product separation >= {min_sep} "
        f"within {max_rounds} rounds (seed={seed})"
    )


def sample_context(gt: GroundTruth, rng: np.random.Generator, size=None):
    """Draw ``(x1, x2)`` from the covariate mechanism."""
    x1 = rng.choice(gt.spec.k1, size=size, p=gt.p_x1)
    if size is None:
        x2 = rng.choice(gt.spec.k2, p=gt.p_x2_given_x1[x1])
        return int(x1), int(x2)
    cdf = np.cumsum(gt.p_x2_given_x1, axis=1)[x1]
    u = rng.random(size)
    x2 = np.minimum((cdf < u[:, None]).sum(axis=1), gt.spec.k2 - 1)
    return x1, x2


def true_click_prob(gt: GroundTruth, x1, x2, a, d=None):
    """Exact click probability of the mechanism (capped sigmoid of the logit)."""
    if gt.spec.n_decisions is None:
        if d is not None:
            raise ValueError("environment has no decision axis")
        return sigmoid(gt.click_logit[x1, x2, a])
    if d is None:
        raise ValueError("two-decision environment requires d")
    return sigmoid(gt.click_logit[x1, x2, a, d])


def true_sale_prob(gt: GroundTruth, x1, x2, a):
    """Exact post-click sale probability."""
    if gt.sale_logit is None:
        raise ValueError("environment has no sale mechanism")
    return sigmoid(gt.sale_logit[x1, x2, a])


def _check_policy(gt: GroundTruth, policy: Policy) -> None:
    if policy.spec != gt.spec:
        raise ValueError("policy spec does not match the environment spec")


def expected_policy_ctr(gt: GroundTruth, policy: Policy) -> float:
    """Exact CTR of a policy, by enumeration over all cells."""
    _check_policy(gt, policy)
    return float(
        np.einsum("ij,ijc,ijc->", gt.covariate_weights, policy.cell_probs(), _click_cells(gt))
    )


def expected_policy_click_sale_rate(gt: GroundTruth, policy: Policy) -> float:
    """Exact rate of click-then-sale events under a policy."""
    _check_policy(gt, policy)
    if gt.sale_logit is None:
        raise ValueError("environment has no sale mechanism")
    if gt.spec.n_decisions is not None:
        raise ValueError("click-then-sale rate is defined for single-decision environments")
    joint = sigmoid(gt.click_logit) * sigmoid(gt.sale_logit)
    return float(np.einsum("ij,ija,ija->", gt.covariate_weights, policy.probs, joint))


def oracle_policy(gt: GroundTruth, visibility) -> Policy:
    """Best deterministic policy at a given covariate visibility.

    ``visibility`` is a subset of ``("x1", "x2")``.  The oracle ranks
    action cells by exact interventional CTR conditioned on the visible
    covariates and puts all mass on the argmax (lowest index on ties).
    """
    cells = _click_cells(gt)
    spec = gt.spec
    n_cells = cells.shape[-1]
    vis = tuple(visibility)
    if vis == ("x1", "x2"):
        best = np.argmax(cells, axis=-1)
    elif vis == ("x1",):
        best = np.argmax(marginal_click_prob(gt), axis=-1)[:, None]
        best = np.broadcast_to(best, (spec.k1, spec.k2))
    elif vis == ("x2",):
        w = gt.covariate_weights
        p_x1_given_x2 = w / w.sum(axis=0, keepdims=True)
        score = np.einsum("ij,ijc->jc", p_x1_given_x2, cells)
        best = np.broadcast_to(np.argmax(score, axis=-1)[None, :], (spec.k1, spec.k2))
    elif vis == ():
        score = np.einsum("ij,ijc->c", gt.covariate_weights, cells)
        best = np.full((spec.k1, spec.k2), np.argmax(score))
    else:
        raise ValueError(f"visibility must be a canonical subset of ('x1', 'x2'), got {vis!r}")
    probs = np.zeros((spec.k1, spec.k2, n_cells))
    i, j = np.meshgrid(np.arange(spec.k1), np.arange(spec.k2), indexing="ij")
    probs[i, j, best] = 1.0
    if spec.n_decisions is not None:
        probs = probs.reshape(spec.k1, spec.k2, spec.n_actions, spec.n_decisions)
    return Policy(spec=spec, probs=probs, visibility=vis, epsilon=None, source="oracle")
