"""End-to-end scenarios: daily retrain loops and comparison studies.

Each scenario draws a ground-truth environment, simulates interaction
logs day by day, refits models on the previous day's log, and reports
both the empirical click-through rate and the exact expected rate of
every deployed policy (by enumeration), next to the rate of the best
policy at the same covariate visibility.

``scenario_feature_engineering`` reproduces the covariate-removal story:
one day of an x2-aware policy is enough to confound the next day's
covariate-blind refit, and the dip heals once the x2-aware day leaves the
training window.  ``scenario_ab_test`` contrasts shared-log and
separate-log A/B training.  ``scenario_click_sale`` and
``scenario_two_decision`` are single-shot comparison studies of
modularised sub-models and factored policy learning.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import (
    GroundTruth,
    expected_policy_click_sale_rate,
    expected_policy_ctr,
    make_default_ground_truth,
    oracle_policy,
)
from .features import CategoricalSpec, FeatureSpec, context_count
from .glm import (
    TARGET_CLICK,
    TARGET_SALE_GIVEN_CLICK,
    FittedModel,
    fit,
    prediction_table,
)
from .logs import ARM_CODES, Log
from .numerics import sigmoid
from .policy import FactoredPolicyParams, Policy, epsilon_greedy, to_joint, uniform_policy
from .policy_search import SearchConfig, reinforce_optimize
from .streams import DayStream

__all__ = [
    "ABResult",
    "CHUNK_ROWS",
    "ClickSaleResult",
    "ComparisonEntry",
    "DayReport",
    "ScenarioConfig",
    "ScenarioResult",
    "TwoDecisionResult",
    "default_two_decision_search",
    "run_day",
    "scenario_ab_test",
    "scenario_click_sale",
    "scenario_feature_engineering",
    "scenario_two_decision",
]

# Fixed simulation chunk size.  Chunk i always covers rows
# [i * CHUNK_ROWS, (i+1) * CHUNK_ROWS) of a day and owns the matching
# counter range of the day's stream, so results never depend on how many
# chunks are processed at once.
CHUNK_ROWS = 1 << 16


@dataclass
class ScenarioConfig:
    """Shared scenario knobs (defaults follow the headline experiment)."""

    spec: CategoricalSpec = CategoricalSpec(5, 5, 10)
    samples_per_day: int = 400_000
    epsilon: float = 0.05
    seed: int = 0
    min_gap: float = 0.02
    ab_start_day: int = 2
    days: int = 6
    shared_log: bool = False

    def __post_init__(self):
        if self.samples_per_day < 1:
            raise ValueError("samples_per_day must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.days < 1:
            raise ValueError("days must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class DayReport:
    """Exact and empirical summary of one simulated day.

    ``binomial_se`` is ``sqrt(p (1 - p) / n)`` at the exact expected rate
    ``p``, the scale against which the empirical rate may fluctuate.
    ``oracle_ctr`` is the exact rate of the best policy with the same
    covariate visibility as the deployed one, and ``regret`` the gap to it.
    """

    day: int
    arm: str
    samples: int
    empirical_ctr: float
    binomial_se: float
    expected_ctr: float
    oracle_ctr: float
    regret: float
    model_trained_on: tuple | None
    features_used: tuple

    def to_dict(self) -> dict:
        payload = dict(self.__dict__)
        payload["model_trained_on"] = None if self.model_trained_on is None else list(self.model_trained_on)
        payload["features_used"] = list(self.features_used)
        return payload


@dataclass(frozen=True)
class ComparisonEntry:
    """One policy variant of a comparison study.

    ``value`` is the exact expected reward under the true mechanism;
    ``model_value`` (when meaningful) is the same integral taken against
    the fitted model the variant was derived from.
    """

    variant: str
    value: float
    model_value: float | None = None
    detail: str = ""


@dataclass
class ScenarioResult:
    gt: GroundTruth
    reports: list
    log: Log


@dataclass
class ABResult:
    gt: GroundTruth
    shared_log: bool
    common_reports: list
    arm_reports: dict
    log: Log

    @property
    def reports(self) -> list:
        ordered = list(self.common_reports)
        for day_pair in zip(self.arm_reports["A"], self.arm_reports["B"]):
            ordered.extend(day_pair)
        return ordered


@dataclass
class ClickSaleResult:
    gt: GroundTruth
    x_prime: tuple
    x_dprime: tuple
    log_report: DayReport
    entries: list
    log: Log

    def value(self, variant: str) -> float:
        return next(e.value for e in self.entries if e.variant == variant)


@dataclass
class TwoDecisionResult:
    gt: GroundTruth
    x_prime: tuple
    x_dprime: tuple
    log_report: DayReport
    entries: list
    final_params: FactoredPolicyParams
    log: Log

    def value(self, variant: str) -> float:
        return next(e.value for e in self.entries if e.variant == variant)

    def model_value(self, variant: str) -> float:
        return next(e.model_value for e in self.entries if e.variant == variant)


def _simulate_chunk(gt: GroundTruth, policy: Policy, u: np.ndarray):
    """Vectorised inverse-CDF simulation of one chunk of interactions."""
    spec = gt.spec
    cdf1 = np.cumsum(gt.p_x1)
    x1 = np.minimum(np.searchsorted(cdf1, u[:, 0], side="right"), spec.k1 - 1)
    cdf2 = np.cumsum(gt.p_x2_given_x1, axis=1)[x1]
    x2 = np.minimum((cdf2 < u[:, 1][:, None]).sum(axis=1), spec.k2 - 1)
    cell_probs = policy.cell_probs()[x1, x2]
    cdfa = np.cumsum(cell_probs, axis=1)
    cell = np.minimum((cdfa < u[:, 2][:, None]).sum(axis=1), cell_probs.shape[1] - 1)
    propensity = cell_probs[np.arange(len(cell)), cell]
    if spec.n_decisions is None:
        a, d = cell, None
        p_click = sigmoid(gt.click_logit[x1, x2, a])
    else:
        a, d = np.divmod(cell, spec.n_decisions)
        p_click = sigmoid(gt.click_logit[x1, x2, a, d])
    c = (u[:, 3] < p_click).astype(np.int8)
    s = None
    if gt.sale_logit is not None:
        p_sale = sigmoid(gt.sale_logit[x1, x2, a])
        s = np.where(c == 1, (u[:, 4] < p_sale).astype(np.int8), np.int8(-1))
    return x1, x2, a, d, propensity, c, s


def run_day(
    gt: GroundTruth,
    policy: Policy,
    n: int,
    day: int,
    stream: DayStream,
    model_trained_on=None,
    arm: str | None = None,
    workers: int = 1,
):
    """Simulate one day of traffic under a fixed policy.

    The day is generated in fixed-size chunks (:data:`CHUNK_ROWS`), each
    drawing its own counter range of ``stream``, so the log is identical
    whatever ``workers`` is and however the chunks are scheduled.

    Returns
    -------
    (Log, DayReport)
    """
    if n < 1:
        raise ValueError("n must be positive")
    starts = list(range(0, n, CHUNK_ROWS))

    def one(start):
        count = min(CHUNK_ROWS, n - start)
        return _simulate_chunk(gt, policy, stream.uniforms(start, count))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, starts))
    else:
        chunks = [one(start) for start in starts]
    x1 = np.concatenate([ch[0] for ch in chunks]).astype(np.int32)
    x2 = np.concatenate([ch[1] for ch in chunks]).astype(np.int32)
    a = np.concatenate([ch[2] for ch in chunks]).astype(np.int32)
    d = None
    if gt.spec.n_decisions is not None:
        d = np.concatenate([ch[3] for ch in chunks]).astype(np.int32)
    propensity = np.concatenate([ch[4] for ch in chunks])
    c = np.concatenate([ch[5] for ch in chunks])
    s = None
    if gt.sale_logit is not None:
        s = np.concatenate([ch[6] for ch in chunks])
    arm_col = None
    if arm is not None:
        arm_col = np.full(n, ARM_CODES[arm], dtype=np.int8)
    log = Log(
        day=np.full(n, day, dtype=np.int32),
        x1=x1,
        x2=x2,
        a=a,
        propensity=propensity,
        c=c,
        d=d,
        s=s,
        arm=arm_col,
    )
    expected = expected_policy_ctr(gt, policy)
    oracle = expected_policy_ctr(gt, oracle_policy(gt, policy.visibility))
    report = DayReport(
        day=int(day),
        arm=arm or "",
        samples=int(n),
        empirical_ctr=float(log.c.mean()),
        binomial_se=float(np.sqrt(expected * (1.0 - expected) / n)),
        expected_ctr=expected,
        oracle_ctr=oracle,
        regret=oracle - expected,
        model_trained_on=model_trained_on,
        features_used=policy.visibility,
    )
    return log, report


def _daily_model(log: Log, features, cfg: ScenarioConfig) -> FittedModel:
    return fit(log, FeatureSpec(features, ("a",), cfg.spec), target=TARGET_CLICK)


def scenario_feature_engineering(cfg: ScenarioConfig, day2_features=("x1", "x2")) -> ScenarioResult:
    """Daily retrain loop in which only day 2 deploys an x2-aware model.

    Day 0 explores uniformly.  From day 1 on, each day deploys an
    epsilon-greedy policy on a model fit to the previous day's log; the
    model sees only x1 except on day 2, which sees ``day2_features``.
    Day 3's covariate-blind refit therefore trains on confounded traffic;
    by day 4 the training window is clean again.
    """
    gt = make_default_ground_truth(cfg.spec, cfg.seed, cfg.min_gap)
    logs: list[Log] = []
    reports: list[DayReport] = []
    policy = uniform_policy(cfg.spec)
    trained_on = None
    for day in range(cfg.days):
        if day >= 1:
            features = tuple(day2_features) if day == 2 else ("x1",)
            model = _daily_model(logs[-1], features, cfg)
            policy = epsilon_greedy(model, cfg.epsilon, cfg.spec)
            trained_on = model.training_day_range
        log, report = run_day(
            gt, policy, cfg.samples_per_day, day, DayStream(cfg.seed, day, 0),
            model_trained_on=trained_on,
        )
        logs.append(log)
        reports.append(report)
    return ScenarioResult(gt=gt, reports=reports, log=Log.concat(logs))


def scenario_ab_test(
    cfg: ScenarioConfig,
    shared_log: bool | None = None,
    arm_b_features=("x1", "x2"),
) -> ABResult:
    """A/B test in which arm A fits x1-only models and arm B x2-aware ones.

    Traffic splits 50/50 from ``cfg.ab_start_day``.  Under a shared log
    both arms train on the union of the previous day's arms, so arm A
    keeps retraining on arm B's x2-aware traffic; under separate logs each
    arm trains only on its own previous day.
    """
    shared = cfg.shared_log if shared_log is None else bool(shared_log)
    if not 1 <= cfg.ab_start_day < cfg.days:
        raise ValueError("ab_start_day must lie in [1, days)")
    gt = make_default_ground_truth(cfg.spec, cfg.seed, cfg.min_gap)
    all_logs: list[Log] = []
    common_reports: list[DayReport] = []
    policy = uniform_policy(cfg.spec)
    trained_on = None
    for day in range(cfg.ab_start_day):
        if day >= 1:
            model = _daily_model(all_logs[-1], ("x1",), cfg)
            policy = epsilon_greedy(model, cfg.epsilon, cfg.spec)
            trained_on = model.training_day_range
        log, report = run_day(
            gt, policy, cfg.samples_per_day, day, DayStream(cfg.seed, day, 0),
            model_trained_on=trained_on, arm="",
        )
        all_logs.append(log)
        common_reports.append(report)
    arm_reports: dict[str, list[DayReport]] = {"A": [], "B": []}
    train_a = train_b = all_logs[-1]
    n_a = cfg.samples_per_day // 2
    n_b = cfg.samples_per_day - n_a
    for day in range(cfg.ab_start_day, cfg.days):
        model_a = _daily_model(train_a, ("x1",), cfg)
        model_b = _daily_model(train_b, tuple(arm_b_features), cfg)
        policy_a = epsilon_greedy(model_a, cfg.epsilon, cfg.spec)
        policy_b = epsilon_greedy(model_b, cfg.epsilon, cfg.spec)
        log_a, report_a = run_day(
            gt, policy_a, n_a, day, DayStream(cfg.seed, day, 1),
            model_trained_on=model_a.training_day_range, arm="A",
        )
        log_b, report_b = run_day(
            gt, policy_b, n_b, day, DayStream(cfg.seed, day, 2),
            model_trained_on=model_b.training_day_range, arm="B",
        )
        arm_reports["A"].append(report_a)
        arm_reports["B"].append(report_b)
        all_logs.extend([log_a, log_b])
        if shared:
            train_a = train_b = Log.concat([log_a, log_b])
        else:
            train_a, train_b = log_a, log_b
    return ABResult(
        gt=gt,
        shared_log=shared,
        common_reports=common_reports,
        arm_reports=arm_reports,
        log=Log.concat(all_logs),
    )


def _argmax_policy(spec: CategoricalSpec, score: np.ndarray, visibility, source: str) -> Policy:
    """Deterministic policy putting all mass on each context's best cell."""
    flat = score.reshape(spec.k1, spec.k2, -1)
    best = np.argmax(flat, axis=-1)
    probs = np.zeros_like(flat)
    i, j = np.meshgrid(np.arange(spec.k1), np.arange(spec.k2), indexing="ij")
    probs[i, j, best] = 1.0
    if spec.n_decisions is not None:
        probs = probs.reshape(spec.k1, spec.k2, spec.n_actions, spec.n_decisions)
    return Policy(spec=spec, probs=probs, visibility=visibility, epsilon=None, source=source)


def _union_visibility(*subsets) -> tuple:
    names = set()
    for subset in subsets:
        names.update(subset)
    return tuple(sorted(names, key=("x1", "x2").index))


def scenario_click_sale(
    cfg: ScenarioConfig,
    x_prime=("x1",),
    x_dprime=("x2",),
    gt: GroundTruth | None = None,
) -> ClickSaleResult:
    """Modularised click/sale sub-models with mismatched covariate views.

    One uniform exploration day is logged; a sale-given-click model is fit
    on ``x_prime`` and a click model on ``x_dprime``.  The deployed policy
    maximises their product per context.  The study compares its exact
    click-then-sale rate against the same construction given both
    covariates, and against the true-mechanism optimum.

    ``gt`` overrides the default environment draw, e.g. to study a
    separable mechanism; it must carry a sale mechanism.
    """
    if gt is None:
        gt = make_default_ground_truth(cfg.spec, cfg.seed, cfg.min_gap, with_sales=True)
    elif gt.spec != cfg.spec:
        raise ValueError("gt.spec must match cfg.spec")
    if gt.sale_logit is None:
        raise ValueError("click/sale study needs an environment with a sale mechanism")
    log, log_report = run_day(
        gt, uniform_policy(cfg.spec), cfg.samples_per_day, 0, DayStream(cfg.seed, 0, 0)
    )

    def product_policy(sale_feats, click_feats, source):
        sale_model = fit(log, FeatureSpec(sale_feats, ("a",), cfg.spec), target=TARGET_SALE_GIVEN_CLICK)
        click_model = fit(log, FeatureSpec(click_feats, ("a",), cfg.spec), target=TARGET_CLICK)
        score = prediction_table(sale_model) * prediction_table(click_model)
        return _argmax_policy(cfg.spec, score, _union_visibility(sale_feats, click_feats), source)

    mismatched = product_policy(x_prime, x_dprime, "product(mismatched)")
    full = product_policy(("x1", "x2"), ("x1", "x2"), "product(full)")
    oracle_score = sigmoid(gt.sale_logit) * sigmoid(gt.click_logit)
    oracle = _argmax_policy(cfg.spec, oracle_score, ("x1", "x2"), "product(oracle)")
    entries = [
        ComparisonEntry(
            variant="mismatched",
            value=expected_policy_click_sale_rate(gt, mismatched),
            detail=f"sale:{'+'.join(x_prime) or 'none'}|click:{'+'.join(x_dprime) or 'none'}",
        ),
        ComparisonEntry(
            variant="full",
            value=expected_policy_click_sale_rate(gt, full),
            detail="sale:x1+x2|click:x1+x2",
        ),
        ComparisonEntry(
            variant="oracle",
            value=expected_policy_click_sale_rate(gt, oracle),
            detail="true mechanism",
        ),
    ]
    return ClickSaleResult(
        gt=gt,
        x_prime=tuple(x_prime),
        x_dprime=tuple(x_dprime),
        log_report=log_report,
        entries=entries,
        log=log,
    )


def default_two_decision_search(seed: int, trace_path: str | None = None) -> SearchConfig:
    """Search settings the two-decision study uses when none are given.

    The library default step size (0.1) leaves the softmax heads too
    diffuse to overtake a deterministic product policy within the default
    iteration budget; the study runs the search hot enough to converge.
    """
    return SearchConfig(learning_rate=0.5, seed=seed, trace_path=trace_path)


def scenario_two_decision(
    cfg: ScenarioConfig,
    x_prime=("x1",),
    x_dprime=("x2",),
    search: SearchConfig | None = None,
    gt: GroundTruth | None = None,
) -> TwoDecisionResult:
    """Two coupled decisions: joint model vs. independent vs. learned factored.

    Requires ``cfg.spec.n_decisions``.  On one uniform exploration day the
    study fits (i) a joint model over both decisions, deployed by joint
    argmax; (ii) two independent sub-models, each seeing its own covariate
    subset and ignoring the other decision, deployed as a product of
    per-factor argmaxes; (iii) a factored softmax policy initialised at the
    independent fits and optimised against the joint model's predicted
    reward by the score-function estimator.  All variants are evaluated by
    exact enumeration, both under the true mechanism (``value``) and under
    the joint model (``model_value``).

    ``gt`` overrides the default environment draw, e.g. to study a
    mechanism additively separable in the two decisions.
    """
    spec = cfg.spec
    if spec.n_decisions is None:
        raise ValueError("two-decision scenario requires a spec with n_decisions")
    if gt is None:
        gt = make_default_ground_truth(spec, cfg.seed, cfg.min_gap)
    elif gt.spec != spec:
        raise ValueError("gt.spec must match cfg.spec")
    log, log_report = run_day(
        gt, uniform_policy(spec), cfg.samples_per_day, 0, DayStream(cfg.seed, 0, 0)
    )
    joint_model = fit(log, FeatureSpec(("x1", "x2"), ("a", "d"), spec), target=TARGET_CLICK)
    joint_pol = epsilon_greedy(joint_model, 0.0, spec)

    action_model = fit(log, FeatureSpec(x_prime, ("a",), spec), target=TARGET_CLICK)
    decision_model = fit(log, FeatureSpec(x_dprime, ("d",), spec), target=TARGET_CLICK)
    table_a = prediction_table(action_model)[:, :, :, 0]
    table_d = prediction_table(decision_model)[:, :, 0, :]
    best_a = np.argmax(table_a, axis=-1)
    best_d = np.argmax(table_d, axis=-1)
    probs = np.zeros((spec.k1, spec.k2, spec.n_actions, spec.n_decisions))
    i, j = np.meshgrid(np.arange(spec.k1), np.arange(spec.k2), indexing="ij")
    probs[i, j, best_a, best_d] = 1.0
    independent_pol = Policy(
        spec=spec,
        probs=probs,
        visibility=_union_visibility(x_prime, x_dprime),
        source="independent_factored",
    )

    init = FactoredPolicyParams(
        spec=spec,
        action_context=tuple(x_prime),
        decision_context=tuple(x_dprime),
        action_logits=action_model.beta.reshape(context_count(x_prime, spec), spec.n_actions),
        decision_logits=decision_model.beta.reshape(context_count(x_dprime, spec), spec.n_decisions),
    )
    if search is None:
        search = default_two_decision_search(cfg.seed)
    final_params = reinforce_optimize(joint_model, init, search, gt)
    reinforce_pol = to_joint(final_params)

    table = prediction_table(joint_model)
    weights = gt.covariate_weights

    def model_value(pol: Policy) -> float:
        return float(np.einsum("ij,ijad,ijad->", weights, pol.probs, table))

    entries = [
        ComparisonEntry("joint_argmax", expected_policy_ctr(gt, joint_pol), model_value(joint_pol), "joint model over (a, d)"),
        ComparisonEntry(
            "independent_factored",
            expected_policy_ctr(gt, independent_pol),
            model_value(independent_pol),
            f"a:{'+'.join(x_prime) or 'none'}|d:{'+'.join(x_dprime) or 'none'}",
        ),
        ComparisonEntry(
            "reinforce_factored",
            expected_policy_ctr(gt, reinforce_pol),
            model_value(reinforce_pol),
            "optimised against the joint model",
        ),
    ]
    return TwoDecisionResult(
        gt=gt,
        x_prime=tuple(x_prime),
        x_dprime=tuple(x_dprime),
        log_report=log_report,
        entries=entries,
        final_params=final_params,
        log=log,
    )
