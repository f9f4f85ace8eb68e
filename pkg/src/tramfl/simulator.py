"""Run traveling-model training and the gossip baseline over partitioned
shards, counting model transmissions and recording the accuracy trace.

A traveling-model run owns exactly one live model: the holder trains it for
`interval` batches, the routing policy picks the next node, and the send
bumps the transmission counter by one. The gossip baseline keeps one model
per node and counts V*(V-1) directed sends per synchronous full-mesh
averaging round (halved when `count_exchanges_once` is set).
"""

from __future__ import annotations

import hashlib
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import LabelHistogram, draw_minibatch
from .errors import StateError
from .learner import ArchSpec, ModelParams, average_params, evaluate, init_he, loss_and_grad, sgd_step
from .routing import (
    RoutingConfig,
    RoutingState,
    StaticRoute,
    next_random,
    next_static,
    select_next_dynamic,
    update_ledger,
)

POLICY_KINDS = ("dynamic", "static", "random", "gossip")


@dataclass(frozen=True)
class PolicySpec:
    """Which routing policy to run; static carries its node permutation."""

    kind: str
    route: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if (self.kind == "static") != (self.route is not None):
            raise ValueError("static policies need a route; others must not carry one")
        if self.route is not None:
            object.__setattr__(self, "route", tuple(int(i) for i in self.route))

    def name(self) -> str:
        if self.kind == "static":
            return "static_" + "-".join(str(i) for i in self.route)
        return self.kind


@dataclass(frozen=True)
class RunConfig:
    """Everything one trial needs besides the shards and test set."""

    arch: ArchSpec
    learning_rate: float
    batch_size: int
    interval: int
    max_iterations: int
    eval_every: int = 1
    target_accuracy: float | None = None
    seed: int = 0
    policy: PolicySpec | None = None
    count_exchanges_once: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if min(self.batch_size, self.interval, self.max_iterations, self.eval_every) < 1:
            raise ValueError("batch_size, interval, max_iterations, eval_every must be >= 1")
        if self.target_accuracy is not None and not 0 < self.target_accuracy <= 1:
            raise ValueError(f"target_accuracy must be in (0, 1], got {self.target_accuracy}")


@dataclass(frozen=True)
class EvalRecord:
    """One test-set evaluation point along a run."""

    iteration: int
    transmissions: int
    holder: int
    test_accuracy: float
    test_loss: float


@dataclass
class TrialResult:
    """Evaluation trace plus where (if ever) the target accuracy was hit."""

    records: list[EvalRecord]
    transmissions_to_target: int | None
    final_params_digest: str
    final_params: ModelParams = field(repr=False)
    ledger: LabelHistogram | None = None


def params_digest(params: ModelParams) -> str:
    """SHA-256 over the architecture and the little-endian parameter bytes."""
    digest = hashlib.sha256()
    digest.update(np.asarray(params.arch.layer_sizes, dtype="<i8").tobytes())
    digest.update(np.ascontiguousarray(params.values, dtype="<f8").tobytes())
    return digest.hexdigest()


def _resolve_policy(cfg: RunConfig, policy: PolicySpec | None) -> PolicySpec:
    policy = policy if policy is not None else cfg.policy
    if policy is None:
        raise ValueError("no routing policy given (argument or cfg.policy)")
    return policy


def run_tram_fl(shards, test_set, cfg: RunConfig, policy: PolicySpec | None = None) -> TrialResult:
    """Train one traveling model over the shards under a routing policy.

    Deterministic in cfg.seed: the seed fixes the He initialization, the
    initial holder (uniform over nonempty shards), every minibatch draw, and
    any random routing choices. Evaluates after every `eval_every`-th
    transmission and at termination; stops early once `target_accuracy` is
    reached at an evaluation point.
    """
    policy = _resolve_policy(cfg, policy)
    if policy.kind == "gossip":
        raise ValueError("gossip runs through run_gossip, not run_tram_fl")
    shards = sorted(shards, key=lambda s: s.node_id)
    num_nodes = len(shards)
    if [s.node_id for s in shards] != list(range(num_nodes)):
        raise ValueError("shards must carry node ids 0..V-1")
    nonempty = [s.node_id for s in shards if s.total > 0]
    if not nonempty:
        raise StateError("all shards are empty")
    if policy.kind == "static" and sorted(policy.route) != list(range(num_nodes)):
        raise ValueError(f"route {policy.route} is not a permutation of 0..{num_nodes - 1}")

    rng = np.random.default_rng(cfg.seed)
    params = init_he(cfg.arch, cfg.seed)
    holder = int(nonempty[rng.integers(len(nonempty))])
    num_classes = shards[0].hist.counts.shape[0]
    state = RoutingState(LabelHistogram(np.zeros(num_classes)), round=0, holder=holder)
    route = None
    if policy.kind == "static":
        route = StaticRoute(policy.route, position=policy.route.index(holder))
    routing_cfg = RoutingConfig(batch_size=cfg.batch_size, interval=cfg.interval)

    records: list[EvalRecord] = []
    transmissions = 0
    reached: int | None = None
    for iteration in range(1, cfg.max_iterations + 1):
        batch, counts = draw_minibatch(shards[holder], cfg.batch_size, rng)
        _, grad = loss_and_grad(params, batch)
        params = sgd_step(params, grad, cfg.learning_rate)
        state = update_ledger(state, counts)
        if iteration % cfg.interval == 0:
            if policy.kind == "dynamic":
                holder = select_next_dynamic(state, shards, routing_cfg)
            elif policy.kind == "static":
                holder = next_static(route)
            else:
                holder = next_random(num_nodes, holder, rng)
            state.holder = holder
            transmissions += 1
            if transmissions % cfg.eval_every == 0:
                accuracy, loss = evaluate(params, test_set)
                records.append(EvalRecord(iteration, transmissions, holder, accuracy, loss))
                if cfg.target_accuracy is not None and accuracy >= cfg.target_accuracy:
                    reached = transmissions
                    break
    if reached is None and (not records or records[-1].transmissions < transmissions):
        accuracy, loss = evaluate(params, test_set)
        records.append(EvalRecord(cfg.max_iterations, transmissions, holder, accuracy, loss))
        if cfg.target_accuracy is not None and accuracy >= cfg.target_accuracy:
            reached = transmissions
    return TrialResult(records, reached, params_digest(params), params, ledger=state.cumulative)


def run_gossip(shards, test_set, cfg: RunConfig) -> TrialResult:
    """Synchronous full-mesh gossip baseline.

    Every node keeps its own model (all initialized from the shared seed).
    Per round each node takes one SGD step on a local minibatch, then all
    models are replaced by their unweighted average. The evaluated model is
    that round average; its holder is recorded as -1.
    """
    shards = sorted(shards, key=lambda s: s.node_id)
    num_nodes = len(shards)
    if num_nodes < 2:
        raise ValueError(f"gossip needs at least 2 nodes, got {num_nodes}")
    for shard in shards:
        if shard.total == 0:
            raise StateError(f"shard {shard.node_id} is empty")

    rng = np.random.default_rng(cfg.seed)
    shared = init_he(cfg.arch, cfg.seed)
    models = [ModelParams(shared.arch, shared.values.copy()) for _ in range(num_nodes)]
    per_round = num_nodes * (num_nodes - 1)
    if cfg.count_exchanges_once:
        per_round //= 2

    records: list[EvalRecord] = []
    transmissions = 0
    reached: int | None = None
    eval_bucket = 0
    averaged = shared
    for round_num in range(1, cfg.max_iterations + 1):
        for i in range(num_nodes):
            batch, _ = draw_minibatch(shards[i], cfg.batch_size, rng)
            _, grad = loss_and_grad(models[i], batch)
            models[i] = sgd_step(models[i], grad, cfg.learning_rate)
        averaged = average_params(models, [1.0] * num_nodes)
        models = [averaged] * num_nodes
        transmissions += per_round
        if transmissions // cfg.eval_every > eval_bucket:
            eval_bucket = transmissions // cfg.eval_every
            accuracy, loss = evaluate(averaged, test_set)
            records.append(EvalRecord(round_num, transmissions, -1, accuracy, loss))
            if cfg.target_accuracy is not None and accuracy >= cfg.target_accuracy:
                reached = transmissions
                break
    if reached is None and (not records or records[-1].transmissions < transmissions):
        accuracy, loss = evaluate(averaged, test_set)
        records.append(EvalRecord(cfg.max_iterations, transmissions, -1, accuracy, loss))
        if cfg.target_accuracy is not None and accuracy >= cfg.target_accuracy:
            reached = transmissions
    return TrialResult(records, reached, params_digest(averaged), averaged, ledger=None)


def transmissions_to_accuracy(result: TrialResult, threshold: float) -> int | None:
    """Smallest recorded transmission count whose accuracy meets the threshold."""
    for record in result.records:
        if record.test_accuracy >= threshold:
            return record.transmissions
    return None


@dataclass
class TrialsSummary:
    """Per-trial outcomes plus mean/std over the trials that reached target."""

    results: list[TrialResult]
    per_trial: list[int | None]
    mean: float | None
    std: float | None
    n_trials: int
    n_reached: int


def run_trials(shards, test_set, cfg: RunConfig, policy: PolicySpec | None = None,
               num_trials: int = 1) -> TrialsSummary:
    """Repeat a run with seeds cfg.seed, cfg.seed+1, ... and summarize.

    Mean and sample standard deviation cover only the trials that reached the
    target; a single reaching trial reports std 0.0 by convention. Trials
    that never reach the target appear as None in per_trial and are counted
    in n_trials - n_reached.
    """
    if num_trials < 1:
        raise ValueError(f"num_trials must be >= 1, got {num_trials}")
    policy = _resolve_policy(cfg, policy)
    if cfg.target_accuracy is None:
        raise ValueError("run_trials needs cfg.target_accuracy")
    results = []
    for trial in range(num_trials):
        trial_cfg = replace(cfg, seed=cfg.seed + trial, policy=policy)
        if policy.kind == "gossip":
            results.append(run_gossip(shards, test_set, trial_cfg))
        else:
            results.append(run_tram_fl(shards, test_set, trial_cfg))
    per_trial = [r.transmissions_to_target for r in results]
    reached = [v for v in per_trial if v is not None]
    mean = statistics.fmean(reached) if reached else None
    if len(reached) >= 2:
        std = statistics.stdev(reached)
    elif len(reached) == 1:
        std = 0.0
    else:
        std = None
    return TrialsSummary(results, per_trial, mean, std, num_trials, len(reached))
