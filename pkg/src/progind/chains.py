"""Several MH chains over observation shards, sharing adaptor counts.

Chains run in segments of `SyncPolicy.period` iterations on private copies of
the adaptor. At each barrier the count changes each chain made since the last
barrier are summed into the shared state, in chain-id order, and every chain
continues from a copy of the result.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .grammar import AdaptorState, GrammarConfig, merge_adaptors
from .inference import (
    NEG_INF,
    Chain,
    ChainResult,
    MHConfig,
    Task,
    evaluate_evidence,
)
from .jsonio import dumps
from .lang.sexpr import render
from .likelihood import SampleSet

STRATEGIES = ("round_robin", "random_with_seed", "full_replication")
SYNC_MODES = ("merge-all-broadcast",)


class AllChainsFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SyncPolicy:
    period: int
    mode: str = "merge-all-broadcast"

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("sync period must be >= 1")
        if self.mode not in SYNC_MODES:
            raise ValueError(f"unknown sync mode {self.mode!r}")


@dataclass(frozen=True)
class ChainSpec:
    chain_id: int
    seed: int
    shard: tuple
    mh: MHConfig


def partition_observations(obs, n_chains: int, strategy: str = "round_robin", seed: int = 0) -> list:
    """Split observation indices into `n_chains` shards.

    Returns a list of index tuples. `obs` may be a list of IO pairs or a
    SampleSet, in which case its individual values are sharded.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown shard strategy {strategy!r}")
    n = len(obs.values) if isinstance(obs, SampleSet) else len(obs)
    order = list(range(n))
    if strategy == "full_replication":
        return [tuple(order) for _ in range(n_chains)]
    if strategy == "random_with_seed":
        random.Random(seed).shuffle(order)
    shards = [[] for _ in range(n_chains)]
    for pos, i in enumerate(order):
        shards[pos % n_chains].append(i)
    return [tuple(sorted(s)) for s in shards]


def select(obs, shard):
    if isinstance(obs, SampleSet):
        return SampleSet(tuple(obs.values[i] for i in shard))
    return [obs[i] for i in shard]


def make_specs(
    n_chains: int, mh: MHConfig, obs, strategy: str = "round_robin", shard_seed: int | None = None
) -> list[ChainSpec]:
    """Chain i gets seed mh.seed + i and the i-th shard."""
    shards = partition_observations(obs, n_chains, strategy, mh.seed if shard_seed is None else shard_seed)
    return [ChainSpec(i, mh.seed + i, shards[i], mh) for i in range(n_chains)]


@dataclass
class ParallelResult:
    results: list[ChainResult]
    adaptor: AdaptorState
    syncs: int = 0
    shards: list = field(default_factory=list)


def run_parallel(
    specs: list[ChainSpec],
    sync: SyncPolicy,
    gcfg: GrammarConfig,
    task: Task,
    adaptor: AdaptorState | None = None,
) -> ParallelResult:
    """Run the chains to completion with barrier merges every `sync.period`.

    Chains are advanced one after another within a segment; since they share
    nothing between barriers the interleaving cannot affect the outcome.
    """
    ids = [s.chain_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("chain ids must be distinct")
    if len({s.seed for s in specs}) != len(specs):
        raise ValueError("chain seeds must be distinct")
    specs = sorted(specs, key=lambda s: s.chain_id)
    base = adaptor.copy() if adaptor is not None else AdaptorState()
    chains = [
        Chain(s.chain_id, task.with_observations(select(task.observations, s.shard)), s.mh, gcfg, base.copy(), s.seed)
        for s in specs
    ]
    syncs = 0
    while True:
        for c in chains:
            c.advance(sync.period)
        base = _barrier(chains, base)
        syncs += 1
        if all(c.done for c in chains):
            break
    return ParallelResult([c.result() for c in chains], base, syncs, [s.shard for s in specs])


def _barrier(chains, base: AdaptorState) -> AdaptorState:
    merged = base
    for c in chains:
        merged = merge_adaptors(merged, c.adaptor.delta_since(base))
    for c in chains:
        c.adaptor = merged.copy()
    return merged


@dataclass(frozen=True)
class Best:
    chain_id: int
    iteration: int
    expr: object
    log_prior: float
    log_lik: float
    p: float

    @property
    def score(self) -> float:
        return self.log_prior + self.log_lik


def best_of(results: list[ChainResult], task: Task, mh: MHConfig, gcfg: GrammarConfig) -> Best:
    """Pick the chain MAP with the highest score on the full observation set.

    Each MAP keeps the log-prior its chain recorded and gets a fresh
    likelihood on all observations at the final noise level. Ties go to the
    lower chain id, then the earlier iteration.
    """
    p = mh.final_p
    best = None
    for r in sorted(results, key=lambda r: r.chain_id):
        if r.error is not None or r.best is None:
            continue
        rng = random.Random(mh.seed * 1_000_003 + r.chain_id)
        ev = evaluate_evidence(task, r.best.expr, mh, gcfg.registry, rng)
        cand = Best(r.chain_id, r.best_iteration, r.best.expr, r.best.log_prior, ev.loglik(p), p)
        if best is None or _better(cand, best):
            best = cand
    if best is None:
        raise AllChainsFailed("; ".join(f"chain {r.chain_id}: {r.error}" for r in results))
    return best


def _better(a: Best, b: Best) -> bool:
    if a.score != b.score:
        return a.score > b.score
    return (a.chain_id, a.iteration) < (b.chain_id, b.iteration)


def summary(task: Task, best: Best, out: ParallelResult) -> dict:
    chains = []
    for r in out.results:
        chains.append(
            {
                "chain_id": r.chain_id,
                "acceptance_rate": r.stats.get("acceptance_rate", 0.0) if r.error is None else None,
                "iterations": r.stats.get("iterations", 0),
                "map_score": r.best_score if r.error is None else None,
                "error": r.error,
            }
        )
    return {
        "best": {
            "program": render(task.signature.program(best.expr)),
            "chain_id": best.chain_id,
            "iteration": best.iteration,
            "log_prior": best.log_prior,
            "log_lik": best.log_lik,
            "log_posterior": best.score,
            "p": best.p,
        },
        "chains": chains,
        "syncs": out.syncs,
    }


def write_artifacts(out_dir, task: Task, best: Best | None, out: ParallelResult) -> Path:
    """chain-<id>.jsonl per chain, adaptor.json, and result.json (if a best exists)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in out.results:
        (out_dir / f"chain-{r.chain_id}.jsonl").write_text(r.log_text, encoding="utf-8")
    (out_dir / "adaptor.json").write_text(out.adaptor.to_json() + "\n", encoding="utf-8")
    if best is not None:
        text = dumps(summary(task, best, out), indent=2) + "\n"
        (out_dir / "result.json").write_text(text, encoding="utf-8")
    return out_dir


__all__ = [
    "AllChainsFailed",
    "Best",
    "ChainSpec",
    "NEG_INF",
    "ParallelResult",
    "STRATEGIES",
    "SyncPolicy",
    "best_of",
    "make_specs",
    "partition_observations",
    "run_parallel",
    "select",
    "summary",
    "write_artifacts",
]
