"""Metropolis-Hastings over programs by subtree regeneration."""

from __future__ import annotations

import math
import random
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field, replace

from .grammar import (
    AdaptorState,
    GenTrace,
    GrammarConfig,
    Scope,
    Unsatisfiable,
    derivation,
    iter_sites,
    sample_expr,
    score_expr,
)
from .jsonio import dumps
from .lang.evaluator import apply_model, make_closure
from .lang.expr import Lam, replace_at
from .lang.sexpr import render
from .lang.typetags import Func
from .likelihood import (
    ABCKernel,
    AnnealSchedule,
    NoiseModel,
    SampleSet,
    anneal,
    draw_samples,
    histogram_l1,
    is_deterministic,
    loglik_from_counts,
    loglik_upper_bound,
    match_counts,
)

NEG_INF = float("-inf")
SITE_RULES = ("uniform",)


@dataclass(frozen=True)
class TaskSignature:
    inputs: tuple
    output: object

    @property
    def names(self) -> tuple:
        return tuple(f"x{i + 1}" for i in range(len(self.inputs)))

    @property
    def func_type(self) -> Func:
        return Func(tuple(self.inputs), self.output)

    def scope(self) -> Scope:
        return Scope(self.names, tuple(self.inputs), self.func_type)

    def program(self, body) -> Lam:
        return Lam(tuple(zip(self.names, self.inputs)), self.output, body)

    def body_of(self, program):
        """Accept a lambda of this signature or a bare body; return the body."""
        if isinstance(program, Lam):
            if program.type != self.func_type:
                raise ValueError(f"program has type {program.type}, expected {self.func_type}")
            if tuple(n for n, _ in program.params) != self.names:
                return _rename_params(program, self.names)
            return program.body
        return program


def _rename_params(lam: Lam, names):
    from .grammar.scope import canonical, instantiate

    scope = Scope(names, tuple(t for _, t in lam.params), lam.type)
    text = canonical(lam.body, tuple(n for n, _ in lam.params))
    return instantiate(text, scope)


@dataclass
class Task:
    signature: TaskSignature
    kind: str = "io_pairs"  # or "sampler"
    observations: object = ()

    def __post_init__(self):
        if self.kind not in ("io_pairs", "sampler"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "sampler" and self.signature.inputs:
            raise ValueError("sampler tasks take zero inputs")

    def with_observations(self, obs) -> "Task":
        return Task(self.signature, self.kind, obs)

    @property
    def n_observations(self) -> int:
        if isinstance(self.observations, SampleSet):
            return len(self.observations.values)
        return len(self.observations or ())


@dataclass(frozen=True)
class MHConfig:
    iterations: int = 1000
    thinning: int = 1
    seed: int = 0
    noise: NoiseModel = NoiseModel()
    kernel: ABCKernel = ABCKernel()
    sampler_runs: int = 100
    schedule: AnnealSchedule = AnnealSchedule()
    budget: int = 2000
    site_rule: str = "uniform"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.sampler_runs < 1:
            raise ValueError("sampler_runs must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.site_rule not in SITE_RULES:
            raise ValueError(f"unknown site rule {self.site_rule!r}")

    @property
    def final_p(self) -> float:
        return anneal(self.schedule, self.iterations - 1)


@dataclass(frozen=True)
class Evidence:
    """What the likelihood needs to be re-evaluated at any noise level."""

    counts: tuple = ()
    n: int = 0
    fixed: float | None = None

    def loglik(self, p: float) -> float:
        if self.fixed is not None:
            return self.fixed
        if self.n == 0:
            return 0.0
        return loglik_from_counts(self.counts, self.n, p)


class EvidenceCache:
    """Bounded LRU of evidence for deterministic bodies.

    Deterministic evaluation draws nothing from the rng, so a hit is
    indistinguishable from recomputation.
    """

    def __init__(self, capacity: int = 50_000):
        self.capacity = capacity
        self._data = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, body):
        ev = self._data.get(body)
        if ev is None:
            self.misses += 1
        else:
            self.hits += 1
            self._data.move_to_end(body)
        return ev

    def put(self, body, ev):
        self._data[body] = ev
        if len(self._data) > self.capacity:
            self._data.popitem(last=False)


def evaluate_evidence(
    task: Task,
    body,
    cfg: MHConfig,
    registry,
    rng,
    cache: EvidenceCache | None = None,
    reject_below: tuple | None = None,
) -> Evidence | None:
    """Evidence for `body` on the task's observations.

    With `reject_below=(p, threshold)`, IO evaluation is abandoned (and None
    returned) once the log-likelihood at `p` provably stays below `threshold`.
    """
    det = is_deterministic(body, registry)
    if det and cache is not None:
        ev = cache.get(body)
        if ev is None:
            ev = _evidence(task, body, cfg, registry, rng, det, reject_below)
            if ev is not None:
                cache.put(body, ev)
        return ev
    return _evidence(task, body, cfg, registry, rng, det, reject_below)


def _evidence(task, body, cfg, registry, rng, det, reject_below=None) -> Evidence | None:
    model = make_closure(task.signature.program(body), registry)
    obs = task.observations
    if reject_below is not None and reject_below[1] > 0.0:
        return None  # no likelihood here exceeds 0
    if task.kind == "sampler":
        if not obs:
            return Evidence(fixed=0.0)
        values = draw_samples(model, cfg.sampler_runs, rng, cfg.budget, det)
        if not values:
            return Evidence(fixed=NEG_INF)
        return Evidence(fixed=-histogram_l1(values, obs.values, cfg.kernel.bins) / cfg.kernel.epsilon)
    obs = list(obs or ())
    if not obs:
        return Evidence()
    stop = None
    if reject_below is not None and reject_below[1] > NEG_INF:
        p, threshold = reject_below
        n, runs = len(obs), 1 if det else cfg.noise.runs

        def stop(done, k, remaining):
            return loglik_upper_bound(done, k, remaining, n, runs, p) < threshold

    counts = match_counts(model, obs, cfg.noise, rng, cfg.budget, det, stop)
    if counts is None:
        return None
    return Evidence(tuple(counts), len(obs))


@dataclass
class ProgramTrace:
    """Current MH state: model body, its derivation record and cached scores.

    `log_prior` is scored against the owning chain's adaptor state with this
    trace's own customers (`entries`) removed; `log_lik` is at noise level `p`.
    """

    expr: object
    gen: GenTrace
    log_prior: float
    log_lik: float
    evidence: Evidence
    p: float
    entries: tuple = ()

    @property
    def log_posterior(self) -> float:
        return self.log_prior + self.log_lik


@dataclass(frozen=True)
class PosteriorSample:
    expr: object
    log_posterior: float
    iteration: int


@dataclass(frozen=True)
class Proposal:
    candidate: object
    log_q_fwd: float
    log_q_rev: float
    site: tuple
    subtree: object
    gen: GenTrace


class ProposalFailure(Exception):
    pass


def init_trace(
    task: Task, gcfg: GrammarConfig, adaptor: AdaptorState, rng, cfg: MHConfig, t: int = 0, cache: EvidenceCache | None = None
) -> ProgramTrace:
    """Draw a model body from the prior and commit its derivation."""
    sig = task.signature
    body, gen = sample_expr(sig.output, sig.scope(), gcfg, adaptor, rng)
    log_prior = score_expr(body, sig.output, sig.scope(), gcfg, adaptor)
    entries = _commit(adaptor, body, sig, gcfg, +1)
    p = anneal(cfg.schedule, t)
    evidence = evaluate_evidence(task, body, cfg, gcfg.registry, rng, cache)
    return ProgramTrace(body, gen, log_prior, evidence.loglik(p), evidence, p, entries)


def _commit(adaptor, body, sig, gcfg, delta, entries=None):
    if not gcfg.adaptor_enabled:
        return ()
    if entries is None:
        entries = tuple(derivation(body, sig.output, sig.scope(), gcfg))
    for key, text in entries:
        adaptor.update(key, text, delta)
    return entries


def prior_of(trace: ProgramTrace, task: Task, gcfg: GrammarConfig, adaptor: AdaptorState) -> float:
    """Recompute a committed trace's log-prior with its own customers removed."""
    sig = task.signature
    _commit(adaptor, trace.expr, sig, gcfg, -1, trace.entries)
    try:
        return score_expr(trace.expr, sig.output, sig.scope(), gcfg, adaptor)
    finally:
        _commit(adaptor, trace.expr, sig, gcfg, +1, trace.entries)


def propose(trace: ProgramTrace, task: Task, gcfg: GrammarConfig, adaptor: AdaptorState, rng) -> Proposal:
    """Regenerate a uniformly chosen subtree from the prior at its context."""
    sig = task.signature
    sites = list(iter_sites(trace.expr, sig.output, sig.scope(), gcfg))
    site = sites[rng.randrange(len(sites))]
    try:
        new, gen = sample_expr(site.req, site.scope, gcfg, adaptor, rng, site.depth, site.nesting)
    except Unsatisfiable as e:
        raise ProposalFailure(str(e)) from e
    candidate = replace_at(trace.expr, site.path, new)
    n_after = sum(1 for _ in iter_sites(candidate, sig.output, sig.scope(), gcfg))
    fwd = -math.log(len(sites)) + score_expr(new, site.req, site.scope, gcfg, adaptor, site.depth, site.nesting)
    rev = -math.log(n_after) + score_expr(site.expr, site.req, site.scope, gcfg, adaptor, site.depth, site.nesting)
    return Proposal(candidate, fwd, rev, site.path, new, gen)


def mh_step(
    trace: ProgramTrace,
    task: Task,
    cfg: MHConfig,
    gcfg: GrammarConfig,
    adaptor: AdaptorState,
    rng,
    t: int,
    cache: EvidenceCache | None = None,
):
    """One Metropolis-Hastings transition; returns (trace, accepted).

    The current program's customers are lifted out of the adaptor for the
    duration of the move, so current and candidate are scored (and the
    candidate proposed) against the same snapshot of everyone else's counts.
    The winner's customers are then committed.
    """
    sig = task.signature
    scope = sig.scope()
    p = anneal(cfg.schedule, t)
    _commit(adaptor, trace.expr, sig, gcfg, -1, trace.entries)
    try:
        if gcfg.adaptor_enabled:
            prior_cur = score_expr(trace.expr, sig.output, scope, gcfg, adaptor)
        else:
            prior_cur = trace.log_prior
        current = replace(trace, log_prior=prior_cur, log_lik=trace.evidence.loglik(p), p=p)
        new = _transition(current, task, cfg, gcfg, adaptor, rng, p, cache)
    except BaseException:
        _commit(adaptor, trace.expr, sig, gcfg, +1, trace.entries)
        raise
    if new is None:
        _commit(adaptor, trace.expr, sig, gcfg, +1, trace.entries)
        return current, False
    new.entries = _commit(adaptor, new.expr, sig, gcfg, +1)
    return new, True


def _transition(current, task, cfg, gcfg, adaptor, rng, p, cache):
    sig = task.signature
    try:
        prop = propose(current, task, gcfg, adaptor, rng)
    except ProposalFailure:
        return None
    prior_new = score_expr(prop.candidate, sig.output, sig.scope(), gcfg, adaptor)
    if prior_new == NEG_INF:
        return None
    # Accept iff log u < log alpha. Drawing u first gives the likelihood a
    # threshold to beat, so hopeless candidates can stop evaluating early.
    u = rng.random()
    log_u = math.log(u) if u > 0 else NEG_INF
    threshold = log_u + current.log_posterior - prior_new - (prop.log_q_rev - prop.log_q_fwd)
    evidence = evaluate_evidence(task, prop.candidate, cfg, gcfg.registry, rng, cache, (p, threshold))
    if evidence is None:
        return None
    lik_new = evidence.loglik(p)
    if lik_new == NEG_INF:
        return None
    log_alpha = (prior_new + lik_new) - current.log_posterior + (prop.log_q_rev - prop.log_q_fwd)
    if not log_u < log_alpha:
        return None
    gen = current.gen.splice(prop.site, prop.gen)
    return ProgramTrace(prop.candidate, gen, prior_new, lik_new, evidence, p)


@dataclass
class ChainResult:
    chain_id: int
    samples: list
    best: ProgramTrace | None
    best_iteration: int
    best_score: float
    stats: dict
    log_lines: list
    error: str | None = None

    @property
    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.log_lines)


class Chain:
    """A single MH chain that can be advanced in segments."""

    def __init__(self, chain_id: int, task: Task, cfg: MHConfig, gcfg: GrammarConfig, adaptor: AdaptorState, seed: int):
        self.chain_id = chain_id
        self.task = task
        self.cfg = cfg
        self.gcfg = gcfg
        self.adaptor = adaptor
        self.rng = random.Random(seed)
        self.i = 0
        self.accepted = 0
        self.proposals = 0
        self.samples = []
        self.log_lines = []
        self.error = None
        self._final_p = cfg.final_p
        self.trace = None
        self.best = None
        self.best_iteration = -1
        self.best_score = NEG_INF
        self.cache = EvidenceCache()
        try:
            self.trace = init_trace(task, gcfg, adaptor, self.rng, cfg, cache=self.cache)
        except Unsatisfiable as e:
            self.error = str(e)
            return
        self._track_best()

    @property
    def done(self) -> bool:
        return self.error is not None or self.i >= self.cfg.iterations

    def _track_best(self):
        score = self.trace.log_prior + self.trace.evidence.loglik(self._final_p)
        if self.best is None or score > self.best_score:
            self.best, self.best_score, self.best_iteration = self.trace, score, self.i

    def advance(self, n_steps: int):
        for _ in range(n_steps):
            if self.done:
                return
            t = self.i
            self.trace, accepted = mh_step(
                self.trace, self.task, self.cfg, self.gcfg, self.adaptor, self.rng, t, self.cache
            )
            self.i += 1
            self.proposals += 1
            self.accepted += accepted
            self._track_best()
            if self.i % self.cfg.thinning == 0:
                self._record()

    def _record(self):
        tr = self.trace
        self.samples.append(PosteriorSample(tr.expr, tr.log_posterior, self.i))
        line = {
            "iter": self.i,
            "log_prior": tr.log_prior,
            "log_lik": tr.log_lik,
            "p": tr.p,
            "accept_rate": self.acceptance_rate,
            "expr": render(self.task.signature.program(tr.expr)),
        }
        self.log_lines.append(dumps(line, sort_keys=False))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0

    def result(self) -> ChainResult:
        stats = {"acceptance_rate": self.acceptance_rate, "iterations": self.i, "accepted": self.accepted}
        return ChainResult(
            self.chain_id, self.samples, self.best, self.best_iteration, self.best_score, stats, self.log_lines, self.error
        )


def run_chain(cfg: MHConfig, task: Task, gcfg: GrammarConfig, adaptor: AdaptorState | None = None) -> ChainResult:
    """Run `cfg.iterations` MH steps, keeping every `thinning`-th state and
    the highest-scoring visited state at the final noise level."""
    chain = Chain(0, task, cfg, gcfg, adaptor if adaptor is not None else AdaptorState(), cfg.seed)
    chain.advance(cfg.iterations)
    return chain.result()


FAILED = "<failed>"


def predict(samples, inputs, signature: TaskSignature, runs: int, rng, budget: int, registry=None) -> dict:
    """Pooled output distribution of the retained models on `inputs`.

    Each sample carries equal weight, split evenly over its runs; failed runs
    are reported under the FAILED key.
    """
    if not samples:
        raise ValueError("predict needs at least one posterior sample")
    mass = defaultdict(float)
    w = 1.0 / (len(samples) * runs)
    for s in samples:
        model = make_closure(signature.program(s.expr), registry)
        for _ in range(runs):
            out = apply_model(model, tuple(inputs), rng, budget)
            mass[out.value if out.ok else FAILED] += w
    return dict(mass)
