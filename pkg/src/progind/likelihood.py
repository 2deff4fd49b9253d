"""Noisy-observation likelihoods for candidate programs.

IO tasks score a program by how many observed outputs it reproduces under a
Binomial noise model whose success probability can be annealed. Sampler
tasks compare histograms of program draws against the observed sample set
with an ABC kernel exp(-distance / epsilon).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .lang.evaluator import Closure, apply_model
from .lang.expr import App, children
from .lang.stdlib import Registry, standard_registry
from .lang.typetags import BOOL, FLOAT, INT

NEG_INF = float("-inf")


@dataclass(frozen=True)
class IOPair:
    inputs: tuple
    output: object


@dataclass(frozen=True)
class SampleSet:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("a sample set needs at least one value")


@dataclass(frozen=True)
class NoiseModel:
    p: float = 0.9
    match_tolerance: float = 1e-9
    runs: int = 10

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.match_tolerance < 0:
            raise ValueError("match_tolerance must be >= 0")

    def with_p(self, p) -> "NoiseModel":
        return NoiseModel(p, self.match_tolerance, self.runs)


@dataclass(frozen=True)
class AnnealSchedule:
    p0: float = 0.9
    p_max: float = 0.999
    gamma: float = 0.999
    kind: str = "geometric"

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.p0 <= 1.0:
            raise ValueError("p0 must lie in (0, 1]")
        if not self.p_max <= 1.0 - 1e-9:
            raise ValueError("p_max must be <= 1 - 1e-9")
        if self.kind == "geometric":
            if not 0.0 < self.gamma < 1.0:
                raise ValueError("gamma must lie in (0, 1)")
            if self.p0 > self.p_max:
                raise ValueError("p0 must not exceed p_max")


@dataclass(frozen=True)
class ABCKernel:
    epsilon: float = 0.05
    bins: int = 20

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")


def anneal(schedule: AnnealSchedule, t: int) -> float:
    """Success probability at iteration t; non-decreasing in t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if schedule.kind == "constant":
        return schedule.p0
    return min(schedule.p_max, 1.0 - (1.0 - schedule.p0) * schedule.gamma**t)


def is_deterministic(expr, registry: Registry | None = None) -> bool:
    """True when no stochastic primitive is reachable from `expr`."""
    registry = registry or standard_registry()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, App) and registry.is_stochastic(e.fn):
            return False
        stack.extend(children(e))
    return True


def values_match(value, target, tol: float) -> bool:
    if isinstance(target, float):
        return isinstance(value, float) and abs(value - target) <= tol
    return type(value) is type(target) and value == target


def binomial_logpmf(k: int, n: int, p: float) -> float:
    if p == 1.0:
        return 0.0 if k == n else NEG_INF
    log_choose = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return log_choose + k * math.log(p) + (n - k) * math.log1p(-p)


def log_mean_exp(xs) -> float:
    xs = list(xs)
    m = max(xs)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(x - m) for x in xs) / len(xs))


def match_counts(
    model: Closure, obs, noise: NoiseModel, rng, budget: int, deterministic: bool | None = None, stop=None
):
    """Matched-observation count for each of the noise model's runs.

    Failed or over-budget evaluations count as mismatches. A deterministic
    model is run once and its count repeated. `stop(done, k, remaining)` is
    consulted after every observation with the finished runs' counts, the
    running count and the observations left in this run; when it returns
    True the evaluation is abandoned and None is returned.
    """
    if deterministic is None:
        deterministic = is_deterministic(model.body)
    runs = 1 if deterministic else noise.runs
    counts = []
    n = len(obs)
    for _ in range(runs):
        k = 0
        for i, o in enumerate(obs):
            out = apply_model(model, o.inputs, rng, budget)
            if out.ok and values_match(out.value, o.output, noise.match_tolerance):
                k += 1
            if stop is not None and stop(counts, k, n - i - 1):
                return None
        counts.append(k)
    return counts * noise.runs if deterministic else counts


@lru_cache(maxsize=256)
def binomial_table(n: int, p: float) -> tuple:
    return tuple(binomial_logpmf(j, n, p) for j in range(n + 1))


def loglik_upper_bound(done, k: int, remaining: int, n: int, runs: int, p: float) -> float:
    """Largest log-likelihood still reachable from a partially scored model.

    `done` holds the counts of finished runs (all `runs` of them share one
    count for a deterministic model, in which case pass runs=1).
    """
    table = binomial_table(n, p)
    best_any = max(table)
    if runs == 1:
        return max(table[k : k + remaining + 1])
    parts = [table[c] for c in done]
    parts.append(max(table[k : k + remaining + 1]))
    parts.extend([best_any] * (runs - len(done) - 1))
    m = max(parts)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(x - m) for x in parts) / runs)


def loglik_from_counts(counts, n: int, p: float) -> float:
    return log_mean_exp(binomial_logpmf(k, n, p) for k in counts)


def loglik_io(model: Closure, obs, noise: NoiseModel, rng, budget: int) -> float:
    """log of the mean over runs of Binomial(N, p) at each run's match count."""
    obs = list(obs)
    if not obs:
        return 0.0
    return loglik_from_counts(match_counts(model, obs, noise, rng, budget), len(obs), noise.p)


def draw_samples(model: Closure, runs: int, rng, budget: int, deterministic: bool | None = None):
    """Up to `runs` successful draws of a zero-input model, or None when more
    than half of the runs fail."""
    if deterministic is None:
        deterministic = is_deterministic(model.body)
    if deterministic:
        out = apply_model(model, (), rng, budget)
        return [out.value] * runs if out.ok else None
    values = []
    failures = 0
    for _ in range(runs):
        out = apply_model(model, (), rng, budget)
        if out.ok:
            values.append(out.value)
        else:
            failures += 1
            if failures > runs / 2:
                return None
    return values


def histogram_l1(xs, ys, bins: int = 20) -> float:
    """L1 distance between normalized histograms; lies in [0, 2].

    Integer and boolean samples get one bin per distinct value; floats share
    `bins` equal-width bins over the joint range.
    """
    xs, ys = list(xs), list(ys)
    if any(isinstance(v, float) for v in xs + ys):
        lo, hi = min(xs + ys), max(xs + ys)
        width = (hi - lo) / bins

        def key(v):
            return 0 if width == 0 else min(int((v - lo) / width), bins - 1)

    else:

        def key(v):
            return (type(v).__name__, v)

    cx = Counter(map(key, xs))
    cy = Counter(map(key, ys))
    return math.fsum(abs(cx[k] / len(xs) - cy[k] / len(ys)) for k in set(cx) | set(cy))


def loglik_distribution(model: Closure, obs: SampleSet, kernel: ABCKernel, runs: int, rng, budget: int) -> float:
    """-distance / epsilon between model draws and the observed samples."""
    values = draw_samples(model, runs, rng, budget)
    if not values:
        return NEG_INF
    return -histogram_l1(values, obs.values, kernel.bins) / kernel.epsilon


# -- observation files ----------------------------------------------------------


class ObservationError(ValueError):
    pass


def coerce_value(v, t):
    """Check a JSON value against a base type, converting ints for floats."""
    if t == BOOL and isinstance(v, bool):
        return v
    if t == INT and isinstance(v, int) and not isinstance(v, bool):
        return v
    if t == FLOAT and isinstance(v, (int, float)) and not isinstance(v, bool):
        if not math.isfinite(v):
            raise ObservationError(f"non-finite float {v!r}")
        return float(v)
    raise ObservationError(f"value {v!r} is not of type {t}")


def parse_observations(lines, kind: str, input_types, output_type):
    """Parse JSON-lines observations for an io_pairs or sampler task.

    io_pairs lines are ``{"in": [...], "out": ...}``; sampler lines are
    ``{"sample": ...}`` and are gathered into one SampleSet.
    """
    pairs, samples = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise ObservationError(f"line {lineno}: invalid JSON ({e.msg})") from None
        try:
            if kind == "io_pairs":
                if not isinstance(row, dict) or set(row) != {"in", "out"}:
                    raise ObservationError('expected {"in": [...], "out": ...}')
                ins = row["in"]
                if not isinstance(ins, list) or len(ins) != len(input_types):
                    raise ObservationError(f"expected {len(input_types)} inputs")
                pairs.append(
                    IOPair(tuple(coerce_value(v, t) for v, t in zip(ins, input_types)), coerce_value(row["out"], output_type))
                )
            elif kind == "sampler":
                if not isinstance(row, dict) or set(row) != {"sample"}:
                    raise ObservationError('expected {"sample": ...}')
                samples.append(coerce_value(row["sample"], output_type))
            else:
                raise ObservationError(f"unknown task kind {kind!r}")
        except ObservationError as e:
            raise ObservationError(f"line {lineno}: {e}") from None
    if kind == "sampler":
        if not samples:
            raise ObservationError("sampler task needs at least one sample")
        return SampleSet(tuple(samples))
    return pairs


def load_observations(path, kind: str, input_types, output_type):
    with open(Path(path)) as f:
        return parse_observations(f, kind, input_types, output_type)


def dump_observations(obs) -> str:
    if isinstance(obs, SampleSet):
        return "".join(json.dumps({"sample": v}) + "\n" for v in obs.values)
    return "".join(json.dumps({"in": list(o.inputs), "out": o.output}) + "\n" for o in obs)
