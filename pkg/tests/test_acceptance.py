"""Acceptance criteria, one test per criterion.

Each criterion is a function returning (passed, detail). Under pytest every
test prints a single ``CRITERION <n> PASS|FAIL: <detail>`` line to the
terminal before asserting; running this file directly prints all nine lines.

    python tests/test_acceptance.py
    pytest tests/test_acceptance.py -v
"""

import itertools
import math
import random
import sys
import time
from collections import Counter
from fractions import Fraction

import pytest

from progind.chains import STRATEGIES, SyncPolicy, make_specs, partition_observations, run_parallel
from progind.grammar import (
    AdaptorState,
    GrammarConfig,
    Scope,
    adaptor_update,
    merge_adaptors,
    py_predictive,
    sample_expr,
    score_expr,
)
from progind.inference import MHConfig, Task, TaskSignature, run_chain
from progind.lang.evaluator import apply_model, make_closure, value_type
from progind.lang.expr import App, ConstBool, ConstInt, If, Var
from progind.lang.outcome import BudgetExceeded, Failure
from progind.lang.sexpr import parse, render
from progind.lang.typecheck import check_program
from progind.lang.typetags import BOOL, FLOAT, INT
from progind.likelihood import (
    ABCKernel,
    AnnealSchedule,
    IOPair,
    NoiseModel,
    SampleSet,
    anneal,
    loglik_distribution,
    loglik_io,
)


def tv(a, b):
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def random_value(t, rng):
    if t == INT:
        return rng.randint(-10, 10)
    if t == FLOAT:
        return rng.uniform(-10.0, 10.0)
    return rng.random() < 0.5


# -- 1. type soundness fuzz -----------------------------------------------------

FUZZ_SIGNATURES = [
    TaskSignature((INT, INT), INT),
    TaskSignature((), BOOL),
    TaskSignature((FLOAT,), FLOAT),
    TaskSignature((INT, BOOL), FLOAT),
    TaskSignature((INT,), BOOL),
    TaskSignature((FLOAT, INT), INT),
]


def criterion_1():
    t0 = time.perf_counter()
    rng = random.Random(1)
    g = GrammarConfig(adaptor_enabled=False)
    outcomes = Counter()
    bad = []
    for i in range(10_000):
        sig = FUZZ_SIGNATURES[i % len(FUZZ_SIGNATURES)]
        body, _ = sample_expr(sig.output, sig.scope(), g, AdaptorState(), rng)
        prog = sig.program(body)
        try:
            check_program(prog, sig.inputs, sig.output, g.registry)
        except Exception as e:  # noqa: BLE001 - any failure is a finding
            bad.append(f"typecheck: {e}")
            continue
        inputs = tuple(random_value(t, rng) for t in sig.inputs)
        out = apply_model(make_closure(prog, g.registry), inputs, rng, 10_000)
        if out.ok:
            if value_type(out.value) != sig.output:
                bad.append(f"value {out.value!r} is not {sig.output}")
            outcomes["value"] += 1
        elif isinstance(out, BudgetExceeded):
            outcomes["budget"] += 1
        elif isinstance(out, Failure):
            outcomes["runtime-error"] += 1
        else:
            bad.append(f"unexpected outcome {out!r}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    return ok, f"10000 programs over {len(FUZZ_SIGNATURES)} signatures, {dict(outcomes)}, {len(bad)} violations, {elapsed:.1f}s"


# -- 2. prior consistency -------------------------------------------------------


def toy_grammar(with_if):
    weights = {"constant": 3.0, "variable": 3.0, "application": 2.0}
    if with_if:
        weights["if"] = 1.0
    g = GrammarConfig(weights=weights, constants={INT: (0, 1), BOOL: (True, False)}, max_depth=1, adaptor_enabled=False)
    return g.replace(registry=g.registry.restrict(["+", "*"]))


def toy_space(with_if):
    """Enumerate the toy grammar by hand: leaves {0, 1, x1}, + and *, optional if."""
    total = 8.0 + with_if
    leaf_int = [(ConstInt(0), 0.25), (ConstInt(1), 0.25), (Var("x1"), 0.5)]
    out = {e: (6 / total) * p for e, p in leaf_int}
    for op in ("+", "*"):
        for (a, pa), (b, pb) in itertools.product(leaf_int, repeat=2):
            out[App(op, (a, b))] = (2 / total) * 0.5 * pa * pb
    if with_if:
        for c, (t, pt), (f, pf) in itertools.product((True, False), leaf_int, leaf_int):
            out[If(ConstBool(c), t, f)] = (1 / total) * 0.5 * pt * pf
    return out


def criterion_2():
    t0 = time.perf_counter()
    g = toy_grammar(with_if=True)
    scope = Scope.of([("x1", INT)])
    space = toy_space(with_if=True)
    worst = max(abs(math.exp(score_expr(e, INT, scope, g, AdaptorState())) - p) for e, p in space.items())
    rng = random.Random(2)
    n = 100_000
    counts = Counter(sample_expr(INT, scope, g, AdaptorState(), rng)[0] for _ in range(n))
    outside = set(counts) - set(space)
    l1 = sum(abs(counts.get(e, 0) / n - math.exp(score_expr(e, INT, scope, g, AdaptorState()))) for e in space)
    elapsed = time.perf_counter() - t0
    ok = l1 < 0.02 and not outside and worst < 1e-12 and elapsed < 30
    return ok, f"{len(space)} programs, L1 = {l1:.4f} (< 0.02), max |score - enumeration| = {worst:.1e}, {elapsed:.1f}s"


# -- 3. Pitman-Yor exchangeability ------------------------------------------------


def seating_logprob(key, seq, cfg):
    state = AdaptorState()
    total = 0.0
    for e in seq:
        reuse, new = py_predictive(key, e, state, cfg, 0.0)
        total += reuse if state.count(key, e) else new
        adaptor_update(state, key, e, +1)
    return total


def criterion_3():
    rng = random.Random(3)
    worst = 0.0
    for i in range(100):
        key = f"{rng.choice(['int', 'bool', 'float'])} | ({' '.join(rng.choices(['int', 'float'], k=rng.randint(0, 3)))}) | -"
        cfg = GrammarConfig(alpha=rng.uniform(0.05, 5.0), discount=rng.uniform(0.0, 0.95))
        seq = [rng.choice(["0", "1", "v0", "(+ v0 1)"]) for _ in range(rng.randint(1, 8))]
        base = seating_logprob(key, seq, cfg)
        for _ in range(10):
            perm = seq[:]
            rng.shuffle(perm)
            worst = max(worst, abs(seating_logprob(key, perm, cfg) - base))
    key = "int | (int int) | -"
    crp = GrammarConfig(alpha=1.0, discount=0.0)
    state = AdaptorState({key: {"eA": 2, "eB": 1}})
    r1 = math.exp(py_predictive(key, "eA", state, crp, 0.0)[0])
    adaptor_update(state, key, "eA", +1)
    r2 = math.exp(py_predictive(key, "eA", state, crp, 0.0)[0])
    empty = py_predictive(key, "eA", AdaptorState(), crp, math.log(0.3))
    py = GrammarConfig(alpha=1.0, discount=0.1)
    s3 = AdaptorState({key: {"eA": 2, "eB": 1}})
    reuse, new = py_predictive(key, "eA", s3, py, 0.0)
    examples = (
        abs(r1 - 2 / 4) < 1e-15
        and abs(r2 - 3 / 5) < 1e-15
        and empty[0] == float("-inf")
        and abs(math.exp(empty[1]) - 0.3) < 1e-15
        and abs(math.exp(reuse) - 1.9 / 4) < 1e-15
        and abs(math.exp(new) - 1.2 / 4) < 1e-15
    )
    ok = worst < 1e-9 and examples
    return ok, f"max permutation gap {worst:.1e} over 100 keys, worked examples {'match' if examples else 'differ'}"


# -- 4. MH exactness ---------------------------------------------------------------

TOY_OBS = [IOPair((x,), y) for x, y in [(0, 0), (1, 2), (2, 4), (3, 7)]]


def run_toy(e, x):
    if isinstance(e, ConstInt):
        return e.value
    if isinstance(e, Var):
        return x
    a, b = run_toy(e.args[0], x), run_toy(e.args[1], x)
    return a + b if e.fn == "+" else a * b


def toy_posterior(obs, p):
    post = {}
    for e, prior in toy_space(with_if=False).items():
        k = sum(run_toy(e, o.inputs[0]) == o.output for o in obs)
        post[e] = prior * math.comb(len(obs), k) * p**k * (1 - p) ** (len(obs) - k)
    z = sum(post.values())
    return {e: w / z for e, w in post.items()}


def chain_tv(obs, seed):
    task = Task(TaskSignature((INT,), INT), observations=obs)
    cfg = MHConfig(iterations=100_000, seed=seed, schedule=AnnealSchedule(p0=0.9, kind="constant"))
    res = run_chain(cfg, task, toy_grammar(with_if=False))
    counts = Counter(s.expr for s in res.samples)
    freq = {e: c / len(res.samples) for e, c in counts.items()}
    return tv(freq, toy_posterior(obs, 0.9))


def criterion_4():
    t0 = time.perf_counter()
    tv_post = chain_tv(TOY_OBS, 41)
    t1 = time.perf_counter()
    tv_prior = chain_tv([], 42)
    t2 = time.perf_counter()
    ok = tv_post < 0.05 and tv_prior < 0.05 and t1 - t0 < 120 and t2 - t1 < 120
    return ok, (
        f"21 programs, TV to posterior {tv_post:.4f} ({t1 - t0:.0f}s), TV to prior {tv_prior:.4f} ({t2 - t1:.0f}s), bound 0.05"
    )


# -- 5. Bernoulli sampler induction -------------------------------------------------


def bernoulli_run(seed, data):
    t0 = time.perf_counter()
    task = Task(TaskSignature((), BOOL), "sampler", data)
    res = run_chain(MHConfig(iterations=20_000, thinning=100, seed=seed), task, GrammarConfig())
    elapsed = time.perf_counter() - t0
    model = make_closure(task.signature.program(res.best.expr))
    rng = random.Random(seed + 1000)
    draws = [apply_model(model, (), rng, 10_000) for _ in range(10_000)]
    mean = sum(1 for d in draws if d.ok and d.value) / len(draws)
    return 0.70 <= mean <= 0.90 and elapsed < 120, mean, elapsed, res.best.expr


def criterion_5():
    rng = random.Random(12345)
    data = SampleSet(tuple(rng.random() < 0.8 for _ in range(300)))
    wins, notes = 0, []
    for i, seed in enumerate(range(5)):
        good, mean, elapsed, expr = bernoulli_run(seed, data)
        wins += good
        notes.append(f"seed {seed}: {render(expr)} mean {mean:.3f} {elapsed:.0f}s")
        if wins >= 3 or wins + (4 - i) < 3:
            break
    return wins >= 3, f"{wins} of 5 runs in [0.70, 0.90] (need 3); " + "; ".join(notes)


# -- 6. function induction --------------------------------------------------------------


def addition_run(seed, obs, grid):
    t0 = time.perf_counter()
    task = Task(TaskSignature((INT, INT), INT), observations=obs)
    res = run_chain(MHConfig(iterations=50_000, thinning=100, seed=seed), task, GrammarConfig())
    elapsed = time.perf_counter() - t0
    model = make_closure(task.signature.program(res.best.expr))
    rng = random.Random(0)
    equal = all(
        (out := apply_model(model, (a, b), rng, 10_000)).ok and out.value == a + b for a, b in grid
    )
    return equal and elapsed < 180, elapsed, res.best.expr


def criterion_6():
    rng = random.Random(6)
    obs = [IOPair((a, b), a + b) for a, b in ((rng.randint(-10, 10), rng.randint(-10, 10)) for _ in range(20))]
    axis = range(-9, 11, 2)
    grid = [(a, b) for a in axis for b in axis]
    wins, notes = 0, []
    for i, seed in enumerate(range(5)):
        good, elapsed, expr = addition_run(seed, obs, grid)
        wins += good
        notes.append(f"seed {seed}: {render(expr)} {elapsed:.0f}s")
        if wins >= 2 or wins + (4 - i) < 2:
            break
    return wins >= 2, f"{wins} runs extensionally equal to x1 + x2 (need 2); " + "; ".join(notes)


# -- 7. merge algebra ---------------------------------------------------------------------


def random_state(rng):
    tables = {}
    for _ in range(rng.randint(0, 4)):
        key = f"{rng.choice(['int', 'bool'])} | ({rng.choice(['', 'int', 'int int'])}) | -"
        tables.setdefault(key, {})
        for _ in range(rng.randint(1, 4)):
            e = rng.choice(["0", "1", "v0", "(+ v0 v1)", "true"])
            tables[key][e] = tables[key].get(e, 0) + rng.randint(1, 5)
    return AdaptorState(tables)


def criterion_7():
    rng = random.Random(7)
    failures = 0
    for _ in range(1000):
        a, b, c = (random_state(rng) for _ in range(3))
        comm = merge_adaptors(a, b).to_json() == merge_adaptors(b, a).to_json()
        assoc = merge_adaptors(merge_adaptors(a, b), c).to_json() == merge_adaptors(a, merge_adaptors(b, c)).to_json()
        ident = merge_adaptors(a, AdaptorState()).to_json() == a.to_json()
        failures += not (comm and assoc and ident)
    return failures == 0, f"1000 random triples, {failures} violations"


# -- 8. multi-chain determinism -------------------------------------------------------------


def criterion_8():
    sig = TaskSignature((INT, INT), INT)
    rng = random.Random(8)
    obs = [IOPair((a, b), a + b) for a, b in ((rng.randint(-10, 10), rng.randint(-10, 10)) for _ in range(12))]
    task = Task(sig, observations=obs)
    g = GrammarConfig()
    mh = MHConfig(iterations=1000, seed=21, thinning=10)
    single = run_chain(mh, task, g)
    one = run_parallel(make_specs(1, mh, obs), SyncPolicy(100), g, task)
    degenerate = one.results[0].log_text == single.log_text

    def four():
        out = run_parallel(make_specs(4, mh, obs), SyncPolicy(100), g, task)
        return [r.log_text for r in out.results], out.adaptor.to_json()

    repeat = four() == four()
    bad = 0
    for _ in range(1000):
        n, k = rng.randint(0, 50), rng.randint(1, 10)
        strategy = rng.choice(STRATEGIES)
        shards = partition_observations(list(range(n)), k, strategy, rng.randrange(10**6))
        bad += set().union(*map(set, shards)) != set(range(n)) or len(shards) != k
    ok = degenerate and repeat and bad == 0
    return ok, f"n=1 equals run_chain: {degenerate}; n=4 repeatable: {repeat}; coverage violations {bad}/1000"


# -- 9. likelihood formulas --------------------------------------------------------------------


SAMPLER_MODELS = [
    "(lambda () bool (flip 0.3))",
    "(lambda () bool true)",
    "(lambda () int (uniform-int 0 4))",
    "(lambda () int 2)",
    "(lambda () float (gaussian 0.0 1.0))",
    "(lambda () float (uniform-continuous -1.0 3.0))",
]


def criterion_9():
    add = make_closure(parse("(lambda ((x1 int) (x2 int)) int (+ x1 x2))"))
    obs = [IOPair((a, b), a + b) for a, b in [(1, 2), (3, 4), (-5, 5), (0, 7)]]
    rng = random.Random(9)
    checks = {
        "loglik_io p=0.9": (loglik_io(add, obs, NoiseModel(0.9, runs=1), rng, 100), math.log(Fraction(9, 10) ** 4)),
        "loglik_io p=0.5": (loglik_io(add, obs, NoiseModel(0.5, runs=1), rng, 100), math.log(0.0625)),
        "anneal t=0": (anneal(AnnealSchedule(0.5, gamma=0.9, p_max=0.99), 0), 0.5),
        "anneal t=10": (
            anneal(AnnealSchedule(0.5, gamma=0.9, p_max=0.99), 10),
            float(1 - Fraction(1, 2) * Fraction(9, 10) ** 10),
        ),
        "two-point L1": (
            loglik_distribution(make_closure(parse("(lambda () int 0)")), SampleSet((1, 1)), ABCKernel(0.05), 10, rng, 100),
            -2 / 0.05,
        ),
    }
    worst = max(abs(got - want) for got, want in checks.values())
    out_of_bounds = 0
    for _ in range(1000):
        text = rng.choice(SAMPLER_MODELS + ["(lambda () bool (flip 0.8))", "(lambda () int (uniform-int -3 3))"])
        other = rng.choice([m for m in SAMPLER_MODELS if m.split()[3] == text.split()[3]])
        data_model = make_closure(parse(other))
        data = SampleSet(tuple(apply_model(data_model, (), rng, 100).value for _ in range(rng.randint(1, 40))))
        eps = rng.uniform(0.01, 5.0)
        ll = loglik_distribution(make_closure(parse(text)), data, ABCKernel(eps, bins=rng.randint(1, 30)), rng.randint(1, 50), rng, 100)
        out_of_bounds += not (-2 / eps - 1e-12 <= ll <= 0.0)
    ok = worst < 1e-9 and out_of_bounds == 0
    return ok, (
        f"max error {worst:.1e} on {len(checks)} worked values (anneal t=10 -> {checks['anneal t=10'][0]:.9f}); "
        f"bounds violated {out_of_bounds}/1000"
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def report(n, passed, detail):
    return f"CRITERION {n} {'PASS' if passed else 'FAIL'}: {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    passed, detail = CRITERIA[n]()
    with capsys.disabled():
        print("\n" + report(n, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        passed, detail = fn()
        failed += not passed
        print(report(n, passed, detail), flush=True)
    sys.exit(1 if failed else 0)
