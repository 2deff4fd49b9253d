import itertools
import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from progind.grammar import (
    AdaptorState,
    DecrementMissing,
    GrammarConfig,
    Scope,
    Unsatisfiable,
    adaptor_update,
    canonical,
    commit_derivation,
    merge_adaptors,
    py_predictive,
    sample_expr,
    score_expr,
)
from progind.lang.expr import App, ConstBool, ConstInt, If, Var, height
from progind.lang.sexpr import render
from progind.lang.typecheck import typecheck
from progind.lang.typetags import BOOL, FLOAT, INT, func

NEG_INF = float("-inf")
XY = Scope.of([("x1", INT), ("x2", INT)])


def toy_config(**kw):
    """Finite space: constants {0,1}, x1, + and * only, If, depth cap 1."""
    base = dict(
        weights={"constant": 3.0, "variable": 3.0, "application": 2.0, "if": 1.0},
        constants={INT: (0, 1), BOOL: (True, False)},
        max_depth=1,
        adaptor_enabled=False,
    )
    base.update(kw)
    cfg = GrammarConfig(**base)
    return cfg.replace(registry=cfg.registry.restrict(["+", "*"]))


def enumerate_toy():
    """Independent generative enumeration of `toy_config` at Int, scope [x1].

    At depth 0 the productions are constant (3), variable (3), application (2)
    and if (1). At depth 1 only terminals remain: Int picks uniformly over
    {0, 1, x1} with the constant/variable weights, Bool picks true/false.
    """
    leaf_int = [(ConstInt(0), 0.5 * 0.5), (ConstInt(1), 0.5 * 0.5), (Var("x1"), 0.5)]
    leaf_bool = [(ConstBool(True), 0.5), (ConstBool(False), 0.5)]
    out = {}
    total = 9.0
    for e, p in leaf_int:
        out[e] = out.get(e, 0.0) + (6.0 / total) * p
    for op in ("+", "*"):
        for (a, pa), (b, pb) in itertools.product(leaf_int, repeat=2):
            out[App(op, (a, b))] = (2.0 / total) * 0.5 * pa * pb
    for (c, pc), (t, pt), (f, pf) in itertools.product(leaf_bool, leaf_int, leaf_int):
        out[If(c, t, f)] = (1.0 / total) * pc * pt * pf
    return out


# -- sample_expr / score_expr examples ----------------------------------------


@pytest.mark.parametrize("adaptor_enabled", [False, True])
def test_single_outcome_grammar(adaptor_enabled):
    cfg = GrammarConfig(weights={"constant": 1.0}, constants={INT: (0,)}, adaptor_enabled=adaptor_enabled)
    for seed in range(5):
        e, trace = sample_expr(INT, Scope.of(), cfg, AdaptorState(), random.Random(seed))
        assert e == ConstInt(0)
        assert len(trace) == 1 and trace.choices[0].logp == 0.0


def test_paper_call_shape_gives_int_expression():
    e, _ = sample_expr(INT, XY, GrammarConfig(), AdaptorState(), random.Random(7))
    assert typecheck(e, XY.pairs()) == INT


def test_golden_seed_42():
    e, trace = sample_expr(INT, XY, GrammarConfig(), AdaptorState(), random.Random(42))
    assert render(e) == "(+ (safe-div 2 2) (let ((y2 int x1)) 0))"
    assert trace.logp == pytest.approx(-20.54094428015246, abs=1e-12)


def test_constants_only_two_program_space():
    cfg = GrammarConfig(weights={"constant": 1.0}, constants={INT: (0, 1)}, adaptor_enabled=False)
    assert score_expr(ConstInt(0), INT, Scope.of(), cfg, AdaptorState()) == pytest.approx(math.log(0.5))


def test_unbound_variable_scores_neg_inf():
    assert score_expr(Var("q"), INT, XY, GrammarConfig(), AdaptorState()) == NEG_INF


def test_constant_outside_pool_scores_neg_inf():
    assert score_expr(ConstInt(17), INT, XY, GrammarConfig(), AdaptorState()) == NEG_INF


def test_unsatisfiable_names_the_key():
    cfg = GrammarConfig(weights={"variable": 1.0}, adaptor_enabled=False)
    with pytest.raises(Unsatisfiable) as info:
        sample_expr(BOOL, XY, cfg, AdaptorState(), random.Random(0))
    assert "bool" in str(info.value).lower()


def test_toy_enumeration_is_a_distribution():
    space = enumerate_toy()
    assert len(space) == 39
    assert math.fsum(space.values()) == pytest.approx(1.0, abs=1e-12)


def test_toy_scores_match_enumeration():
    cfg = toy_config()
    scope = Scope.of([("x1", INT)])
    for e, p in enumerate_toy().items():
        assert score_expr(e, INT, scope, cfg, AdaptorState()) == pytest.approx(math.log(p), abs=1e-12)


def test_sampler_frequencies_match_scores():
    cfg = toy_config()
    scope = Scope.of([("x1", INT)])
    rng = random.Random(2024)
    n = 40_000
    counts = Counter(sample_expr(INT, scope, cfg, AdaptorState(), rng)[0] for _ in range(n))
    space = enumerate_toy()
    assert set(counts) <= set(space)
    l1 = sum(abs(counts.get(e, 0) / n - p) for e, p in space.items())
    assert l1 < 0.04


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_sum_equals_score_without_adaptor(seed):
    cfg = GrammarConfig(adaptor_enabled=False)
    e, trace = sample_expr(INT, XY, cfg, AdaptorState(), random.Random(seed))
    assert score_expr(e, INT, XY, cfg, AdaptorState()) == pytest.approx(trace.logp, abs=1e-9)


SCOPES = [
    (INT, XY),
    (BOOL, XY),
    (FLOAT, Scope.of([("x1", FLOAT)])),
    (INT, Scope.of([("x1", INT)], self_sig=func([INT], INT))),
    (BOOL, Scope.of()),
    (FLOAT, Scope.of([("x1", INT), ("x2", BOOL)])),
]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(SCOPES), st.integers(1, 5))
def test_sampled_expressions_typecheck_and_respect_depth(seed, case, max_depth):
    req, scope = case
    cfg = GrammarConfig(max_depth=max_depth, adaptor_enabled=False)
    e, _ = sample_expr(req, scope, cfg, AdaptorState(), random.Random(seed))
    assert typecheck(e, scope.pairs(), scope.self_sig) == req
    assert height(e) <= max_depth


def test_adaptor_reuse_is_scored_as_mixture():
    cfg = GrammarConfig()
    adaptor = AdaptorState()
    rng = random.Random(3)
    for _ in range(30):
        e, _ = sample_expr(INT, XY, cfg, adaptor, rng)
        commit_derivation(adaptor, e, INT, XY, cfg)
    # A committed root is strictly more probable than under the bare base.
    base = score_expr(e, INT, XY, cfg.replace(adaptor_enabled=False), AdaptorState())
    assert score_expr(e, INT, XY, cfg, adaptor) > base


def test_adaptor_sampling_does_not_mutate_counts():
    cfg = GrammarConfig()
    adaptor = AdaptorState()
    e, _ = sample_expr(INT, XY, cfg, adaptor, random.Random(0))
    commit_derivation(adaptor, e, INT, XY, cfg)
    before = adaptor.to_json()
    for seed in range(20):
        sample_expr(INT, XY, cfg, adaptor, random.Random(seed))
    assert adaptor.to_json() == before


def test_canonical_form_is_alpha_invariant():
    a = canonical(App("+", (Var("a"), Var("b"))), ("a", "b"))
    b = canonical(App("+", (Var("p"), Var("q"))), ("p", "q"))
    assert a == b == "(+ v0 v1)"


# -- py_predictive ------------------------------------------------------------

KEY = "int | (int int) | -"


def crp():
    return GrammarConfig(alpha=1.0, discount=0.0)


def test_predictive_empty_key():
    reuse, new = py_predictive(KEY, "eA", AdaptorState(), crp(), math.log(0.3))
    assert reuse == NEG_INF
    assert new == pytest.approx(math.log(0.3))


def test_predictive_crp_examples():
    state = AdaptorState({KEY: {"eA": 2, "eB": 1}})
    reuse, _ = py_predictive(KEY, "eA", state, crp(), 0.0)
    assert math.exp(reuse) == pytest.approx(2 / 4, abs=1e-15)
    adaptor_update(state, KEY, "eA", +1)
    reuse, _ = py_predictive(KEY, "eA", state, crp(), 0.0)
    assert math.exp(reuse) == pytest.approx(3 / 5, abs=1e-15)


def test_predictive_pitman_yor_closed_form():
    cfg = GrammarConfig(alpha=1.0, discount=0.1)
    state = AdaptorState({KEY: {"eA": 2, "eB": 1}})
    reuse, new = py_predictive(KEY, "eA", state, cfg, math.log(0.25))
    assert math.exp(reuse) == pytest.approx((2 - 0.1) / 4, abs=1e-15)
    assert math.exp(new) == pytest.approx((1 + 0.1 * 2) / 4 * 0.25, abs=1e-15)


def seating_logprob(seq, cfg):
    """Log-probability of the table partition induced by committing `seq`."""
    state = AdaptorState()
    total = 0.0
    for e in seq:
        reuse, new = py_predictive(KEY, e, state, cfg, 0.0)
        total += reuse if state.count(KEY, e) else new
        adaptor_update(state, KEY, e, +1)
    return total


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=8),
    st.floats(0.1, 5.0),
    st.floats(0.0, 0.9),
    st.randoms(use_true_random=False),
)
def test_exchangeability(seq, alpha, discount, rnd):
    cfg = GrammarConfig(alpha=alpha, discount=discount)
    perm = list(seq)
    rnd.shuffle(perm)
    assert seating_logprob(seq, cfg) == pytest.approx(seating_logprob(perm, cfg), abs=1e-9)


# -- adaptor_update / merge ---------------------------------------------------


def test_update_inverse_pair():
    state = AdaptorState({KEY: {"eA": 1}})
    before = state.to_json()
    adaptor_update(state, KEY, "eB", +1)
    adaptor_update(state, KEY, "eB", -1)
    assert state.to_json() == before


def test_update_on_empty_key():
    state = adaptor_update(AdaptorState(), KEY, "eA", +1)
    assert state.tables(KEY) == [("eA", 1)]


def test_decrement_removes_table():
    state = AdaptorState({KEY: {"eA": 1, "eB": 2}})
    adaptor_update(state, KEY, "eA", -1)
    assert state.n_tables(KEY) == 1


def test_decrement_missing():
    with pytest.raises(DecrementMissing):
        adaptor_update(AdaptorState(), KEY, "eA", -1)


def test_merge_examples():
    a = AdaptorState({KEY: {"e": 2}})
    b = AdaptorState({KEY: {"e": 3}})
    assert merge_adaptors(a, b).tables(KEY) == [("e", 5)]
    assert merge_adaptors(a, AdaptorState()).to_json() == a.to_json()


def test_snapshot_round_trip():
    a = AdaptorState({KEY: {"(+ v0 1)": 2}, "bool | () | -": {"true": 1}})
    assert AdaptorState.from_json(a.to_json()) == a


states = st.dictionaries(
    st.sampled_from(["k1", "k2", "k3"]),
    st.dictionaries(st.sampled_from(["a", "b", "c", "d"]), st.integers(1, 5), min_size=1),
).map(AdaptorState)


@settings(max_examples=200, deadline=None)
@given(states, states, states)
def test_merge_algebra(a, b, c):
    assert merge_adaptors(a, b).to_json() == merge_adaptors(b, a).to_json()
    left = merge_adaptors(merge_adaptors(a, b), c)
    right = merge_adaptors(a, merge_adaptors(b, c))
    assert left.to_json() == right.to_json()
    assert merge_adaptors(a, AdaptorState()).to_json() == a.to_json()


@settings(max_examples=100, deadline=None)
@given(states, states)
def test_delta_since_recovers_difference(a, b):
    merged = merge_adaptors(a, b)
    assert merge_adaptors(a, merged.delta_since(a)) == merged
