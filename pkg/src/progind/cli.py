"""Command-line front end.

    progind induce CONFIG
    progind sample-grammar CONFIG --n N
    progind score CONFIG --program FILE|- [--adaptor SNAPSHOT] [--iteration T]
    progind eval --program FILE|- --inputs JSON --seed S --budget B

Exit codes: 0 success, 1 other runtime failure, 2 usage, 3 config error,
4 observation-file error, 5 all chains failed, 6 program parse/type error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from .chains import AllChainsFailed, best_of, make_specs, run_parallel, summary, write_artifacts
from .config import ConfigError, load_config
from .grammar import AdaptorState, Unsatisfiable, commit_derivation, sample_expr, score_expr
from .inference import evaluate_evidence
from .jsonio import dumps, fmt_float
from .lang.evaluator import apply_model, evaluate, make_closure
from .lang.expr import Lam
from .lang.sexpr import ParseError, format_float, parse, render
from .lang.typecheck import TypeCheckError, check_program, typecheck
from .lang.typetags import BOOL, FLOAT, INT
from .likelihood import ObservationError, anneal, coerce_value

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_OBSERVATIONS = 4
EXIT_ALL_FAILED = 5
EXIT_PROGRAM = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config(path):
    try:
        return load_config(path)
    except ConfigError as e:
        raise CliError(EXIT_CONFIG, f"config error: {e}") from None


def _task(cfg):
    try:
        return cfg.load_task()
    except ConfigError as e:
        raise CliError(EXIT_CONFIG, f"config error: {e}") from None
    except ObservationError as e:
        raise CliError(EXIT_OBSERVATIONS, f"observation error in {cfg.observations_path}: {e}") from None
    except OSError as e:
        raise CliError(EXIT_OBSERVATIONS, f"cannot read observations: {e}") from None


def _read_program(source: str):
    try:
        text = sys.stdin.read() if source == "-" else open(source, encoding="utf-8").read()
    except OSError as e:
        raise CliError(EXIT_USAGE, f"cannot read program: {e}") from None
    try:
        return parse(text)
    except ParseError as e:
        raise CliError(EXIT_PROGRAM, f"parse error: {e}") from None


def _type_error(e: TypeCheckError) -> CliError:
    where = "/".join(map(str, e.path)) or "root"
    return CliError(EXIT_PROGRAM, f"type error at node {where}: {e.message}")


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def format_outcome(out) -> str:
    return format_value(out.value) if out.ok else str(out)


# -- commands -------------------------------------------------------------------


def cmd_induce(args) -> int:
    cfg = _config(args.config)
    task = _task(cfg)
    specs = make_specs(cfg.chains.n_chains, cfg.mh, task.observations, cfg.chains.shard_strategy)
    out = run_parallel(specs, cfg.sync, cfg.grammar, task)
    try:
        best = best_of(out.results, task, cfg.mh, cfg.grammar)
    except AllChainsFailed as e:
        write_artifacts(cfg.output_dir, task, None, out)
        raise CliError(EXIT_ALL_FAILED, f"all chains failed: {e}") from None
    write_artifacts(cfg.output_dir, task, best, out)
    print(dumps(summary(task, best, out)["best"]))
    return EXIT_OK


def cmd_sample_grammar(args) -> int:
    if args.n < 1:
        raise CliError(EXIT_USAGE, "--n must be >= 1")
    cfg = _config(args.config)
    sig, gcfg = cfg.signature, cfg.grammar
    adaptor = AdaptorState()
    rng = random.Random(cfg.seed)
    lines = []
    for _ in range(args.n):
        try:
            body, _ = sample_expr(sig.output, sig.scope(), gcfg, adaptor, rng)
        except Unsatisfiable as e:
            raise CliError(EXIT_RUNTIME, f"grammar cannot produce {e}") from None
        if gcfg.adaptor_enabled:
            commit_derivation(adaptor, body, sig.output, sig.scope(), gcfg, +1)
        lines.append(render(sig.program(body)))
    sys.stdout.write("".join(line + "\n" for line in lines))
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _config(args.config)
    sig, gcfg = cfg.signature, cfg.grammar
    program = _read_program(args.program)
    try:
        if isinstance(program, Lam):
            check_program(program, sig.inputs, sig.output, gcfg.registry)
            body = sig.body_of(program)
        else:
            body = program
            t = typecheck(body, tuple(zip(sig.names, sig.inputs)), sig.func_type, gcfg.registry)
            if t != sig.output:
                raise TypeCheckError(f"body has type {t}, expected {sig.output}", ())
    except TypeCheckError as e:
        raise _type_error(e) from None
    except ValueError as e:
        raise CliError(EXIT_PROGRAM, f"type error at node root: {e}") from None
    adaptor = AdaptorState()
    if args.adaptor:
        try:
            with open(args.adaptor, encoding="utf-8") as f:
                adaptor = AdaptorState.from_json(f.read())
        except (OSError, ValueError) as e:
            raise CliError(EXIT_USAGE, f"cannot load adaptor snapshot: {e}") from None
    task = _task(cfg)
    log_prior = score_expr(body, sig.output, sig.scope(), gcfg, adaptor)
    p = anneal(cfg.mh.schedule, args.iteration)
    ev = evaluate_evidence(task, body, cfg.mh, gcfg.registry, random.Random(cfg.seed))
    print(f"log_prior {fmt_float(log_prior)}")
    print(f"log_lik {fmt_float(ev.loglik(p))}")
    return EXIT_OK


def cmd_eval(args) -> int:
    program = _read_program(args.program)
    try:
        inputs = json.loads(args.inputs)
    except json.JSONDecodeError as e:
        raise CliError(EXIT_USAGE, f"--inputs is not JSON: {e.msg}") from None
    if not isinstance(inputs, list):
        raise CliError(EXIT_USAGE, "--inputs must be a JSON list")
    if args.budget < 1:
        raise CliError(EXIT_USAGE, "--budget must be >= 1")
    rng = random.Random(args.seed)
    try:
        if isinstance(program, Lam):
            typecheck(program)
            types = [t for _, t in program.params]
            if len(inputs) != len(types):
                raise CliError(EXIT_USAGE, f"expected {len(types)} inputs, got {len(inputs)}")
            values = []
            for i, (v, t) in enumerate(zip(inputs, types)):
                if t not in (INT, FLOAT, BOOL):
                    raise CliError(EXIT_USAGE, f"input {i + 1} has function type {t}")
                try:
                    values.append(coerce_value(v, t))
                except ObservationError as e:
                    raise CliError(EXIT_USAGE, f"input {i + 1}: {e}") from None
            out = apply_model(make_closure(program), values, rng, args.budget)
        else:
            typecheck(program)
            if inputs:
                raise CliError(EXIT_USAGE, "inputs given but the program is not a lambda")
            out = evaluate(program, None, rng, args.budget)
    except TypeCheckError as e:
        raise _type_error(e) from None
    print(format_outcome(out))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="progind", description="Bayesian program induction over a typed grammar.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("induce", help="run MH chains on a task and write artifacts")
    p.add_argument("config")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("sample-grammar", help="print programs drawn from the prior")
    p.add_argument("config")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_sample_grammar)

    p = sub.add_parser("score", help="print log-prior and log-likelihood of a program")
    p.add_argument("config")
    p.add_argument("--program", required=True, help="file holding the program, or - for stdin")
    p.add_argument("--adaptor", help="adaptor snapshot (adaptor.json) to score the prior against")
    p.add_argument("--iteration", type=int, default=0, help="anneal step whose p is used (default 0)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate a program once")
    p.add_argument("--program", required=True, help="file holding the program, or - for stdin")
    p.add_argument("--inputs", default="[]", help="JSON list of input values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=10_000)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"progind: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
