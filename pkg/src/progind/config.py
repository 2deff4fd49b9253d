"""Task configuration files.

A task is described by one JSON document::

    {
      "schema": 1,
      "seed": 7,
      "task": {"kind": "io_pairs", "inputs": ["int", "int"], "output": "int",
               "observations": "obs.jsonl"},
      "grammar": {"max_depth": 4, "alpha": 1.0, "discount": 0.1},
      "noise": {"p": 0.9, "match_tolerance": 1e-9, "runs": 10},
      "kernel": {"epsilon": 0.05, "bins": 20, "runs": 100},
      "anneal": {"kind": "geometric", "gamma": 0.999, "p_max": 0.999},
      "chains": {"n_chains": 4, "iterations": 5000, "thinning": 10,
                 "sync_period": 250, "shard_strategy": "round_robin"},
      "budget": 2000,
      "output_dir": "out"
    }

Only `schema`, `seed` and `task` are required. Relative paths are resolved
against the directory holding the config file. `noise.p` is the starting
success probability of the anneal schedule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .chains import STRATEGIES, SyncPolicy
from .grammar import PRODUCTIONS, GrammarConfig
from .grammar.config import default_constants, default_let_types
from .inference import MHConfig, Task, TaskSignature
from .lang.sexpr import ParseError, parse_type
from .lang.typetags import BOOL, FLOAT, INT, Func
from .likelihood import ABCKernel, AnnealSchedule, NoiseModel, load_observations

SCHEMA_VERSION = 1
NAMED_FLOATS = {"pi": math.pi, "e": math.e}

_SECTIONS = {
    "schema": None,
    "seed": None,
    "budget": None,
    "output_dir": None,
    "task": {"kind", "inputs", "output", "observations"},
    "grammar": {
        "weights",
        "type_weights",
        "constants",
        "max_depth",
        "max_let_nesting",
        "adaptor",
        "alpha",
        "discount",
        "primitives",
        "let_types",
    },
    "noise": {"p", "match_tolerance", "runs"},
    "kernel": {"epsilon", "bins", "runs"},
    "anneal": {"kind", "gamma", "p_max"},
    "chains": {"n_chains", "iterations", "thinning", "sync_period", "shard_strategy"},
}


class ConfigError(ValueError):
    """Invalid configuration; `field` is the dotted path of the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ChainSettings:
    n_chains: int = 1
    iterations: int = 1000
    thinning: int = 1
    sync_period: int = 100
    shard_strategy: str = "round_robin"


@dataclass
class TaskConfig:
    seed: int
    signature: TaskSignature
    kind: str
    observations_path: Path | None
    grammar: GrammarConfig
    mh: MHConfig
    chains: ChainSettings = field(default_factory=ChainSettings)
    output_dir: Path = Path("out")

    @property
    def sync(self) -> SyncPolicy:
        return SyncPolicy(self.chains.sync_period)

    def load_task(self) -> Task:
        """The task with its observations read from disk (empty if none given).

        The file is only required to exist here, so commands that never look
        at observations accept a config whose data is not yet in place.
        """
        obs = ()
        if self.observations_path is not None:
            if not self.observations_path.is_file():
                raise ConfigError("task.observations", f"no such file: {self.observations_path}")
            obs = load_observations(self.observations_path, self.kind, self.signature.inputs, self.signature.output)
        return Task(self.signature, self.kind, obs)


def load_config(path) -> TaskConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return parse_config(doc, path.parent)


def parse_config(doc, base_dir=".") -> TaskConfig:
    base_dir = Path(base_dir)
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    _check_keys(doc)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError("schema", f"expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    if "seed" not in doc:
        raise ConfigError("seed", "a seed is required")
    seed = _int(doc, "seed", "seed", None)

    task = doc.get("task")
    if not isinstance(task, dict):
        raise ConfigError("task", "required section missing")
    kind = task.get("kind")
    if kind not in ("io_pairs", "sampler"):
        raise ConfigError("task.kind", f"expected io_pairs or sampler, got {kind!r}")
    inputs = task.get("inputs", [])
    if not isinstance(inputs, list):
        raise ConfigError("task.inputs", "expected a list of type names")
    in_types = tuple(_type(t, f"task.inputs[{i}]") for i, t in enumerate(inputs))
    if "output" not in task:
        raise ConfigError("task.output", "required")
    out_type = _type(task["output"], "task.output")
    for i, t in enumerate(in_types + (out_type,)):
        if isinstance(t, Func):
            where = f"task.inputs[{i}]" if i < len(in_types) else "task.output"
            raise ConfigError(where, "task inputs and output must be int, float or bool")
    if kind == "sampler" and in_types:
        raise ConfigError("task.inputs", "sampler tasks take no inputs")
    obs_path = None
    if task.get("observations") is not None:
        if not isinstance(task["observations"], str):
            raise ConfigError("task.observations", "expected a path string")
        obs_path = base_dir / task["observations"]

    grammar = _grammar(doc.get("grammar", {}))
    noise_doc = _section(doc, "noise")
    kernel_doc = _section(doc, "kernel")
    anneal_doc = _section(doc, "anneal")
    chains_doc = _section(doc, "chains")

    p0 = _num(noise_doc, "p", "noise.p", 0.9)
    noise = _build("noise", NoiseModel, p=p0, match_tolerance=_num(noise_doc, "match_tolerance", "noise.match_tolerance", 1e-9), runs=_int(noise_doc, "runs", "noise.runs", 10))
    kernel = _build(
        "kernel",
        ABCKernel,
        epsilon=_num(kernel_doc, "epsilon", "kernel.epsilon", 0.05),
        bins=_int(kernel_doc, "bins", "kernel.bins", 20),
    )
    schedule = _build(
        "anneal",
        AnnealSchedule,
        p0=p0,
        kind=_str(anneal_doc, "kind", "anneal.kind", AnnealSchedule.kind),
        gamma=_num(anneal_doc, "gamma", "anneal.gamma", AnnealSchedule.gamma),
        p_max=_num(anneal_doc, "p_max", "anneal.p_max", AnnealSchedule.p_max),
    )
    chains = ChainSettings(
        n_chains=_int(chains_doc, "n_chains", "chains.n_chains", 1, lo=1),
        iterations=_int(chains_doc, "iterations", "chains.iterations", 1000, lo=1),
        thinning=_int(chains_doc, "thinning", "chains.thinning", 1, lo=1),
        sync_period=_int(chains_doc, "sync_period", "chains.sync_period", 100, lo=1),
        shard_strategy=_str(chains_doc, "shard_strategy", "chains.shard_strategy", "round_robin"),
    )
    if chains.shard_strategy not in STRATEGIES:
        raise ConfigError("chains.shard_strategy", f"expected one of {', '.join(STRATEGIES)}")
    mh = _build(
        "chains",
        MHConfig,
        iterations=chains.iterations,
        thinning=chains.thinning,
        seed=seed,
        noise=noise,
        kernel=kernel,
        sampler_runs=_int(kernel_doc, "runs", "kernel.runs", 100, lo=1),
        schedule=schedule,
        budget=_int(doc, "budget", "budget", MHConfig.budget, lo=1),
    )
    out = doc.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "expected a path string")
    return TaskConfig(seed, TaskSignature(in_types, out_type), kind, obs_path, grammar, mh, chains, base_dir / out)


# -- helpers --------------------------------------------------------------------


def _check_keys(doc):
    for key, value in doc.items():
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown field")
        allowed = _SECTIONS[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(key, "expected an object")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"{key}.{sub}", "unknown field")


def _section(doc, name) -> dict:
    return doc.get(name, {})


def _type(text, where):
    if not isinstance(text, str):
        raise ConfigError(where, "expected a type name")
    try:
        return parse_type(text)
    except ParseError as e:
        raise ConfigError(where, f"unknown type {text!r} ({e})") from None


def _num(doc, key, where, default):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {v!r}")
    return float(v)


def _int(doc, key, where, default, lo=None):
    where = where or key
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(where, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(where, f"must be >= {lo}")
    return v


def _str(doc, key, where, default):
    v = doc.get(key, default)
    if not isinstance(v, str):
        raise ConfigError(where, f"expected a string, got {v!r}")
    return v


def _build(where, cls, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(where, str(e)) from None


def _grammar(g) -> GrammarConfig:
    kwargs = {}
    if "weights" in g:
        kwargs["weights"] = _weights(g["weights"], "grammar.weights")
    if "type_weights" in g:
        tw = g["type_weights"]
        if not isinstance(tw, dict):
            raise ConfigError("grammar.type_weights", "expected an object keyed by type")
        kwargs["type_weights"] = {
            _type(t, f"grammar.type_weights.{t}"): _weights(w, f"grammar.type_weights.{t}") for t, w in tw.items()
        }
    if "constants" in g:
        kwargs["constants"] = _constants(g["constants"])
    if "max_depth" in g:
        kwargs["max_depth"] = _int(g, "max_depth", "grammar.max_depth", None, lo=0)
    if "max_let_nesting" in g:
        kwargs["max_let_nesting"] = _int(g, "max_let_nesting", "grammar.max_let_nesting", None, lo=0)
    if "adaptor" in g:
        if not isinstance(g["adaptor"], bool):
            raise ConfigError("grammar.adaptor", "expected true or false")
        kwargs["adaptor_enabled"] = g["adaptor"]
    if "alpha" in g:
        kwargs["alpha"] = _num(g, "alpha", "grammar.alpha", None)
    if "discount" in g:
        kwargs["discount"] = _num(g, "discount", "grammar.discount", None)
    if "primitives" in g:
        names = g["primitives"]
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ConfigError("grammar.primitives", "expected a list of primitive names")
        from .lang.stdlib import standard_registry

        try:
            kwargs["registry"] = standard_registry().restrict(names)
        except KeyError as e:
            raise ConfigError("grammar.primitives", str(e.args[0])) from None
    if "let_types" in g:
        lt = g["let_types"]
        if not isinstance(lt, list):
            raise ConfigError("grammar.let_types", "expected a list of type names")
        kwargs["let_types"] = tuple(_type(t, f"grammar.let_types[{i}]") for i, t in enumerate(lt))
    else:
        kwargs["let_types"] = default_let_types()
    try:
        return GrammarConfig(**kwargs)
    except ValueError as e:
        raise ConfigError("grammar", str(e)) from None


def _weights(w, where) -> dict:
    if not isinstance(w, dict):
        raise ConfigError(where, "expected an object of production weights")
    out = {}
    for name, v in w.items():
        if name not in PRODUCTIONS:
            raise ConfigError(f"{where}.{name}", f"unknown production; expected one of {', '.join(PRODUCTIONS)}")
        out[name] = _num(w, name, f"{where}.{name}", None)
    return out


def _constants(c) -> dict:
    if not isinstance(c, dict):
        raise ConfigError("grammar.constants", "expected an object keyed by type")
    pools = default_constants()
    for name, values in c.items():
        where = f"grammar.constants.{name}"
        t = _type(name, where)
        if t not in (INT, FLOAT, BOOL):
            raise ConfigError(where, "constant pools exist for int, float and bool only")
        if not isinstance(values, list):
            raise ConfigError(where, "expected a list of values")
        pools[t] = tuple(_constant(v, t, f"{where}[{i}]") for i, v in enumerate(values))
    return pools


def _constant(v, t, where):
    if t == BOOL:
        if isinstance(v, bool):
            return v
    elif t == INT:
        if isinstance(v, int) and not isinstance(v, bool):
            return v
    else:
        if isinstance(v, str) and v in NAMED_FLOATS:
            return NAMED_FLOATS[v]
        if isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v):
            return float(v)
    raise ConfigError(where, f"{v!r} is not a {t} constant")
