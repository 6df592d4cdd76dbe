"""Experiment configuration files.

A config is a JSON object::

    {
      "name": "ring5",
      "seed": 0,
      "chain":      {"kind": "ring", "n_states": 5, "params": {"stay": 0.1},
                     "gamma": 0.9, "reward_kind": "indicator", "seed": 0},
      "features":   {"kind": "one_hot", "D": 5, "L": 1.0, "seed": 0},
      "projection": {"d": 3},
      "grid":       {"lambdas": [0.0, 0.5], "n": [1000], "d": [3]},
      "delta": 0.1,
      "mixing": {"beta0": 1.0, "beta1": 1.0, "kappa": 1.0},
      "seeds": [0, 1, 2],
      "stationary_start": true,
      "output": "out/ring5",
      "bench":  {...},
      "verify": {...}
    }

``chain.rewards`` (explicit list) may replace ``chain.reward_kind``.
``seeds`` may also be ``{"count": k}`` for ``0..k-1``.  ``grid.d`` defaults
to ``[projection.d]``.  The master ``seed`` can be overridden from the CLI.
"""

import hashlib
import json
from dataclasses import dataclass, field

from ..bounds import MixingParams

SCHEMA_VERSION = 1

CHAIN_KINDS = ("ring", "random_ergodic", "chain_walk")
FEATURE_KINDS = ("one_hot", "random_bounded", "fourier_on_index")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    chain: dict
    features: dict
    projection: dict
    lambdas: list
    ns: list
    ds: list
    delta: float
    mixing: MixingParams
    seeds: list
    stationary_start: bool = True
    output: str = "out"
    bench: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def resolved(self):
        """Canonical JSON-able dict of the fully resolved config."""
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "seed": self.seed,
            "chain": self.chain,
            "features": self.features,
            "projection": self.projection,
            "grid": {"lambdas": self.lambdas, "n": self.ns, "d": self.ds},
            "delta": self.delta,
            "mixing": {"beta0": self.mixing.beta0, "beta1": self.mixing.beta1,
                       "kappa": self.mixing.kappa},
            "seeds": self.seeds,
            "stationary_start": self.stationary_start,
            "output": self.output,
            "bench": self.bench,
            "verify": self.verify,
        }

    @property
    def config_hash(self):
        resolved = self.resolved()
        resolved.pop("output")
        blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _seeds(spec, problems):
    if isinstance(spec, dict) and "count" in spec:
        count = spec["count"]
        if not isinstance(count, int) or count < 1:
            problems.append("seeds.count must be a positive integer")
            return []
        return list(range(count))
    if isinstance(spec, list) and spec and all(isinstance(s, int) and s >= 0 for s in spec):
        return list(spec)
    problems.append("seeds must be a nonempty list of nonnegative integers or {'count': k}")
    return []


def from_dict(raw, seed_override=None):
    """Validate a config mapping; all problems are reported together."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])

    chain = dict(raw.get("chain") or {})
    if chain.get("kind") not in CHAIN_KINDS:
        problems.append(f"chain.kind must be one of {CHAIN_KINDS}")
    n_states = chain.get("n_states")
    if not isinstance(n_states, int) or n_states < 1:
        problems.append("chain.n_states must be a positive integer")
        n_states = 1
    gamma = chain.get("gamma", 0.9)
    if not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
        problems.append("chain.gamma must lie in (0, 1)")
    chain.setdefault("gamma", gamma)
    chain.setdefault("params", {})
    chain.setdefault("seed", 0)
    if "rewards" in chain and len(chain["rewards"]) != n_states:
        problems.append("chain.rewards must have n_states entries")

    features = dict(raw.get("features") or {})
    if features.get("kind") not in FEATURE_KINDS:
        problems.append(f"features.kind must be one of {FEATURE_KINDS}")
    D = features.get("D")
    if not isinstance(D, int) or D < 1:
        problems.append("features.D must be a positive integer")
        D = 1
    elif D > n_states:
        problems.append(f"features.D={D} exceeds chain.n_states={n_states}")
    features.setdefault("L", 1.0)
    features.setdefault("seed", 0)

    projection = dict(raw.get("projection") or {})
    grid = dict(raw.get("grid") or {})
    ds = grid.get("d", [projection["d"]] if "d" in projection else None)
    if not ds or not all(isinstance(d, int) and 1 <= d <= D for d in ds):
        problems.append("grid.d (or projection.d) must list integers in [1, D]")
        ds = []
    lambdas = grid.get("lambdas", [0.0])
    if not lambdas or not all(isinstance(x, (int, float)) and 0 <= x <= 1 for x in lambdas):
        problems.append("grid.lambdas must list values in [0, 1]")
        lambdas = []
    ns = grid.get("n", [1000])
    if not ns or not all(isinstance(x, int) and x >= 2 for x in ns):
        problems.append("grid.n must list integers >= 2")
        ns = []

    delta = raw.get("delta", 0.1)
    if not isinstance(delta, (int, float)) or not 0 < delta < 1:
        problems.append("delta must lie in (0, 1)")
    try:
        mixing = MixingParams(**(raw.get("mixing") or {}))
    except (TypeError, ValueError) as exc:
        problems.append(f"mixing: {exc}")
        mixing = MixingParams()

    seeds = _seeds(raw.get("seeds", [0]), problems)
    seed = raw.get("seed", 0) if seed_override is None else seed_override
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        problems.append("seed must be an unsigned 64-bit integer")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        seed=int(seed),
        chain=chain,
        features=features,
        projection=projection,
        lambdas=[float(x) for x in lambdas],
        ns=[int(x) for x in ns],
        ds=[int(x) for x in ds],
        delta=float(delta),
        mixing=mixing,
        seeds=seeds,
        stationary_start=bool(raw.get("stationary_start", True)),
        output=str(raw.get("output", "out")),
        bench=dict(raw.get("bench") or {}),
        verify=dict(raw.get("verify") or {}),
        raw=raw,
    )


def load(path, seed_override=None):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from exc
    return from_dict(raw, seed_override)
