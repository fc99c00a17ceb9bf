"""Seeded Monte Carlo trial runner and statistics aggregation.

A scenario fully describes an experiment (protocol, sizes, adversary,
secret policy, trial count, seed).  Trials use independent random streams
derived from the root seed by the trial index, so results are identical
for any execution order and any degree of parallelism; aggregation is a
plain order-independent counter merge.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import adversaries
from . import protocol as proto
from .errors import ConfigError

SCHEMA_VERSION = 1

PROTOCOLS = ("proposed", "zhang_baseline")
SECRET_POLICIES = ("explicit", "uniform", "forced_equal", "forced_unequal")

# 95% two-sided normal quantile, for Wilson score intervals.
_Z95 = 1.959963984540054


@dataclass
class AdversarySpec:
    kind: str = "none"
    params: dict = field(default_factory=dict)


@dataclass
class SecretsSpec:
    policy: str = "uniform"
    values: Optional[List[List[int]]] = None


@dataclass
class Scenario:
    """Everything one experiment needs, in config-document shape."""

    protocol: str = "proposed"
    n: int = 3
    m: int = 16
    check_rounds: Optional[int] = None
    decoy_count: Optional[int] = None
    variant: str = proto.VARIANT_BROADCAST
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    secrets: SecretsSpec = field(default_factory=SecretsSpec)
    trials: int = 1000
    seed: int = 0
    announce_r_vectors: bool = False
    decoy_tolerance: int = 0

    def effective_check_rounds(self) -> int:
        if self.check_rounds is not None:
            return self.check_rounds
        return self.m if self.protocol == "proposed" else 0

    def effective_decoy_count(self) -> int:
        if self.decoy_count is not None:
            return self.decoy_count
        return 2 * self.m if self.protocol == "proposed" else self.m

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"field `protocol` must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"field `n` must be an integer >= 2, got {self.n!r}")
        if self.n > 20:
            raise ConfigError(f"field `n` must be <= 20, got {self.n}")
        if self.protocol == "zhang_baseline" and self.n != 2:
            raise ConfigError("field `n` must be 2 for the zhang_baseline protocol")
        if not isinstance(self.m, int) or self.m < 1:
            raise ConfigError(f"field `m` must be a positive integer, got {self.m!r}")
        if self.check_rounds is not None:
            if not isinstance(self.check_rounds, int) or self.check_rounds < 0:
                raise ConfigError(f"field `check_rounds` must be a nonnegative integer, got {self.check_rounds!r}")
            if self.protocol == "proposed" and self.check_rounds > self.m:
                raise ConfigError(f"field `check_rounds` must be <= m={self.m}, got {self.check_rounds}")
        if self.decoy_count is not None and (not isinstance(self.decoy_count, int) or self.decoy_count < 0):
            raise ConfigError(f"field `decoy_count` must be a nonnegative integer, got {self.decoy_count!r}")
        if self.variant not in proto.VARIANTS:
            raise ConfigError(f"field `variant` must be one of {proto.VARIANTS}, got {self.variant!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"field `trials` must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"field `seed` must be a nonnegative integer, got {self.seed!r}")
        if self.decoy_tolerance < 0:
            raise ConfigError(f"field `decoy_tolerance` must be nonnegative, got {self.decoy_tolerance}")
        if self.secrets.policy not in SECRET_POLICIES:
            raise ConfigError(f"field `secrets.policy` must be one of {SECRET_POLICIES}, got {self.secrets.policy!r}")
        if self.secrets.policy == "explicit":
            values = self.secrets.values
            if values is None or len(values) != self.n:
                raise ConfigError(f"field `secrets.values` must hold {self.n} vectors")
            for idx, row in enumerate(values):
                if len(row) != self.m or any(b not in (0, 1) for b in row):
                    raise ConfigError(f"field `secrets.values[{idx}]` must be {self.m} bits")
        elif self.secrets.values is not None:
            raise ConfigError("field `secrets.values` is only allowed with policy `explicit`")
        if self.secrets.policy == "forced_unequal" and 2**self.m < self.n:
            raise ConfigError("field `secrets.policy`: forced_unequal needs 2^m >= n distinct vectors")
        # Constructing the strategy validates kind and params.
        adversaries.strategy_from_config(self.adversary.kind, self.adversary.params)

    def to_config(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "protocol": self.protocol,
            "n": self.n,
            "m": self.m,
            "check_rounds": self.check_rounds,
            "decoy_count": self.decoy_count,
            "variant": self.variant,
            "adversary": {"kind": self.adversary.kind, "params": self.adversary.params},
            "secrets": {"policy": self.secrets.policy, "values": self.secrets.values},
            "trials": self.trials,
            "seed": self.seed,
            "announce_r_vectors": self.announce_r_vectors,
            "decoy_tolerance": self.decoy_tolerance,
        }


_TOP_KEYS = {
    "schema_version",
    "protocol",
    "n",
    "m",
    "check_rounds",
    "decoy_count",
    "variant",
    "adversary",
    "secrets",
    "trials",
    "seed",
    "announce_r_vectors",
    "decoy_tolerance",
    "output",
}


def scenario_from_config(doc: dict) -> Scenario:
    """Build and validate a Scenario from a parsed config document.

    Unknown keys are rejected by name at every level.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config field `{key}`")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"field `schema_version` must be {SCHEMA_VERSION}, got {version!r}")
    adversary_doc = doc.get("adversary", {}) or {}
    for key in adversary_doc:
        if key not in ("kind", "params"):
            raise ConfigError(f"unknown config field `adversary.{key}`")
    secrets_doc = doc.get("secrets", {}) or {}
    for key in secrets_doc:
        if key not in ("policy", "values"):
            raise ConfigError(f"unknown config field `secrets.{key}`")
    output_doc = doc.get("output", {}) or {}
    for key in output_doc:
        if key not in ("path", "format"):
            raise ConfigError(f"unknown config field `output.{key}`")
    scenario = Scenario(
        protocol=doc.get("protocol", "proposed"),
        n=doc.get("n", 3),
        m=doc.get("m", 16),
        check_rounds=doc.get("check_rounds"),
        decoy_count=doc.get("decoy_count"),
        variant=doc.get("variant", proto.VARIANT_BROADCAST),
        adversary=AdversarySpec(adversary_doc.get("kind", "none"), adversary_doc.get("params", {}) or {}),
        secrets=SecretsSpec(secrets_doc.get("policy", "uniform"), secrets_doc.get("values")),
        trials=doc.get("trials", 1000),
        seed=doc.get("seed", 0),
        announce_r_vectors=doc.get("announce_r_vectors", False),
        decoy_tolerance=doc.get("decoy_tolerance", 0),
    )
    scenario.validate()
    return scenario


def wilson_interval(successes: int, count: int, z: float = _Z95) -> Tuple[float, float]:
    """Wilson score interval; behaves sensibly at rates near 0 and 1."""
    if count == 0:
        return 0.0, 1.0
    p = successes / count
    denom = 1.0 + z * z / count
    center = (p + z * z / (2 * count)) / denom
    half = z * math.sqrt(p * (1.0 - p) / count + z * z / (4.0 * count * count)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == count else min(1.0, center + half)
    return lo, hi


def closed_form(kind: str, l: int) -> float:
    """Published detection-rate formulas.

    ``intercept_detection``: 1 - (3/4)^l for l checked decoys against an
    intercept-resend tap (per decoy: wrong basis 1/2 times visible 1/2).
    ``tamper_detection``: 1 - (1/2)^l for l substituted check positions
    across a two-state preparation pair.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    if kind == "intercept_detection":
        return 1.0 - 0.75**l
    if kind == "tamper_detection":
        return 1.0 - 0.5**l
    raise ValueError(f"unknown closed-form kind `{kind}`")


@dataclass
class MetricRow:
    name: str
    estimate: float
    ci_low: float
    ci_high: float
    target: Optional[float]
    count: int


@dataclass
class TrialStats:
    """Aggregated outcome counts for one scenario."""

    scenario: dict
    counters: Dict[str, int]
    rows: List[MetricRow]

    def row(self, name: str) -> MetricRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(f"no metric named `{name}`")

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "scenario": self.scenario,
                "counters": {k: self.counters[k] for k in sorted(self.counters)},
                "metrics": [asdict(r) for r in self.rows],
            },
            sort_keys=True,
            indent=2,
        )

    def to_csv(self) -> str:
        lines = ["name,estimate,ci_low,ci_high,target,trials"]
        for r in self.rows:
            target = "" if r.target is None else repr(r.target)
            lines.append(f"{r.name},{r.estimate!r},{r.ci_low!r},{r.ci_high!r},{target},{r.count}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_json(text: str) -> "TrialStats":
        doc = json.loads(text)
        rows = [MetricRow(**r) for r in doc["metrics"]]
        return TrialStats(doc["scenario"], doc["counters"], rows)

    @staticmethod
    def rows_from_csv(text: str) -> List[MetricRow]:
        lines = [line for line in text.splitlines() if line]
        rows = []
        for line in lines[1:]:
            name, est, lo, hi, target, count = line.split(",")
            rows.append(
                MetricRow(name, float(est), float(lo), float(hi), None if target == "" else float(target), int(count))
            )
        return rows


def _draw_secrets(scenario: Scenario, rng: np.random.Generator) -> List[List[int]]:
    n, m = scenario.n, scenario.m
    policy = scenario.secrets.policy
    if policy == "explicit":
        return [list(row) for row in scenario.secrets.values]
    if policy == "forced_equal":
        row = [int(b) for b in rng.integers(0, 2, size=m)]
        return [list(row) for _ in range(n)]
    rows = [[int(b) for b in rng.integers(0, 2, size=m)] for _ in range(n)]
    if policy == "forced_unequal":
        while len({tuple(r) for r in rows}) < n:
            rows = [[int(b) for b in rng.integers(0, 2, size=m)] for _ in range(n)]
    return rows


def _extract(t: proto.Transcript) -> Dict[str, int]:
    c: Dict[str, int] = {"trials": 1}

    def bump(key: str, value: int = 1) -> None:
        c[key] = c.get(key, 0) + value

    if t.aborted:
        bump("aborted")
        bump(f"abort_step{t.abort_step}")
        bump(f"abort_{t.abort_cause}")
    else:
        bump("completed")
    for pair, info in t.pair_results.items():
        if t.aborted:
            continue
        bump("pairs_total")
        verdict = info.get("tp1_verdict", info.get("tp_verdict"))
        if info["accepted"] and verdict == info["ground_truth"]:
            bump("pairs_verdict_correct")
    if t.step3 is not None:
        failed = set(t.step3.failures)
        for r, basis in enumerate(t.step3.bases):
            key = "x_check_rounds" if basis == 1 else "z_check_rounds"
            bump(key)
            if r in failed:
                bump(key.replace("rounds", "failures"))
    if t.arbiter is not None:
        bump(f"arbiter_{t.arbiter.lower()}")
    attack = t.attack
    if attack is not None:
        if attack.detected:
            bump("attack_detected")
        bump("attack_bits_guessed", attack.bits_guessed)
        bump("attack_bits_correct", attack.bits_correct)
        for key, value in attack.extras.items():
            bump(f"attack_{key}", value)
        tampered = attack.extras.get("tampered", 0)
        if tampered:
            bump("tamper_runs")
            if attack.detected:
                bump("tamper_runs_detected")
            if attack.extras.get("tampered_distinct", 0) == tampered:
                bump("tamper_distinct_runs")
                if attack.detected:
                    bump("tamper_distinct_runs_detected")
    return c


def _run_one(scenario: Scenario, strategy, trial: int) -> Dict[str, int]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=scenario.seed, spawn_key=(trial,)))
    secrets = _draw_secrets(scenario, rng)
    if scenario.protocol == "proposed":
        t = proto.run_proposed(
            scenario.n,
            scenario.m,
            secrets,
            check_rounds=scenario.effective_check_rounds(),
            decoy_count=scenario.effective_decoy_count(),
            variant=scenario.variant,
            adversary=strategy,
            rng=rng,
            announce_r=scenario.announce_r_vectors,
            decoy_tolerance=scenario.decoy_tolerance,
            record_events=False,
        )
    else:
        t = proto.run_zhang_baseline(
            scenario.m,
            secrets,
            check_rounds=scenario.effective_check_rounds(),
            decoy_count=scenario.effective_decoy_count(),
            adversary=strategy,
            rng=rng,
            decoy_tolerance=scenario.decoy_tolerance,
            record_events=False,
        )
    counters = _extract(t)
    # Exact pairwise identity of the computed result vectors, checked here
    # where the drawn secrets are in hand.
    if not t.aborted and t.r_values:
        source = proto.TP1 if proto.TP1 in t.r_values else proto.TP
        for (i, j), r in t.r_values[source].items():
            expected = tuple(a ^ b for a, b in zip(secrets[i - 1], secrets[j - 1]))
            counters["pairs_r_checked"] = counters.get("pairs_r_checked", 0) + 1
            if tuple(r) == expected:
                counters["pairs_r_exact"] = counters.get("pairs_r_exact", 0) + 1
    return counters


def run_single(scenario: Scenario, with_events: bool = True) -> proto.Transcript:
    """Run exactly one trial with full event recording (for inspection)."""
    scenario.validate()
    strategy = adversaries.strategy_from_config(scenario.adversary.kind, scenario.adversary.params)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=scenario.seed, spawn_key=(0,)))
    secrets = _draw_secrets(scenario, rng)
    if scenario.protocol == "proposed":
        return proto.run_proposed(
            scenario.n,
            scenario.m,
            secrets,
            check_rounds=scenario.effective_check_rounds(),
            decoy_count=scenario.effective_decoy_count(),
            variant=scenario.variant,
            adversary=strategy,
            rng=rng,
            announce_r=scenario.announce_r_vectors,
            decoy_tolerance=scenario.decoy_tolerance,
            record_events=with_events,
        )
    return proto.run_zhang_baseline(
        scenario.m,
        secrets,
        check_rounds=scenario.effective_check_rounds(),
        decoy_count=scenario.effective_decoy_count(),
        adversary=strategy,
        rng=rng,
        decoy_tolerance=scenario.decoy_tolerance,
        record_events=with_events,
    )


def _run_block(scenario: Scenario, start: int, stop: int) -> Dict[str, int]:
    strategy = adversaries.strategy_from_config(scenario.adversary.kind, scenario.adversary.params)
    totals: Dict[str, int] = {}
    for trial in range(start, stop):
        for key, value in _run_one(scenario, strategy, trial).items():
            totals[key] = totals.get(key, 0) + value
    return totals


def _merge(into: Dict[str, int], part: Dict[str, int]) -> None:
    for key, value in part.items():
        into[key] = into.get(key, 0) + value


def _targets(scenario: Scenario) -> Dict[str, float]:
    kind = scenario.adversary.kind
    targets: Dict[str, float] = {}
    l = scenario.effective_decoy_count()
    c = scenario.effective_check_rounds()
    if kind in (adversaries.KIND_EVE, adversaries.KIND_TP2_INTERCEPT):
        targets["detected_step2_rate"] = closed_form("intercept_detection", l)
    elif kind == adversaries.KIND_POSITION_TAMPER and scenario.variant == proto.VARIANT_BROADCAST:
        count = min(int(scenario.adversary.params.get("count", 1)), c)
        targets["detected_step3_rate"] = closed_form("tamper_detection", count)
        targets["tamper_detection_conditional"] = closed_form("tamper_detection", count)
    elif kind == adversaries.KIND_TP1_FAKE_STATE:
        # All-|0> preparation against an all-|0>-vector claim: an X round
        # trips with probability 1/2, a Z round never, so c rounds detect
        # with probability 1 - (3/4)^c.
        params = scenario.adversary.params
        if params.get("true_state", "zeros") == "zeros" and params.get("claimed") is None:
            targets["detected_step3_rate"] = 1.0 - 0.75**c
            targets["x_check_fail_rate"] = 0.5
            targets["z_check_fail_rate"] = 0.0
    return targets


_ROW_DEFS = (
    # (metric name, successes key, denominator key)
    ("abort_rate", "aborted", "trials"),
    ("detected_step2_rate", "abort_step2", "trials"),
    ("detected_step3_rate", "abort_step3", "trials"),
    ("conflict_rate", "abort_step7", "trials"),
    ("completed_rate", "completed", "trials"),
    ("verdict_correct_rate", "pairs_verdict_correct", "pairs_total"),
    ("r_exact_rate", "pairs_r_exact", "pairs_r_checked"),
    ("attack_bit_accuracy", "attack_bits_correct", "attack_bits_guessed"),
    ("attack_legit_bit_accuracy", "attack_legit_bits_correct", "attack_legit_bits_guessed"),
    ("x_check_fail_rate", "x_check_failures", "x_check_rounds"),
    ("z_check_fail_rate", "z_check_failures", "z_check_rounds"),
    ("tamper_detection_conditional", "tamper_distinct_runs_detected", "tamper_distinct_runs"),
)


def run_scenario(scenario: Scenario, jobs: int = 1) -> TrialStats:
    """Run all trials and aggregate.  Same (scenario, seed) => same stats,
    independent of ``jobs``."""
    scenario.validate()
    trials = scenario.trials
    totals: Dict[str, int] = {}
    if jobs <= 1:
        totals = _run_block(scenario, 0, trials)
    else:
        blocks = min(trials, jobs * 4)
        bounds = [round(i * trials / blocks) for i in range(blocks + 1)]
        spans = [(bounds[i], bounds[i + 1]) for i in range(blocks) if bounds[i] < bounds[i + 1]]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_run_block_star, [(scenario, a, b) for a, b in spans]):
                _merge(totals, part)
    targets = _targets(scenario)
    rows: List[MetricRow] = []
    for name, num_key, den_key in _ROW_DEFS:
        denom = totals.get(den_key, 0)
        if denom == 0:
            continue
        num = totals.get(num_key, 0)
        est = num / denom if denom else 0.0
        lo, hi = wilson_interval(num, denom)
        rows.append(MetricRow(name, est, lo, hi, targets.get(name), denom))
    return TrialStats(scenario.to_config(), totals, rows)


def _run_block_star(args) -> Dict[str, int]:
    return _run_block(*args)
