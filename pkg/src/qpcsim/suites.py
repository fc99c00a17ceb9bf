"""The built-in acceptance battery.

``paper_tables`` runs every headline claim of the protocol analysis at desk
scale against its closed-form target and returns one row per check.  Rows
carry only deterministic content (wall-clock durations are reported
separately) so two runs with the same seed serialize byte-identically
regardless of the parallelism used.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .adversaries import (
    KIND_EVE,
    KIND_PARTICIPANT_INFER,
    KIND_POSITION_TAMPER,
    KIND_TP1_FAKE_RESULT,
    KIND_TP1_FAKE_STATE,
    KIND_TP2_FAKE_RESULT,
    KIND_TP2_INTERCEPT,
)
from .errors import ConfigError
from .ghz import (
    Basis,
    GhzSpec,
    OracleRegister,
    all_specs,
    ghz_from_index,
    index_of,
    oracle_outcome_counts,
    pair_xor,
    sample_measurement,
    sample_outcome_counts,
    x_expansion,
)
from .harness import AdversarySpec, Scenario, TrialStats, closed_form, run_scenario
from .protocol import VARIANT_TP2_RELAY

DEFAULT_SEED = 1729
SUITE_NAMES = ("paper_tables",)

TVD_SHOTS = 100_000
TVD_LIMIT = 0.02


@dataclass
class SuiteRow:
    id: str
    name: str
    measured: float
    target: Optional[float]
    tolerance: str
    passed: bool
    info: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "info": self.info,
        }


@dataclass
class SuiteResult:
    name: str
    seed: int
    rows: List[SuiteRow]
    durations: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def row(self, row_id: str) -> SuiteRow:
        for row in self.rows:
            if row.id == row_id:
                return row
        raise KeyError(f"no suite row `{row_id}`")

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "suite": self.name,
                "seed": self.seed,
                "passed": self.passed,
                "rows": [row.to_dict() for row in self.rows],
            },
            sort_keys=True,
            indent=2,
        )

    def to_csv(self) -> str:
        lines = ["id,name,measured,target,tolerance,passed,info"]
        for r in self.rows:
            target = "" if r.target is None else repr(r.target)
            info = r.info.replace(",", ";")
            lines.append(f"{r.id},{r.name},{r.measured!r},{target},{r.tolerance},{r.passed},{info}")
        return "\n".join(lines) + "\n"

    def format_table(self, with_durations: bool = True) -> str:
        lines = []
        header = f"{'id':<22} {'measured':>12} {'target':>12} {'tolerance':<22} {'result':<6}"
        if with_durations:
            header += f" {'secs':>7}"
        lines.append(header)
        lines.append("-" * len(header))
        for r in self.rows:
            target = "" if r.target is None else f"{r.target:.6f}"
            line = f"{r.id:<22} {r.measured:>12.6f} {target:>12} {r.tolerance:<22} {'PASS' if r.passed else 'FAIL':<6}"
            if with_durations:
                secs = self.durations.get(r.id)
                line += f" {secs:>7.2f}" if secs is not None else f" {'':>7}"
            lines.append(line)
            if r.info:
                lines.append(f"    {r.info}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _three_sigma(target: float, count: int) -> float:
    return 3.0 * math.sqrt(max(target * (1.0 - target), 0.0) / count)


def _rate_row(
    row_id: str, name: str, stats: TrialStats, metric: str, target: float, info: str = ""
) -> SuiteRow:
    row = stats.row(metric)
    bound = _three_sigma(target, row.count)
    passed = abs(row.estimate - target) <= bound
    if bound == 0.0:
        tolerance = "exact"
        passed = row.estimate == target
    else:
        tolerance = f"+-{bound:.6f}"
    return SuiteRow(row_id, name, row.estimate, target, tolerance, passed, info)


def _exact_row(row_id: str, name: str, measured: float, target: float, info: str = "") -> SuiteRow:
    return SuiteRow(row_id, name, measured, target, "exact", measured == target, info)


# ---------------------------------------------------------------------------
# Criterion batteries
# ---------------------------------------------------------------------------


def _criterion_1(seed: int, jobs: int) -> List[SuiteRow]:
    """Honest runs: every pairwise result vector equals the XOR of the two
    secrets and every verdict matches ground truth, with zero tolerance."""
    rows = []
    for n in (2, 3, 4, 5):
        scenario = Scenario(protocol="proposed", n=n, m=16, trials=1000, seed=seed * 1000 + n)
        stats = run_scenario(scenario, jobs)
        aborted = stats.counters.get("aborted", 0)
        r_exact = stats.row("r_exact_rate")
        verdicts = stats.row("verdict_correct_rate")
        measured = min(r_exact.estimate, verdicts.estimate, 1.0 if aborted == 0 else 0.0)
        rows.append(
            _exact_row(
                f"1.n{n}",
                f"honest correctness, n={n}",
                measured,
                1.0,
                f"pairs={r_exact.count} aborts={aborted}",
            )
        )
    return rows


def _criterion_2(seed: int, jobs: int) -> List[SuiteRow]:
    """Intercept-resend on one link is caught by the decoy check at
    1 - (3/4)^l."""
    rows = []
    for l in (1, 5, 10, 20):
        scenario = Scenario(
            protocol="proposed",
            n=2,
            m=2,
            decoy_count=l,
            trials=10_000,
            seed=seed * 1000 + 20 + l,
            adversary=AdversarySpec(KIND_EVE, {"links": [1]}),
        )
        stats = run_scenario(scenario, jobs)
        rows.append(
            _rate_row(
                f"2.l{l}",
                f"outsider decoy detection, l={l}",
                stats,
                "detected_step2_rate",
                closed_form("intercept_detection", l),
            )
        )
    return rows


def _criterion_3(seed: int, jobs: int) -> List[SuiteRow]:
    """A verdict flip by either announcer conflicts every time; the same
    flip against the single-announcer baseline is never detected."""
    rows = []
    for kind, label in ((KIND_TP1_FAKE_RESULT, "tp1"), (KIND_TP2_FAKE_RESULT, "tp2")):
        scenario = Scenario(
            protocol="proposed",
            n=3,
            m=8,
            trials=1000,
            seed=seed * 1000 + 50 + (0 if label == "tp1" else 1),
            adversary=AdversarySpec(kind, {}),
        )
        stats = run_scenario(scenario, jobs)
        conflicts = stats.counters.get("abort_step7", 0)
        named = stats.counters.get(f"arbiter_{label}", 0)
        rows.append(
            _exact_row(
                f"3.{label}_flip",
                f"verdict flip by {label.upper()} conflicts",
                stats.row("conflict_rate").estimate,
                1.0,
                f"arbiter named {label.upper()} in {named}/{conflicts} conflicts",
            )
        )
    scenario = Scenario(
        protocol="zhang_baseline",
        n=2,
        m=8,
        trials=1000,
        seed=seed * 1000 + 52,
        adversary=AdversarySpec(KIND_TP1_FAKE_RESULT, {}),
    )
    stats = run_scenario(scenario, jobs)
    wrong_accepted = stats.row("verdict_correct_rate").estimate == 0.0
    rows.append(
        _exact_row(
            "3.baseline_flip",
            "baseline verdict flip undetected",
            stats.row("abort_rate").estimate,
            0.0,
            f"wrong verdict accepted in all completed runs: {wrong_accepted}",
        )
    )
    if not wrong_accepted:
        rows[-1].passed = False
    return rows


def _criterion_4(seed: int, jobs: int) -> List[SuiteRow]:
    """An all-|0> preparation passed off as the all-|0>-vector entangled
    state fails an X check round half the time, so c uniform-basis rounds
    detect it at 1 - (3/4)^c."""
    rows = []
    x_fail = x_total = z_fail = z_total = 0
    for c in (4, 8, 16):
        scenario = Scenario(
            protocol="proposed",
            n=3,
            m=max(c, 4),
            check_rounds=c,
            decoy_count=2,
            trials=10_000,
            seed=seed * 1000 + 60 + c,
            adversary=AdversarySpec(KIND_TP1_FAKE_STATE, {}),
        )
        stats = run_scenario(scenario, jobs)
        target = 1.0 - 0.75**c
        rows.append(
            _rate_row(f"4.c{c}", f"fake preparation detection, c={c}", stats, "detected_step3_rate", target)
        )
        x_fail += stats.counters.get("x_check_failures", 0)
        x_total += stats.counters.get("x_check_rounds", 0)
        z_fail += stats.counters.get("z_check_failures", 0)
        z_total += stats.counters.get("z_check_rounds", 0)
    bound = _three_sigma(0.5, x_total)
    x_rate = x_fail / x_total
    rows.append(
        SuiteRow(
            "4.x_round",
            "per-X-round detection of the fake preparation",
            x_rate,
            0.5,
            f"+-{bound:.6f}",
            abs(x_rate - 0.5) <= bound,
            f"{x_fail}/{x_total} X rounds failed",
        )
    )
    rows.append(
        _exact_row(
            "4.z_round",
            "Z rounds never expose the fake preparation",
            z_fail / z_total,
            0.0,
            f"{z_total} Z rounds",
        )
    )
    return rows


def _criterion_5(seed: int, jobs: int) -> List[SuiteRow]:
    """Substituting broadcast check positions across a two-state preparation
    pair is caught at 1 - (1/2)^l; relaying positions through the checking
    third party removes the attack surface entirely."""
    rows = []
    for l in (1, 4, 8):
        scenario = Scenario(
            protocol="proposed",
            n=3,
            m=16,
            check_rounds=8,
            decoy_count=2,
            trials=10_000,
            seed=seed * 1000 + 80 + l,
            adversary=AdversarySpec(KIND_POSITION_TAMPER, {"count": l, "policy": "paired_specs"}),
        )
        stats = run_scenario(scenario, jobs)
        full = stats.counters.get("tamper_distinct_runs", 0)
        rows.append(
            _rate_row(
                f"5.l{l}",
                f"position-tamper detection, l={l}",
                stats,
                "tamper_detection_conditional",
                closed_form("tamper_detection", l),
                info=f"distinct-pair tampered runs: {full}/{scenario.trials}",
            )
        )
    relay = Scenario(
        protocol="proposed",
        n=3,
        m=16,
        check_rounds=8,
        decoy_count=2,
        variant=VARIANT_TP2_RELAY,
        trials=1000,
        seed=seed * 1000 + 89,
        adversary=AdversarySpec(KIND_POSITION_TAMPER, {"count": 8, "policy": "paired_specs"}),
    )
    stats = run_scenario(relay, jobs)
    completed_correct = min(stats.row("completed_rate").estimate, stats.row("verdict_correct_rate").estimate)
    rows.append(
        _exact_row(
            "5.relay",
            "relay variant unharmed by the tamperer",
            completed_correct,
            1.0,
            f"trials={relay.trials}",
        )
    )
    return rows


def _criterion_6(seed: int, jobs: int) -> List[SuiteRow]:
    """Privacy: a protocol-following participant guesses a victim's secret
    bits at chance unless granted the preparation list (then perfectly);
    the checking third party's intercept records in undetected runs are
    held against the same chance-level target."""
    rows = []
    base = Scenario(
        protocol="proposed",
        n=3,
        m=16,
        trials=700,
        seed=seed * 1000 + 90,
        adversary=AdversarySpec(KIND_PARTICIPANT_INFER, {"attacker": 1, "victim": 2}),
    )
    stats = run_scenario(base, jobs)
    bits = stats.row("attack_bit_accuracy").count
    rows.append(
        _rate_row(
            "6.case1",
            "participant inference without preparation knowledge",
            stats,
            "attack_bit_accuracy",
            0.5,
            info=f"{bits} bits",
        )
    )
    counter = Scenario(
        protocol="proposed",
        n=3,
        m=16,
        trials=700,
        seed=seed * 1000 + 91,
        adversary=AdversarySpec(
            KIND_PARTICIPANT_INFER, {"attacker": 1, "victim": 2, "counterfactual": True}
        ),
    )
    stats = run_scenario(counter, jobs)
    rows.append(
        _exact_row(
            "6.case1_counterfactual",
            "participant inference granted preparation knowledge",
            stats.row("attack_bit_accuracy").estimate,
            1.0,
            f"{stats.row('attack_bit_accuracy').count} bits",
        )
    )
    tp2 = Scenario(
        protocol="proposed",
        n=3,
        m=16,
        check_rounds=2,
        decoy_count=2,
        trials=2600,
        seed=seed * 1000 + 92,
        adversary=AdversarySpec(KIND_TP2_INTERCEPT, {"links": [1], "victim": 1}),
    )
    stats = run_scenario(tp2, jobs)
    bits = stats.row("attack_bit_accuracy").count
    row = _rate_row(
        "6.case3",
        "checking TP's intercept records in undetected runs",
        stats,
        "attack_bit_accuracy",
        0.5,
        info=(
            f"{bits} undetected-run bits; matching-basis intercepts pin the delivered key bit, "
            "so the records-assisted accuracy sits at 3/4 and the idealized 1/2 target is "
            "unreachable; kept red deliberately (see README)"
        ),
    )
    rows.append(row)
    rows.append(
        _rate_row(
            "6.case3_legit_view",
            "checking TP restricted to its legitimate view",
            stats,
            "attack_legit_bit_accuracy",
            0.5,
            info=f"{stats.row('attack_legit_bit_accuracy').count} undetected-run bits",
        )
    )
    return rows


def _criterion_7(seed: int) -> List[SuiteRow]:
    """Total variation distance between the analytic sampler and the exact
    statevector oracle, over every small state, basis, and position subset."""
    worst = 0.0
    worst_combo = ""
    combos = 0
    for n in (2, 3, 4):
        for spec in all_specs(n):
            for basis in (Basis.Z, Basis.X):
                for mask in range(1, 2**n):
                    positions = [p + 1 for p in range(n) if mask & (1 << p)]
                    rng_a = np.random.default_rng(
                        np.random.SeedSequence(entropy=seed, spawn_key=(7, combos, 0))
                    )
                    rng_b = np.random.default_rng(
                        np.random.SeedSequence(entropy=seed, spawn_key=(7, combos, 1))
                    )
                    counts_a = sample_outcome_counts(spec, positions, basis, rng_a, TVD_SHOTS)
                    counts_b = oracle_outcome_counts(spec, positions, basis, rng_b, TVD_SHOTS)
                    tvd = 0.5 * np.abs(counts_a - counts_b).sum() / TVD_SHOTS
                    combos += 1
                    if tvd > worst:
                        worst = float(tvd)
                        worst_combo = f"n={n} index={index_of(spec)} basis={basis.name} positions={positions}"
    return [
        SuiteRow(
            "7",
            "analytic sampler vs statevector oracle (max TVD)",
            worst,
            None,
            f"< {TVD_LIMIT}",
            worst < TVD_LIMIT,
            f"{combos} combinations at {TVD_SHOTS} shots each; worst: {worst_combo}",
        )
    ]


# X expansions printed in the protocol analysis for the three-particle
# states (|000>+|111>)/sqrt(2) and (|010>+|101>)/sqrt(2), plus the
# hand-derived expansion of (|011>+|100>)/sqrt(2), which shares the first
# state's support but not its signs.
_EXPANSIONS = {
    ((0, 0, 0), 0): [((0, 0, 0), 1), ((0, 1, 1), 1), ((1, 0, 1), 1), ((1, 1, 0), 1)],
    ((0, 1, 0), 0): [((0, 0, 0), 1), ((0, 1, 1), -1), ((1, 0, 1), 1), ((1, 1, 0), -1)],
    ((0, 1, 1), 0): [((0, 0, 0), 1), ((0, 1, 1), 1), ((1, 0, 1), -1), ((1, 1, 0), -1)],
}


def _criterion_8(seed: int) -> List[SuiteRow]:
    """Exact algebra: the index bijection round-trips, X expansions match
    the published examples and the oracle sign-for-sign, and the pairwise
    XOR law holds over sampled outcomes without exception."""
    failures = 0
    for n in range(2, 9):
        for i in range(1, 2**n + 1):
            if index_of(ghz_from_index(i, n)) != i:
                failures += 1
    round_trip = _exact_row("8.roundtrip", "index bijection round-trip (n=2..8)", float(failures), 0.0)

    failures = 0
    for (q, delta), expected in _EXPANSIONS.items():
        got = [(t.bits, t.sign) for t in x_expansion(GhzSpec(q, delta))]
        if got != expected:
            failures += 1
    for n in range(2, 7):
        for spec in all_specs(n):
            terms = x_expansion(spec)
            if len(terms) != 2 ** (n - 1):
                failures += 1
            if any(sum(t.bits) % 2 != spec.delta for t in terms):
                failures += 1
            if n <= 5:
                # Hadamard-rotate the oracle state and compare sign-for-sign.
                reg = OracleRegister(spec).clone()
                for p in range(1, n + 1):
                    reg._hadamard(p)
                got = sorted(reg._signs.items())
                want = sorted(
                    (sum(b << (n - 1 - k) for k, b in enumerate(t.bits)), t.sign) for t in terms
                )
                if got != want:
                    failures += 1
    expansion = _exact_row("8.expansion", "X expansions vs published examples and oracle", float(failures), 0.0)

    failures = 0
    four = ghz_from_index(7, 4)
    if pair_xor(four, 1, 2) != 0 or pair_xor(four, 2, 4) != 1 or pair_xor(four, 3, 3) != 0:
        failures += 1
    specs = [ghz_from_index(1, 3), ghz_from_index(5, 3), ghz_from_index(7, 4), ghz_from_index(2, 2)]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(8,)))
    for spec in specs:
        for _ in range(2500):
            outcome = sample_measurement(spec, range(1, spec.n + 1), Basis.Z, rng)
            for i in range(1, spec.n + 1):
                for j in range(i + 1, spec.n + 1):
                    if outcome[i] ^ outcome[j] != pair_xor(spec, i, j):
                        failures += 1
    law = _exact_row("8.pair_xor", "pairwise XOR law over 10^4 sampled outcomes", float(failures), 0.0)
    return [round_trip, expansion, law]


_CRITERIA = (
    ("1", _criterion_1, True),
    ("2", _criterion_2, True),
    ("3", _criterion_3, True),
    ("4", _criterion_4, True),
    ("5", _criterion_5, True),
    ("6", _criterion_6, True),
    ("7", lambda seed, jobs: _criterion_7(seed), False),
    ("8", lambda seed, jobs: _criterion_8(seed), False),
)


def paper_tables(seed: int = DEFAULT_SEED, jobs: int = 1) -> SuiteResult:
    """Run acceptance checks 1-8 and return their rows (deterministic for a
    given seed, independent of ``jobs``)."""
    rows: List[SuiteRow] = []
    durations: Dict[str, float] = {}
    for crit_id, fn, _ in _CRITERIA:
        start = time.perf_counter()
        new_rows = fn(seed, jobs)
        durations[crit_id] = time.perf_counter() - start
        for row in new_rows:
            durations.setdefault(row.id, durations[crit_id] / max(len(new_rows), 1))
        rows.extend(new_rows)
    return SuiteResult("paper_tables", seed, rows, durations)


def paper_tables_with_determinism(seed: int = DEFAULT_SEED, jobs: int = 1) -> SuiteResult:
    """Full battery plus the reproducibility check: the battery is run a
    second time at a different parallelism level and the two serialized
    results must be byte-identical."""
    first = paper_tables(seed, jobs)
    alt_jobs = 2 if jobs != 2 else 1
    start = time.perf_counter()
    second = paper_tables(seed, alt_jobs)
    identical = first.to_json() == second.to_json() and first.to_csv() == second.to_csv()
    row = SuiteRow(
        "9",
        f"byte-identical results across jobs={jobs} and jobs={alt_jobs}",
        1.0 if identical else 0.0,
        1.0,
        "exact",
        identical,
    )
    first.rows.append(row)
    first.durations["9"] = time.perf_counter() - start
    return first


def run_suite(name: str, seed: int = DEFAULT_SEED, jobs: int = 1) -> SuiteResult:
    if name not in SUITE_NAMES:
        raise ConfigError(f"unknown suite `{name}` (available: {', '.join(SUITE_NAMES)})")
    return paper_tables_with_determinism(seed, jobs)
