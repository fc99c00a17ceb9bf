"""The multiparty comparison protocol, its two-party baseline, and the
machinery around one run: transcripts, the cooperative state check, the
cross-check of the two announcers, and the idealized arbiter.

One run is strictly sequential.  Step numbering in transcripts:

1. the first third party prepares 2m shared registers;
2. decoy-protected distribution to every participant, the public decoy
   discussion, and the preparation message to the second third party;
3. cooperative correctness check of randomly chosen registers;
4. each participant Z-measures its retained particles into a key string;
5. masked comparison strings (key XOR secret) go to both third parties;
6. both third parties compute and announce a verdict per pair;
7. participants cross-compare the two announcements.

Aborts carry a machine-readable cause: ``decoy_mismatch`` (step 2),
``state_check_failed`` (step 3), ``announcement_conflict`` (step 7).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .adversaries import NONE, AdversaryStrategy, RunContext
from .ghz import Basis, GhzRegister, GhzSpec, ghz_from_index, pair_xor
from .photons import CarrierSlot, QuantumChannel, generate_decoys, interleave, public_discussion

VARIANT_BROADCAST = "classical_broadcast"
VARIANT_TP2_RELAY = "tp2_relay"
VARIANTS = (VARIANT_BROADCAST, VARIANT_TP2_RELAY)

CAUSE_DECOY = "decoy_mismatch"
CAUSE_STATE_CHECK = "state_check_failed"
CAUSE_CONFLICT = "announcement_conflict"

IDENTICAL = "identical"
DIFFERENT = "different"

TP1 = "TP1"
TP2 = "TP2"
TP = "TP"  # the baseline's single third party

SCHEMA_VERSION = 1


def xor_bits(a: Sequence[int], b: Sequence[int]) -> Tuple[int, ...]:
    if len(a) != len(b):
        raise ValueError("bit vectors must have equal length")
    return tuple(x ^ y for x, y in zip(a, b))


def verdict_for(r: Sequence[int]) -> str:
    return DIFFERENT if any(r) else IDENTICAL


@dataclass(frozen=True)
class Announcement:
    """One third party's published result for one pair."""

    source: str
    pair: Tuple[int, int]
    verdict: str
    r: Optional[Tuple[int, ...]] = None


def cross_check(a1: Announcement, a2: Announcement) -> bool:
    """True iff the two announcements agree (verdicts, and vectors if both
    were published); disagreement means one announcer lied."""
    if a1.pair != a2.pair:
        raise ValueError("announcements cover different pairs")
    if a1.verdict != a2.verdict:
        return False
    if a1.r is not None and a2.r is not None and a1.r != a2.r:
        return False
    return True


@dataclass(frozen=True)
class Step3Report:
    """Verdict of the cooperative state check, round by round."""

    passed: bool
    failures: Tuple[int, ...]
    bases: Tuple[int, ...]


def step3_check(
    claimed: Sequence[GhzSpec],
    bases: Sequence[Basis],
    outcomes: Sequence[Dict[int, int]],
) -> Step3Report:
    """Consistency check of joint outcomes against claimed preparations.

    A Z round must see every particle agree with the claimed bit vector up
    to one global flip; an X round must see a |-> count with the claimed
    phase parity.
    """
    if not len(claimed) == len(bases) == len(outcomes):
        raise ValueError("claimed states, bases, and outcomes must align")
    failures: List[int] = []
    for r, (spec, basis, outcome) in enumerate(zip(claimed, bases, outcomes)):
        try:
            bits = [outcome[p] for p in range(1, spec.n + 1)]
        except KeyError as exc:
            raise ValueError(f"round {r} is missing particle {exc.args[0]}") from exc
        if basis == Basis.Z:
            flips = {b ^ qb for b, qb in zip(bits, spec.q)}
            ok = len(flips) == 1
        else:
            ok = sum(bits) % 2 == spec.delta
        if not ok:
            failures.append(r)
    return Step3Report(not failures, tuple(failures), tuple(int(b) for b in bases))


def arbiter_identify(
    comparison_specs: Sequence[GhzSpec],
    comps: Dict[int, Sequence[int]],
    tp1_announcements: Dict[Tuple[int, int], Announcement],
    tp2_announcements: Dict[Tuple[int, int], Announcement],
) -> Optional[str]:
    """Name the announcer whose verdicts contradict the committed preparation.

    The arbiter holds a tamper-proof commitment to the preparation list and
    the submitted masked strings, so it can recompute every pairwise verdict
    itself.  Returns "TP1", "TP2", "both", or None when both match.
    """
    liars: set = set()
    for pair in sorted(tp1_announcements):
        i, j = pair
        t = tuple(pair_xor(spec, i, j) for spec in comparison_specs)
        r = xor_bits(xor_bits(t, comps[i]), comps[j])
        expected = verdict_for(r)
        if tp1_announcements[pair].verdict != expected:
            liars.add(TP1)
        if tp2_announcements[pair].verdict != expected:
            liars.add(TP2)
    if not liars:
        return None
    return "both" if len(liars) == 2 else liars.pop()


def _state_to_dict(state: object) -> dict:
    if isinstance(state, GhzSpec):
        return {"kind": "ghz", **state.to_dict()}
    return {"kind": "product", "bits": "".join(str(b) for b in state)}


class Transcript:
    """Ordered event record of one run plus its outcome summary."""

    def __init__(self, protocol: str, params: dict, record_events: bool = True) -> None:
        self.protocol = protocol
        self.params = params
        self.record_events = record_events
        self.events: List[dict] = []
        self.aborted = False
        self.abort_step: Optional[int] = None
        self.abort_cause: Optional[str] = None
        self.claimed_specs: List[GhzSpec] = []
        self.true_states: List[object] = []
        self.checked_positions: List[int] = []
        self.comparison_positions: List[int] = []
        self.keys: Dict[int, Tuple[int, ...]] = {}
        self.comps: Dict[int, Tuple[int, ...]] = {}
        self.announcements: Dict[str, Dict[Tuple[int, int], Announcement]] = {}
        self.r_values: Dict[str, Dict[Tuple[int, int], Tuple[int, ...]]] = {}
        self.pair_results: Dict[Tuple[int, int], dict] = {}
        self.step3: Optional[Step3Report] = None
        self.decoy_checks: List[dict] = []
        self.arbiter: Optional[str] = None
        self.attack = None

    def add(self, step: int, actor: str, kind: str, **payload) -> None:
        if self.record_events:
            self.events.append({"step": step, "actor": actor, "kind": kind, "payload": payload})

    def mark_abort(self, step: int, cause: str) -> None:
        self.aborted = True
        self.abort_step = step
        self.abort_cause = cause
        self.add(step, "protocol", "abort", cause=cause)

    @property
    def completed(self) -> bool:
        return not self.aborted

    def to_dict(self) -> dict:
        pair_key = lambda pair: f"{pair[0]}-{pair[1]}"  # noqa: E731
        return {
            "schema_version": SCHEMA_VERSION,
            "protocol": self.protocol,
            "params": self.params,
            "events": self.events,
            "result": {
                "aborted": self.aborted,
                "abort_step": self.abort_step,
                "abort_cause": self.abort_cause,
                "checked_positions": list(self.checked_positions),
                "comparison_positions": list(self.comparison_positions),
                "claimed_states": [s.to_dict() for s in self.claimed_specs],
                "true_states": [_state_to_dict(s) for s in self.true_states],
                "keys": {str(k): "".join(map(str, v)) for k, v in sorted(self.keys.items())},
                "comparisons": {str(k): "".join(map(str, v)) for k, v in sorted(self.comps.items())},
                "announcements": {
                    source: {
                        pair_key(p): {"verdict": a.verdict, "r": None if a.r is None else "".join(map(str, a.r))}
                        for p, a in sorted(anns.items())
                    }
                    for source, anns in sorted(self.announcements.items())
                },
                "pairs": {pair_key(p): info for p, info in sorted(self.pair_results.items())},
                "arbiter": self.arbiter,
                "decoy_checks": self.decoy_checks,
            },
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _validate_common(n: int, m: int, secrets: Sequence[Sequence[int]]) -> Tuple[Tuple[int, ...], ...]:
    if n < 2:
        raise ValueError("need at least two participants")
    if m < 1:
        raise ValueError("secret length m must be positive")
    if len(secrets) != n:
        raise ValueError(f"expected {n} secrets, got {len(secrets)}")
    fixed = tuple(tuple(int(b) for b in s) for s in secrets)
    for idx, s in enumerate(fixed):
        if len(s) != m or any(b not in (0, 1) for b in s):
            raise ValueError(f"secret {idx + 1} must be {m} bits")
    return fixed


def run_proposed(
    n: int,
    m: int,
    secrets: Sequence[Sequence[int]],
    *,
    check_rounds: Optional[int] = None,
    decoy_count: Optional[int] = None,
    variant: str = VARIANT_BROADCAST,
    adversary: Optional[AdversaryStrategy] = None,
    rng: np.random.Generator,
    announce_r: bool = False,
    decoy_tolerance: int = 0,
    record_events: bool = True,
) -> Transcript:
    """One full run of the two-watchdog multiparty comparison."""
    secrets = _validate_common(n, m, secrets)
    c = m if check_rounds is None else check_rounds
    if not 0 <= c <= m:
        raise ValueError(f"check rounds must be in 0..m={m}, got {c}")
    l = 2 * m if decoy_count is None else decoy_count
    if l < 0:
        raise ValueError("decoy count must be nonnegative")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    strategy = adversary or NONE
    run = strategy.start_run()
    total = 2 * m

    t = Transcript(
        "proposed",
        {"n": n, "m": m, "check_rounds": c, "decoy_count": l, "variant": variant, "adversary": strategy.kind},
        record_events,
    )

    # Step 1: prepare 2m shared registers (or whatever the preparer fakes).
    prepared = run.override_preparation(n, total, rng)
    if prepared is None:
        specs = [ghz_from_index(int(i), n) for i in rng.integers(1, 2**n + 1, size=total)]
        registers: List[object] = [GhzRegister(s) for s in specs]
        true_states: List[object] = list(specs)
        claimed = list(specs)
    else:
        registers, true_states, claimed = prepared
    t.true_states = true_states
    t.claimed_specs = claimed
    t.add(1, TP1, "prepare", registers=total)

    # Step 2: decoy-protected distribution and the public discussion.
    link_slots: Dict[int, List[object]] = {}
    link_carrier_slots: Dict[int, List[int]] = {}
    failed_decoy = False
    for k in range(1, n + 1):
        carriers = [CarrierSlot(registers[p], p, k) for p in range(total)]
        decoys = generate_decoys(l, rng)
        merged, decoy_positions = interleave(carriers, decoys, rng)
        channel = QuantumChannel(TP1, f"P{k}", run.taps(k))
        delivered = channel.transmit(merged, rng)
        link_slots[k] = delivered
        link_carrier_slots[k] = [
            idx for idx, slot in enumerate(delivered) if not slot.is_decoy
        ]
        t.add(2, TP1, "quantum_send", to=f"P{k}", carriers=total, decoys=l)
        bases = [d.basis for d in decoys]
        results = [
            delivered[pos - 1].measure(bases[idx], rng) for idx, pos in enumerate(decoy_positions)
        ]
        report = public_discussion(bases, results, decoys, tolerance=decoy_tolerance)
        t.decoy_checks.append(
            {"participant": k, "passed": report.passed, "mismatches": report.mismatches, "total": report.total}
        )
        t.add(2, f"P{k}", "decoy_check", passed=report.passed, mismatches=report.mismatches)
        if not report.passed:
            failed_decoy = True
    if failed_decoy:
        t.mark_abort(2, CAUSE_DECOY)
        return _finish(t, run, n, m, secrets, claimed, true_states, None, {}, {}, link_carrier_slots, rng)
    t.add(2, TP1, "initial_states", to=TP2, count=len(claimed))

    # Step 3: cooperative correctness check of c randomly chosen registers.
    check_positions: List[int] = []
    received_positions: List[int] = []
    if c > 0:
        check_positions = sorted(int(p) for p in rng.choice(total, size=c, replace=False))
        if variant == VARIANT_BROADCAST:
            # P1's broadcast to the other participants rides the plain
            # classical channel and is the only thing a tamperer can touch;
            # TP2 always gets the true list over its authenticated channel.
            received_positions = run.tamper_positions(check_positions, total, rng)
        else:
            received_positions = list(check_positions)
        t.add(3, "P1", "check_positions", positions=check_positions, variant=variant)
        check_bases = [Basis(int(b)) for b in rng.integers(0, 2, size=c)]
        t.add(3, "P2", "check_bases", bases=[int(b) for b in check_bases])
        outcomes: List[Dict[int, int]] = []
        for r in range(c):
            outcome: Dict[int, int] = {}
            own = link_slots[1][link_carrier_slots[1][check_positions[r]]]
            outcome[1] = own.measure(check_bases[r], rng)
            for k in range(2, n + 1):
                slot = link_slots[k][link_carrier_slots[k][received_positions[r]]]
                outcome[k] = slot.measure(check_bases[r], rng)
            outcomes.append(outcome)
            t.add(3, "all", "check_measurement", round=r, outcome=outcome)
        report3 = step3_check([claimed[p] for p in check_positions], check_bases, outcomes)
        t.step3 = report3
        t.checked_positions = check_positions
        t.add(3, TP2, "check_verdict", passed=report3.passed, failures=list(report3.failures))
        if not report3.passed:
            t.mark_abort(3, CAUSE_STATE_CHECK)
            return _finish(t, run, n, m, secrets, claimed, true_states, None, {}, {}, link_carrier_slots, rng)

    # Step 4: Z-measure retained registers into key strings.  The first m
    # unchecked registers carry the comparison; with c < m the surplus is
    # simply never used.  Each participant works from the position list it
    # believes, which under tampering may disagree with the canonical one.
    checked_set = set(check_positions)
    canonical = [p for p in range(total) if p not in checked_set][:m]
    t.comparison_positions = canonical
    believed_sets = {1: checked_set}
    for k in range(2, n + 1):
        believed_sets[k] = set(received_positions) if c > 0 else set()
    keys: Dict[int, Tuple[int, ...]] = {}
    comps: Dict[int, Tuple[int, ...]] = {}
    for k in range(1, n + 1):
        believed = [p for p in range(total) if p not in believed_sets[k]][:m]
        bits = tuple(
            link_slots[k][link_carrier_slots[k][p]].measure(Basis.Z, rng) for p in believed
        )
        keys[k] = bits
        comps[k] = xor_bits(bits, secrets[k - 1])
        t.add(4, f"P{k}", "key_measurement", positions=believed)
        t.add(5, f"P{k}", "comparison_submitted", to=[TP1, TP2])
    t.keys = keys
    t.comps = comps

    # Step 6: both third parties compute and announce a verdict per pair.
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    t.announcements = {TP1: {}, TP2: {}}
    t.r_values = {TP1: {}, TP2: {}}
    for announcer in (TP1, TP2):
        for pair in pairs:
            i, j = pair
            tvec = tuple(pair_xor(claimed[p], i, j) for p in canonical)
            r = xor_bits(xor_bits(tvec, comps[i]), comps[j])
            verdict = run.flip_verdict(announcer, pair, verdict_for(r))
            announcement = Announcement(announcer, pair, verdict, r if announce_r else None)
            t.announcements[announcer][pair] = announcement
            t.r_values[announcer][pair] = r
            t.add(6, announcer, "announcement", pair=list(pair), verdict=verdict)

    # Step 7: participants cross-compare the two announcements.
    conflict = False
    for pair in pairs:
        a1 = t.announcements[TP1][pair]
        a2 = t.announcements[TP2][pair]
        accepted = cross_check(a1, a2)
        truth = secrets[pair[0] - 1] == secrets[pair[1] - 1]
        t.pair_results[pair] = {
            "tp1_verdict": a1.verdict,
            "tp2_verdict": a2.verdict,
            "accepted": accepted,
            "ground_truth": IDENTICAL if truth else DIFFERENT,
        }
        t.add(7, "participants", "cross_check", pair=list(pair), accepted=accepted)
        if not accepted:
            conflict = True
    if conflict:
        t.mark_abort(7, CAUSE_CONFLICT)
        t.arbiter = arbiter_identify(
            [claimed[p] for p in canonical], comps, t.announcements[TP1], t.announcements[TP2]
        )
        t.add(7, "Arbiter", "liar_identified", liar=t.arbiter)
    return _finish(
        t, run, n, m, secrets, claimed, true_states, tuple(canonical), keys, comps, link_carrier_slots, rng
    )


def _finish(
    t: Transcript,
    run,
    n: int,
    m: int,
    secrets,
    claimed,
    true_states,
    comparison_positions,
    keys,
    comps,
    link_carrier_slots,
    rng,
) -> Transcript:
    ctx = RunContext(
        n=n,
        m=m,
        secrets=secrets,
        claimed_specs=claimed,
        true_states=true_states,
        comparison_positions=comparison_positions,
        keys=keys,
        comps=comps,
        aborted=t.aborted,
        abort_step=t.abort_step,
        link_carrier_slots=link_carrier_slots,
        rng=rng,
    )
    t.attack = run.finalize(ctx)
    return t


def run_zhang_baseline(
    m: int,
    secrets: Sequence[Sequence[int]],
    *,
    check_rounds: int = 0,
    decoy_count: Optional[int] = None,
    adversary: Optional[AdversaryStrategy] = None,
    rng: np.random.Generator,
    decoy_tolerance: int = 0,
    record_events: bool = True,
) -> Transcript:
    """One run of the single-third-party two-party baseline.

    The single helper prepares Bell pairs drawn from {(|00>+|11>)/sqrt(2),
    (|01>-|10>)/sqrt(2)}, the participants XOR their masked strings together
    before submission, and the helper alone announces the verdict.  There is
    no second announcer, so a flipped verdict is simply accepted.

    The helper prepares m + check_rounds pairs so the optional state check
    (which consumes pairs and needs the participant-to-participant
    authenticated channel that strangers lack) leaves m for comparison.
    """
    secrets = _validate_common(2, m, secrets)
    if check_rounds < 0:
        raise ValueError("check rounds must be nonnegative")
    l = m if decoy_count is None else decoy_count
    if l < 0:
        raise ValueError("decoy count must be nonnegative")
    strategy = adversary or NONE
    run = strategy.start_run()
    total = m + check_rounds

    t = Transcript(
        "zhang_baseline",
        {"n": 2, "m": m, "check_rounds": check_rounds, "decoy_count": l, "adversary": strategy.kind},
        record_events,
    )

    bell_specs = (GhzSpec((0, 0), 0), GhzSpec((0, 1), 1))
    specs = [bell_specs[int(b)] for b in rng.integers(0, 2, size=total)]
    registers = [GhzRegister(s) for s in specs]
    t.true_states = list(specs)
    t.claimed_specs = list(specs)
    t.add(1, TP, "prepare", registers=total)

    link_slots: Dict[int, List[object]] = {}
    link_carrier_slots: Dict[int, List[int]] = {}
    failed_decoy = False
    for k in (1, 2):
        carriers = [CarrierSlot(registers[p], p, k) for p in range(total)]
        decoys = generate_decoys(l, rng)
        merged, decoy_positions = interleave(carriers, decoys, rng)
        channel = QuantumChannel(TP, f"P{k}", run.taps(k))
        delivered = channel.transmit(merged, rng)
        link_slots[k] = delivered
        link_carrier_slots[k] = [idx for idx, slot in enumerate(delivered) if not slot.is_decoy]
        bases = [d.basis for d in decoys]
        results = [
            delivered[pos - 1].measure(bases[idx], rng) for idx, pos in enumerate(decoy_positions)
        ]
        report = public_discussion(bases, results, decoys, tolerance=decoy_tolerance)
        t.decoy_checks.append(
            {"participant": k, "passed": report.passed, "mismatches": report.mismatches, "total": report.total}
        )
        t.add(2, f"P{k}", "decoy_check", passed=report.passed, mismatches=report.mismatches)
        if not report.passed:
            failed_decoy = True
    if failed_decoy:
        t.mark_abort(2, CAUSE_DECOY)
        return _finish(t, run, 2, m, secrets, t.claimed_specs, t.true_states, None, {}, {}, link_carrier_slots, rng)

    # Optional state check; requires the direct authenticated channel the
    # baseline assumes participants share.
    check_positions: List[int] = []
    if check_rounds > 0:
        check_positions = sorted(int(p) for p in rng.choice(total, size=check_rounds, replace=False))
        check_bases = [Basis(int(b)) for b in rng.integers(0, 2, size=check_rounds)]
        outcomes = []
        for r, pos in enumerate(check_positions):
            outcome = {
                1: link_slots[1][link_carrier_slots[1][pos]].measure(check_bases[r], rng),
                2: link_slots[2][link_carrier_slots[2][pos]].measure(check_bases[r], rng),
            }
            outcomes.append(outcome)
        report3 = step3_check([specs[p] for p in check_positions], check_bases, outcomes)
        t.step3 = report3
        t.checked_positions = check_positions
        t.add(4, "P1+P2", "state_check", passed=report3.passed, failures=list(report3.failures))
        if not report3.passed:
            t.mark_abort(4, CAUSE_STATE_CHECK)
            return _finish(t, run, 2, m, secrets, t.claimed_specs, t.true_states, None, {}, {}, link_carrier_slots, rng)

    checked_set = set(check_positions)
    comparison = [p for p in range(total) if p not in checked_set][:m]
    t.comparison_positions = comparison
    keys: Dict[int, Tuple[int, ...]] = {}
    comps: Dict[int, Tuple[int, ...]] = {}
    for k in (1, 2):
        bits = tuple(link_slots[k][link_carrier_slots[k][p]].measure(Basis.Z, rng) for p in comparison)
        keys[k] = bits
        comps[k] = xor_bits(bits, secrets[k - 1])
        t.add(5, f"P{k}", "key_measurement", positions=comparison)
    t.keys = keys
    t.comps = comps
    combined = xor_bits(comps[1], comps[2])
    t.add(6, "P1+P2", "comparison_submitted", to=TP)

    c_t = tuple(pair_xor(specs[p], 1, 2) for p in comparison)
    r = xor_bits(c_t, combined)
    verdict = run.flip_verdict(TP, (1, 2), verdict_for(r))
    announcement = Announcement(TP, (1, 2), verdict)
    t.announcements = {TP: {(1, 2): announcement}}
    t.r_values = {TP: {(1, 2): r}}
    t.add(7, TP, "announcement", pair=[1, 2], verdict=verdict)
    truth = secrets[0] == secrets[1]
    # No second announcer exists, so whatever the helper says is final.
    t.pair_results[(1, 2)] = {
        "tp_verdict": verdict,
        "accepted": True,
        "ground_truth": IDENTICAL if truth else DIFFERENT,
    }
    return _finish(
        t, run, 2, m, secrets, t.claimed_specs, t.true_states, tuple(comparison), keys, comps, link_carrier_slots, rng
    )
