"""Pluggable attack strategies.

A strategy is configuration plus a factory for per-run handles.  Handles
hook into a protocol run at fixed points: register preparation, quantum
channel taps, the classical position broadcast, and result announcements.
After the run the handle is asked to turn whatever it recorded into an
``AttackOutcome`` (detection flag plus the attacker's per-bit guessing
record against a victim's secret).

Guessing accounts only for what the attacker can actually see: its own
measurement records, its legitimate role knowledge, and all public
classical traffic (announced decoy positions/bases, check positions, the
masked comparison strings, announcements).  Bits are only scored on runs
the attack survived undetected; a detected run contributes detection
statistics and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .ghz import Basis, GhzRegister, GhzSpec, ProductRegister, pair_xor

TP1 = "TP1"
TP2 = "TP2"

KIND_NONE = "none"
KIND_EVE = "eve_intercept_resend"
KIND_TP1_FAKE_STATE = "tp1_fake_initial_state"
KIND_TP1_FAKE_RESULT = "tp1_fake_result"
KIND_TP2_FAKE_RESULT = "tp2_fake_result"
KIND_TP2_INTERCEPT = "tp2_intercept"
KIND_PARTICIPANT_INFER = "participant_infer"
KIND_POSITION_TAMPER = "classical_position_tamper"

ALL_KINDS = (
    KIND_NONE,
    KIND_EVE,
    KIND_TP1_FAKE_STATE,
    KIND_TP1_FAKE_RESULT,
    KIND_TP2_FAKE_RESULT,
    KIND_TP2_INTERCEPT,
    KIND_PARTICIPANT_INFER,
    KIND_POSITION_TAMPER,
)


@dataclass
class AttackOutcome:
    """What a strategy achieved in one run."""

    kind: str
    detected: bool
    detection_step: Optional[int]
    bits_guessed: int = 0
    bits_correct: int = 0
    extras: Dict[str, int] = field(default_factory=dict)


@dataclass
class RunContext:
    """Read-only view of a finished (or aborted) run, handed to finalize."""

    n: int
    m: int
    secrets: Tuple[Tuple[int, ...], ...]
    claimed_specs: List[GhzSpec]
    true_states: List[object]  # GhzSpec, or a bit tuple for a product preparation
    comparison_positions: Optional[Tuple[int, ...]]
    keys: Dict[int, Tuple[int, ...]]
    comps: Dict[int, Tuple[int, ...]]
    aborted: bool
    abort_step: Optional[int]
    link_carrier_slots: Dict[int, List[int]]
    rng: np.random.Generator


class RunHandle:
    """Per-run hook set; the defaults do nothing and draw no randomness."""

    strategy: "AdversaryStrategy"

    def override_preparation(self, n: int, count: int, rng: np.random.Generator):
        """Return (registers, true_states, claimed_specs) or None for honest."""
        return None

    def taps(self, link: int) -> Sequence:
        return ()

    def tamper_positions(
        self, true_positions: List[int], total: int, rng: np.random.Generator
    ) -> List[int]:
        return list(true_positions)

    def flip_verdict(self, announcer: str, pair: Tuple[int, int], verdict: str) -> str:
        return verdict

    def finalize(self, ctx: RunContext) -> Optional[AttackOutcome]:
        return None


class AdversaryStrategy:
    """Base strategy: configuration shared across trials."""

    kind = KIND_NONE

    def start_run(self) -> RunHandle:
        return _NOOP_HANDLE


_NOOP_HANDLE = RunHandle()
NONE = AdversaryStrategy()


def _flip(verdict: str) -> str:
    from .protocol import DIFFERENT, IDENTICAL  # local import to avoid a cycle

    return DIFFERENT if verdict == IDENTICAL else IDENTICAL


def _coin(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2))


# ---------------------------------------------------------------------------
# Intercept-resend taps (outside Eve, and TP2 acting as one)
# ---------------------------------------------------------------------------


class _InterceptHandle(RunHandle):
    def __init__(self, strategy: "EveInterceptResend") -> None:
        self.strategy = strategy
        self.records: Dict[int, List[Tuple[int, int]]] = {}

    def taps(self, link: int):
        if link not in self.strategy.links:
            return ()

        def tap(slots, rng):
            bases = rng.integers(0, 2, size=len(slots))
            rec = []
            for slot, b in zip(slots, bases):
                bit = slot.intercept(Basis(int(b)), rng)
                rec.append((int(b), int(bit)))
            self.records[link] = rec

        return (tap,)

    def _guess_key_bit(self, ctx: RunContext, position: int) -> Optional[int]:
        """Best key-bit guess for the victim from records + public traffic."""
        victim = self.strategy.victim
        if self.strategy.use_spec_knowledge:
            # A third party legitimately knows the claimed preparations, so
            # any matching-basis intercept on any tapped link reveals the
            # register's branch and with it every participant's key bit.
            spec = ctx.claimed_specs[position]
            for link in self.strategy.links:
                rec = self.records.get(link)
                if rec is None:
                    continue
                basis, bit = rec[ctx.link_carrier_slots[link][position]]
                if basis == int(Basis.Z):
                    branch = bit ^ spec.q[link - 1]
                    return spec.q[victim - 1] ^ branch
            return None
        # A stranger has no preparation knowledge: only a matching-basis
        # intercept on the victim's own link pins that key bit.
        rec = self.records.get(victim)
        if rec is None:
            return None
        basis, bit = rec[ctx.link_carrier_slots[victim][position]]
        if basis == int(Basis.Z):
            return bit
        return None

    def finalize(self, ctx: RunContext) -> AttackOutcome:
        out = AttackOutcome(self.strategy.kind, ctx.aborted, ctx.abort_step)
        victim = self.strategy.victim
        if ctx.aborted or victim is None or ctx.comparison_positions is None:
            return out
        secret = ctx.secrets[victim - 1]
        comp = ctx.comps[victim]
        hits = 0
        legit_hits = 0
        for idx, position in enumerate(ctx.comparison_positions):
            k_hat = self._guess_key_bit(ctx, position)
            if k_hat is None:
                k_hat = _coin(ctx.rng)
            if (k_hat ^ comp[idx]) == secret[idx]:
                hits += 1
            if self.strategy.use_spec_knowledge:
                # Same guess made from the legitimate view alone (no records).
                if (_coin(ctx.rng) ^ comp[idx]) == secret[idx]:
                    legit_hits += 1
        out.bits_guessed = len(ctx.comparison_positions)
        out.bits_correct = hits
        if self.strategy.use_spec_knowledge:
            out.extras["legit_bits_guessed"] = len(ctx.comparison_positions)
            out.extras["legit_bits_correct"] = legit_hits
        return out


@dataclass
class EveInterceptResend(AdversaryStrategy):
    """Measure every slot of the tapped links in a random basis and resend."""

    links: Tuple[int, ...] = (1,)
    victim: Optional[int] = None
    kind = KIND_EVE
    use_spec_knowledge = False

    def start_run(self) -> RunHandle:
        return _InterceptHandle(self)


@dataclass
class Tp2Intercept(EveInterceptResend):
    """The checking third party running the same intercept-resend attack.

    Identical channel behavior to an outside eavesdropper; the difference is
    that its guessing may combine intercept records with the preparation
    list it legitimately receives.
    """

    kind = KIND_TP2_INTERCEPT
    use_spec_knowledge = True


# ---------------------------------------------------------------------------
# Dishonest preparer
# ---------------------------------------------------------------------------


class _FakeStateHandle(RunHandle):
    def __init__(self, strategy: "Tp1FakeInitialState") -> None:
        self.strategy = strategy

    def override_preparation(self, n: int, count: int, rng: np.random.Generator):
        claimed = self.strategy.claimed or GhzSpec((0,) * n, 0)
        if claimed.n != n:
            raise ConfigError(f"claimed state has {claimed.n} particles, protocol has {n}")
        true_state = self.strategy.true_state
        if true_state == "zeros":
            bits = (0,) * n
            registers = [ProductRegister(bits) for _ in range(count)]
            true_states: List[object] = [bits] * count
        else:
            if true_state.n != n:
                raise ConfigError(f"true state has {true_state.n} particles, protocol has {n}")
            registers = [GhzRegister(true_state) for _ in range(count)]
            true_states = [true_state] * count
        return registers, true_states, [claimed] * count

    def finalize(self, ctx: RunContext) -> AttackOutcome:
        out = AttackOutcome(self.strategy.kind, ctx.aborted, ctx.abort_step)
        if ctx.aborted or ctx.comparison_positions is None:
            return out
        # The preparer knows exactly what it handed out.  A product
        # preparation fixes every key bit; a wrong entangled preparation
        # still hides the branch, leaving it guessing.
        hits = 0
        bits = 0
        for participant in range(1, ctx.n + 1):
            secret = ctx.secrets[participant - 1]
            comp = ctx.comps[participant]
            for idx, position in enumerate(ctx.comparison_positions):
                true = ctx.true_states[position]
                if isinstance(true, GhzSpec):
                    k_hat = _coin(ctx.rng)
                else:
                    k_hat = true[participant - 1]
                hits += int((k_hat ^ comp[idx]) == secret[idx])
                bits += 1
        out.bits_guessed = bits
        out.bits_correct = hits
        return out


@dataclass
class Tp1FakeInitialState(AdversaryStrategy):
    """Distribute one (possibly unentangled) state while claiming another."""

    true_state: object = "zeros"  # "zeros" or a GhzSpec
    claimed: Optional[GhzSpec] = None
    kind = KIND_TP1_FAKE_STATE

    def start_run(self) -> RunHandle:
        return _FakeStateHandle(self)


# ---------------------------------------------------------------------------
# Fake announcements
# ---------------------------------------------------------------------------


class _FakeResultHandle(RunHandle):
    def __init__(self, strategy: "TpFakeResult") -> None:
        self.strategy = strategy

    def flip_verdict(self, announcer: str, pair: Tuple[int, int], verdict: str) -> str:
        # The baseline has a single announcer ("TP"), which any fake-result
        # strategy targets.
        if announcer != self.strategy.announcer and announcer != "TP":
            return verdict
        pairs = self.strategy.pairs
        if pairs != "all" and tuple(pair) not in pairs:
            return verdict
        return _flip(verdict)

    def finalize(self, ctx: RunContext) -> AttackOutcome:
        return AttackOutcome(self.strategy.kind, ctx.aborted, ctx.abort_step)


@dataclass
class TpFakeResult(AdversaryStrategy):
    """Announce the opposite verdict for the chosen pairs."""

    announcer: str = TP1
    pairs: object = "all"  # "all" or a collection of (i, j) tuples

    def __post_init__(self) -> None:
        self.kind = KIND_TP2_FAKE_RESULT if self.announcer == TP2 else KIND_TP1_FAKE_RESULT
        if self.pairs != "all":
            self.pairs = {tuple(p) for p in self.pairs}

    def start_run(self) -> RunHandle:
        return _FakeResultHandle(self)


# ---------------------------------------------------------------------------
# Inferring participant
# ---------------------------------------------------------------------------


class _InferHandle(RunHandle):
    def __init__(self, strategy: "ParticipantInfer") -> None:
        self.strategy = strategy

    def finalize(self, ctx: RunContext) -> AttackOutcome:
        out = AttackOutcome(self.strategy.kind, ctx.aborted, ctx.abort_step)
        if ctx.aborted or ctx.comparison_positions is None:
            return out
        attacker = self.strategy.attacker
        victim = self.strategy.victim
        own = ctx.keys[attacker]
        comp = ctx.comps[victim]
        secret = ctx.secrets[victim - 1]
        hits = 0
        for idx, position in enumerate(ctx.comparison_positions):
            k_hat = own[idx]
            if self.strategy.counterfactual:
                true = ctx.true_states[position]
                if not isinstance(true, GhzSpec):
                    raise ValueError("counterfactual inference needs an entangled preparation")
                k_hat ^= pair_xor(true, attacker, victim)
            hits += int((k_hat ^ comp[idx]) == secret[idx])
        out.bits_guessed = len(ctx.comparison_positions)
        out.bits_correct = hits
        return out


@dataclass
class ParticipantInfer(AdversaryStrategy):
    """A participant guessing another's key from its own outcomes.

    Follows the protocol exactly; the only question is how well its own
    measured bits predict the victim's.  When ``counterfactual`` is set the
    attacker is additionally granted the preparation list it is not
    supposed to have, which turns guessing into computation.
    """

    attacker: int = 1
    victim: int = 2
    counterfactual: bool = False
    kind = KIND_PARTICIPANT_INFER

    def start_run(self) -> RunHandle:
        return _InferHandle(self)


# ---------------------------------------------------------------------------
# Classical-channel position tampering
# ---------------------------------------------------------------------------


POLICY_PAIRED = "paired_specs"
POLICY_RANDOM = "random"


class _TamperHandle(RunHandle):
    def __init__(self, strategy: "ClassicalPositionTamper") -> None:
        self.strategy = strategy
        self.tampered: List[Tuple[int, int, int]] = []  # (round, true pos, substituted pos)

    def override_preparation(self, n: int, count: int, rng: np.random.Generator):
        if self.strategy.policy != POLICY_PAIRED:
            return None
        pair = self.strategy.spec_pair or (
            GhzSpec((0,) * n, 0),
            GhzSpec((0,) + (1,) * (n - 1), 0),
        )
        for spec in pair:
            if spec.n != n:
                raise ConfigError(f"tamper pair state has {spec.n} particles, protocol has {n}")
        specs = [pair[p % 2] for p in range(count)]
        return [GhzRegister(s) for s in specs], list(specs), list(specs)

    def tamper_positions(
        self, true_positions: List[int], total: int, rng: np.random.Generator
    ) -> List[int]:
        rounds_total = len(true_positions)
        wanted = min(self.strategy.count, rounds_total)
        if wanted == 0:
            return list(true_positions)
        rounds = sorted(int(r) for r in rng.choice(rounds_total, size=wanted, replace=False))
        checked = set(true_positions)
        used: set = set()
        received = list(true_positions)
        for r in rounds:
            p = true_positions[r]
            if self.strategy.policy == POLICY_PAIRED:
                pool = [
                    t
                    for t in range(total)
                    if t not in checked and t not in used and (t & 1) != (p & 1)
                ]
            else:
                pool = [t for t in range(total) if t not in checked and t not in used]
            if not pool:
                continue
            target = pool[int(rng.integers(0, len(pool)))]
            received[r] = target
            used.add(target)
            self.tampered.append((r, p, target))
        return received

    def finalize(self, ctx: RunContext) -> AttackOutcome:
        out = AttackOutcome(self.strategy.kind, ctx.aborted, ctx.abort_step)
        distinct = sum(
            1
            for _, p, t in self.tampered
            if not isinstance(ctx.true_states[t], GhzSpec)
            or ctx.claimed_specs[p] != ctx.true_states[t]
        )
        out.extras["tampered"] = len(self.tampered)
        out.extras["tampered_distinct"] = distinct
        return out


@dataclass
class ClassicalPositionTamper(AdversaryStrategy):
    """An outsider rewriting the broadcast check positions.

    Only the classical broadcast between participants is touched, so the
    relayed variant of the check is immune.  ``paired_specs`` forces the
    preparation to alternate between two states and substitutes a position
    holding the partner state, reproducing the worked two-state example;
    ``random`` substitutes any other unchecked position.
    """

    count: int = 1
    policy: str = POLICY_PAIRED
    spec_pair: Optional[Tuple[GhzSpec, GhzSpec]] = None
    kind = KIND_POSITION_TAMPER

    def start_run(self) -> RunHandle:
        return _TamperHandle(self)


# ---------------------------------------------------------------------------
# Config-driven construction
# ---------------------------------------------------------------------------


def _require_keys(params: dict, allowed: set, kind: str) -> None:
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown adversary param `{key}` for kind `{kind}`")


def _spec_from(value: object, what: str) -> GhzSpec:
    if isinstance(value, GhzSpec):
        return value
    if isinstance(value, dict):
        try:
            return GhzSpec.from_dict(value)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid state for `{what}`: {exc}") from exc
    raise ConfigError(f"`{what}` must be a state object with keys q/delta")


def strategy_from_config(kind: str, params: Optional[dict] = None) -> AdversaryStrategy:
    """Build a strategy from config-document data, validating params."""
    params = dict(params or {})
    if kind == KIND_NONE:
        _require_keys(params, set(), kind)
        return NONE
    if kind in (KIND_EVE, KIND_TP2_INTERCEPT):
        _require_keys(params, {"links", "victim"}, kind)
        links = tuple(int(x) for x in params.get("links", (1,)))
        if not links:
            raise ConfigError("adversary param `links` must be nonempty")
        victim = params.get("victim")
        cls = Tp2Intercept if kind == KIND_TP2_INTERCEPT else EveInterceptResend
        return cls(links=links, victim=None if victim is None else int(victim))
    if kind == KIND_TP1_FAKE_STATE:
        _require_keys(params, {"true_state", "claimed"}, kind)
        true_state = params.get("true_state", "zeros")
        if true_state != "zeros":
            true_state = _spec_from(true_state, "true_state")
        claimed = params.get("claimed")
        if claimed is not None:
            claimed = _spec_from(claimed, "claimed")
        return Tp1FakeInitialState(true_state=true_state, claimed=claimed)
    if kind in (KIND_TP1_FAKE_RESULT, KIND_TP2_FAKE_RESULT):
        _require_keys(params, {"pairs"}, kind)
        pairs = params.get("pairs", "all")
        if pairs != "all":
            pairs = [tuple(int(v) for v in p) for p in pairs]
        return TpFakeResult(announcer=TP2 if kind == KIND_TP2_FAKE_RESULT else TP1, pairs=pairs)
    if kind == KIND_PARTICIPANT_INFER:
        _require_keys(params, {"attacker", "victim", "counterfactual"}, kind)
        return ParticipantInfer(
            attacker=int(params.get("attacker", 1)),
            victim=int(params.get("victim", 2)),
            counterfactual=bool(params.get("counterfactual", False)),
        )
    if kind == KIND_POSITION_TAMPER:
        _require_keys(params, {"count", "policy", "pair"}, kind)
        policy = params.get("policy", POLICY_PAIRED)
        if policy not in (POLICY_PAIRED, POLICY_RANDOM):
            raise ConfigError(f"unknown tamper policy `{policy}`")
        pair = params.get("pair")
        if pair is not None:
            if len(pair) != 2:
                raise ConfigError("tamper param `pair` must hold exactly two states")
            pair = (_spec_from(pair[0], "pair[0]"), _spec_from(pair[1], "pair[1]"))
        return ClassicalPositionTamper(count=int(params.get("count", 1)), policy=policy, spec_pair=pair)
    raise ConfigError(f"unknown adversary kind `{kind}` (expected one of {', '.join(ALL_KINDS)})")
