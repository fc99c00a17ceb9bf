"""Single-photon decoy states, tappable quantum channels, and the public
decoy-check discussion used to expose channel eavesdropping."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .ghz import Basis


class DecoyState(IntEnum):
    """The four single-qubit decoy preparations."""

    Z0 = 0  # |0>
    Z1 = 1  # |1>
    X_PLUS = 2  # |+>
    X_MINUS = 3  # |->

    @property
    def basis(self) -> Basis:
        return Basis(int(self) >> 1)

    @property
    def bit(self) -> int:
        return int(self) & 1

    def ket(self) -> str:
        return ("|0>", "|1>", "|+>", "|->")[int(self)]


def decoy_state(basis: Basis, bit: int) -> DecoyState:
    return DecoyState((int(basis) << 1) | (bit & 1))


class Qubit:
    """A single photon in one definite state from the decoy set.

    Measuring in the preparation basis returns the prepared bit and leaves
    the photon alone; measuring in the other basis returns a fair coin and
    re-prepares the photon in the measured eigenstate.
    """

    __slots__ = ("state",)

    def __init__(self, state: DecoyState) -> None:
        self.state = DecoyState(state)

    def measure(self, basis: Basis, rng: np.random.Generator) -> int:
        if self.state.basis == basis:
            return self.state.bit
        bit = int(rng.integers(0, 2))
        self.state = decoy_state(basis, bit)
        return bit


def measure_decoy(photon: Qubit, basis: Basis, rng: np.random.Generator) -> int:
    """Projective measurement with re-preparation (see ``Qubit.measure``)."""
    return photon.measure(basis, rng)


def generate_decoys(count: int, rng: np.random.Generator) -> List[DecoyState]:
    """``count`` independent uniform draws from the four decoy states."""
    if count < 0:
        raise ValueError("decoy count must be nonnegative")
    if count == 0:
        return []
    return [DecoyState(int(v)) for v in rng.integers(0, 4, size=count)]


class DecoySlot:
    """A transmissible slot holding one decoy photon."""

    __slots__ = ("photon",)
    is_decoy = True

    def __init__(self, photon: Qubit) -> None:
        self.photon = photon

    def measure(self, basis: Basis, rng: np.random.Generator) -> int:
        return self.photon.measure(basis, rng)

    def intercept(self, basis: Basis, rng: np.random.Generator) -> int:
        return self.photon.measure(basis, rng)


class CarrierSlot:
    """A transmissible slot holding one particle of a shared register.

    ``position`` is the register's index within the batch, ``particle`` the
    1-based particle this link carries.  An interceptor's measurement
    consumes the register particle and forwards a fresh photon in the
    measured eigenstate; the legitimate receiver then measures whatever
    actually arrives.
    """

    __slots__ = ("register", "position", "particle", "replacement")
    is_decoy = False

    def __init__(self, register, position: int, particle: int) -> None:
        self.register = register
        self.position = position
        self.particle = particle
        self.replacement: Optional[Qubit] = None

    def measure(self, basis: Basis, rng: np.random.Generator) -> int:
        if self.replacement is not None:
            return self.replacement.measure(basis, rng)
        return self.register.measure((self.particle,), basis, rng)[self.particle]

    def intercept(self, basis: Basis, rng: np.random.Generator) -> int:
        bit = self.measure(basis, rng)
        self.replacement = Qubit(decoy_state(basis, bit))
        return bit


Tap = Callable[[List[object], np.random.Generator], None]


class QuantumChannel:
    """Point-to-point quantum link.

    Registered taps run in registration order over each transmitted
    sequence and may mutate the slots in place; with no taps the sequence
    is delivered untouched.
    """

    def __init__(self, sender: str, receiver: str, taps: Sequence[Tap] = ()) -> None:
        self.sender = sender
        self.receiver = receiver
        self.taps = list(taps)

    def transmit(self, slots: List[object], rng: np.random.Generator) -> List[object]:
        for tap in self.taps:
            tap(slots, rng)
        return slots


def interleave(
    carriers: Sequence[object], decoys: Sequence[DecoyState], rng: np.random.Generator
) -> Tuple[List[object], List[int]]:
    """Insert fresh decoy photons at uniformly random positions.

    Carriers keep their relative order.  Returns the merged slot sequence
    and the decoys' 1-based positions in ascending order (decoy k of the
    input list sits at the k-th returned position).
    """
    total = len(carriers) + len(decoys)
    if not decoys:
        return list(carriers), []
    chosen = sorted(int(i) for i in rng.choice(total, size=len(decoys), replace=False))
    spots = set(chosen)
    merged: List[object] = []
    ci = 0
    di = 0
    for idx in range(total):
        if idx in spots:
            merged.append(DecoySlot(Qubit(decoys[di])))
            di += 1
        else:
            merged.append(carriers[ci])
            ci += 1
    return merged, [i + 1 for i in chosen]


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one public decoy discussion."""

    passed: bool
    mismatches: int
    total: int


def public_discussion(
    bases: Sequence[Basis],
    results: Sequence[int],
    prepared: Sequence[DecoyState],
    tolerance: int = 0,
) -> CheckReport:
    """Compare the receiver's decoy results against the preparations.

    ``bases`` is the announced measurement basis per decoy (which for an
    honest announcement is the preparation basis), ``results`` the
    receiver's reported bits.  Passes iff the mismatch count is within
    ``tolerance`` (0 by default: any disturbance aborts).
    """
    if not len(bases) == len(results) == len(prepared):
        raise ValueError("decoy announcement, results, and preparations must align")
    mismatches = 0
    for basis, got, prep in zip(bases, results, prepared):
        if basis != prep.basis:
            raise ValueError("announced basis does not match the preparation basis")
        if got != prep.bit:
            mismatches += 1
    return CheckReport(mismatches <= tolerance, mismatches, len(prepared))
