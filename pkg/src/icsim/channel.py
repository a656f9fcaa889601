"""The synchronous channel: mod-3 additive (or fixing) noise on the alphabet
{0, 1, silence=2}, budget accounting and optional trace recording."""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .transcript import SILENCE

DirectedLink = tuple[int, int]

ADDITIVE = "additive"
FIXING = "fixing"


class ChannelError(RuntimeError):
    pass


class CommitmentOrderError(ChannelError):
    """An oblivious adversary tried to commit after protocol randomness was drawn."""


def symbol_text(s: int) -> str:
    return "*" if s == SILENCE else str(s)


def apply_noise(t: int, e: int) -> int:
    return (t + e) % 3


@dataclass
class BudgetLedger:
    epsilon: float
    K: int
    cc: int = 0
    err: int = 0

    @property
    def rate(self) -> float:
        return self.epsilon / self.K

    def budget_valid(self) -> bool:
        return self.err <= self.rate * self.cc

    def allows(self, extra: int) -> bool:
        """Would ``extra`` more corruptions keep the run within budget so far?"""
        return self.err + extra <= self.rate * self.cc


def step_round(
    emissions: Mapping[DirectedLink, int],
    noise: Mapping[DirectedLink, int],
    ledger: Optional[BudgetLedger] = None,
) -> dict[DirectedLink, int]:
    """Deliver one round: observation = (t + e) mod 3 with silence as t = 2.

    Returns observations for every link that carries an emission or noise;
    all other links observe silence.
    """
    for d, b in emissions.items():
        if b not in (0, 1):
            raise ChannelError(f"emission on {d} must be a bit, got {b!r}")
    obs = dict(emissions)
    err = 0
    for d, e in noise.items():
        if e not in (0, 1, 2):
            raise ChannelError(f"noise on {d} must lie in {{0,1,2}}, got {e!r}")
        if e:
            obs[d] = apply_noise(emissions.get(d, SILENCE), e)
            err += 1
    if ledger is not None:
        ledger.cc += len(emissions)
        ledger.err += err
    return obs


class EmissionCollector:
    """Builds a round's emission map, rejecting a second bit on the same link."""

    def __init__(self) -> None:
        self.emissions: dict[DirectedLink, int] = {}

    def send(self, sender: int, receiver: int, bit: int) -> None:
        d = (sender, receiver)
        if d in self.emissions:
            raise ChannelError(f"duplicate emission on {d} in one round")
        self.emissions[d] = bit


@dataclass
class NoisePattern:
    """Committed noise: ``(round, directed link) -> value``.

    For additive patterns the value is e in {1, 2}; for fixing tables it is
    the forced channel output in {0, 1, 2}.
    """

    entries: dict[tuple[int, DirectedLink], int] = field(default_factory=dict)
    mode: str = ADDITIVE

    def __post_init__(self) -> None:
        self._by_round: dict[int, dict[DirectedLink, int]] = {}
        for (r, d), v in self.entries.items():
            if self.mode == ADDITIVE and v == 0:
                continue
            self._by_round.setdefault(r, {})[d] = v
        self._rounds = sorted(self._by_round)

    def __len__(self) -> int:
        return sum(len(x) for x in self._by_round.values())

    def at(self, rnd: int) -> Optional[dict[DirectedLink, int]]:
        return self._by_round.get(rnd)

    def rounds_between(self, r0: int, r1: int) -> list[int]:
        lo = bisect.bisect_left(self._rounds, r0)
        hi = bisect.bisect_left(self._rounds, r1)
        return self._rounds[lo:hi]

    def max_round(self) -> int:
        return self._rounds[-1] if self._rounds else -1


EMPTY_PATTERN = NoisePattern()


@dataclass
class TraceRow:
    round: int
    link: DirectedLink
    sent: int
    e: int
    observed: int

    def tsv(self) -> str:
        return f"{self.round}\t{self.link[0]}->{self.link[1]}\t{symbol_text(self.sent)}\t{self.e}\t{symbol_text(self.observed)}"


class Channel:
    """Stateful round engine used by the scheme.

    Rounds must be visited in increasing order. Rounds the engine skips (all
    parties idle) are still charged for any committed noise they contain.
    """

    def __init__(self, ledger: BudgetLedger, pattern: NoisePattern = EMPTY_PATTERN, adaptive=None, record_trace: bool = False):
        self.ledger = ledger
        self.pattern = pattern
        self.adaptive = adaptive
        self.trace: Optional[list[TraceRow]] = [] if record_trace else None
        self.corrupted_links: set[tuple[int, int]] = set()
        self._cursor = 0

    # -- bookkeeping ---------------------------------------------------------------

    def charge(self, d: DirectedLink) -> None:
        self.ledger.err += 1
        self.corrupted_links.add((min(d), max(d)))

    def _idle(self, r: int, entries: Mapping[DirectedLink, int]) -> None:
        for d, v in sorted(entries.items()):
            obs = self._deliver(SILENCE, v)
            if obs != SILENCE:
                self.charge(d)
            if self.trace is not None and obs != SILENCE:
                self.trace.append(TraceRow(r, d, SILENCE, self._e_of(SILENCE, obs), obs))

    def advance_to(self, rnd: int) -> None:
        """Charge committed noise in the skipped rounds [cursor, rnd)."""
        if rnd < self._cursor:
            raise ChannelError(f"round {rnd} already processed (cursor {self._cursor})")
        for r in self.pattern.rounds_between(self._cursor, rnd):
            self._idle(r, self.pattern.at(r))
        self._cursor = rnd

    def _deliver(self, t: int, v: int) -> int:
        return v if self.pattern.mode == FIXING else apply_noise(t, v)

    @staticmethod
    def _e_of(t: int, obs: int) -> int:
        return (obs - t) % 3

    # -- per-round delivery --------------------------------------------------------

    def transmit(self, rnd: int, emissions: Mapping[DirectedLink, int], state=None) -> dict[DirectedLink, int]:
        self.advance_to(rnd)
        self.ledger.cc += len(emissions)
        committed = self.pattern.at(rnd)
        adaptive = None
        if self.adaptive is not None and state is not None:
            adaptive = self.adaptive.decide(rnd, emissions, state) or None
        obs = dict(emissions)
        if committed:
            for d, v in committed.items():
                t = emissions.get(d, SILENCE)
                o = self._deliver(t, v)
                obs[d] = o
                if o != t:
                    self.charge(d)
        if adaptive:
            for d, e in adaptive.items():
                if e % 3 == 0:
                    continue
                t = obs.get(d, SILENCE)
                obs[d] = apply_noise(t, e)
                self.charge(d)
        if self.trace is not None:
            for d in sorted(obs):
                t = emissions.get(d, SILENCE)
                self.trace.append(TraceRow(rnd, d, t, self._e_of(t, obs[d]), obs[d]))
        self._cursor = rnd + 1
        return obs

    def block_entries(self, r0: int, n: int) -> dict[DirectedLink, list[tuple[int, int]]]:
        """Committed noise of a block of rounds whose emissions are fixed in
        advance, as ``link -> [(offset, value), ...]``. The caller applies it
        (charging each entry through :meth:`charge`) and must call :meth:`close_block`."""
        self.advance_to(r0)
        out: dict[DirectedLink, list[tuple[int, int]]] = {}
        for r in self.pattern.rounds_between(r0, r0 + n):
            for d, v in self.pattern.at(r).items():
                out.setdefault(d, []).append((r - r0, v))
        return out

    @property
    def fixing(self) -> bool:
        return self.pattern.mode == FIXING

    def close_block(self, r0: int, n: int, sent_bits: int, rows: Optional[Iterable[TraceRow]] = None) -> None:
        self.ledger.cc += sent_bits
        if self.trace is not None and rows is not None:
            self.trace.extend(rows)
        self._cursor = r0 + n

    def trace_tsv(self) -> str:
        if self.trace is None:
            return ""
        header = "round\tlink\tsent\te\tobserved\n"
        return header + "".join(row.tsv() + "\n" for row in self.trace)


# --- adversary contract -------------------------------------------------------------


OBLIVIOUS_ADDITIVE = "oblivious-additive"
OBLIVIOUS_FIXING = "oblivious-fixing"
ADAPTIVE = "adaptive"

PHASES = ("init", "meeting-points", "flag-passing", "listen", "simulation", "rewind")


@dataclass(frozen=True)
class RunShape:
    """What an oblivious adversary may know when committing: the topology and
    the fixed round layout of the run."""

    n: int
    directed_links: tuple[DirectedLink, ...]
    rounds_init: int
    iteration_length: int
    iterations: int
    phase_offsets: tuple[int, ...]  # start offsets of meeting-points .. rewind within an iteration
    epsilon: float
    K: int
    cc_floor: int  # communication every run performs regardless of noise

    @property
    def total_rounds(self) -> int:
        return self.rounds_init + self.iterations * self.iteration_length

    def iteration_start(self, i: int) -> int:
        return self.rounds_init + (i - 1) * self.iteration_length

    def phase_of(self, rnd: int) -> tuple[int, str]:
        """(iteration, phase) of a global round; iteration 0 is the init range."""
        if rnd < self.rounds_init:
            return 0, "init"
        i, off = divmod(rnd - self.rounds_init, self.iteration_length)
        mp, fp, listen, rw = self.phase_offsets
        if off >= rw:
            return i + 1, "rewind"
        if off > listen:
            return i + 1, "simulation"
        if off == listen:
            return i + 1, "listen"
        if off >= fp:
            return i + 1, "flag-passing"
        return i + 1, "meeting-points"

    def rate_budget(self) -> int:
        """Corruptions that stay within rate epsilon/K for every possible run."""
        return math.floor(self.epsilon / self.K * self.cc_floor)


class RandomnessGuard:
    """Tracks whether protocol randomness has been drawn yet."""

    def __init__(self) -> None:
        self.drawn = False

    def draw(self) -> None:
        self.drawn = True


def commit_oblivious(adv, shape: RunShape, guard: RandomnessGuard, trial_seed: int = 0) -> NoisePattern:
    if adv.kind == ADAPTIVE:
        raise ChannelError("adaptive adversaries do not commit a noise pattern")
    if guard.drawn:
        raise CommitmentOrderError("oblivious noise must be committed before any protocol randomness is drawn")
    pattern = adv.commit(shape, random.Random(f"{adv.seed}:{trial_seed}"))
    limit = shape.total_rounds
    for (r, d) in pattern.entries:
        if not 0 <= r < limit:
            raise ChannelError(f"noise entry at round {r} outside the run (0..{limit - 1})")
    return pattern


def adaptive_decide(adv, rnd: int, in_flight: Mapping[DirectedLink, int], state) -> dict[DirectedLink, int]:
    if adv.kind != ADAPTIVE:
        raise ChannelError("only adaptive adversaries decide per round")
    return adv.decide(rnd, in_flight, state) or {}
