"""Adversary strategies and the JSON adversary-config registry."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .channel import (
    ADAPTIVE,
    ADDITIVE,
    FIXING,
    OBLIVIOUS_ADDITIVE,
    OBLIVIOUS_FIXING,
    NoisePattern,
    RunShape,
)
from .transcript import SILENCE


class AdversaryConfigError(ValueError):
    pass


def _budget(count: Optional[int], shape: RunShape) -> int:
    return shape.rate_budget() if count is None else count


def _sample_keys(rng: random.Random, rounds: list[int] | range, links, count: int) -> list[tuple[int, tuple[int, int]]]:
    links = list(links)
    space = len(rounds) * len(links)
    count = min(count, space)
    picks = rng.sample(range(space), count)
    return [(rounds[p // len(links)], links[p % len(links)]) for p in sorted(picks)]


@dataclass
class NullAdversary:
    seed: int = 0
    kind: str = OBLIVIOUS_ADDITIVE

    def commit(self, shape: RunShape, rng: random.Random) -> NoisePattern:
        return NoisePattern({}, ADDITIVE)


@dataclass
class UniformRandomAdversary:
    """``count`` corruptions (default: the rate budget) at uniformly random
    (round, directed link) keys, each e uniform in {1, 2}."""

    count: Optional[int] = None
    seed: int = 0
    kind: str = OBLIVIOUS_ADDITIVE

    def commit(self, shape: RunShape, rng: random.Random) -> NoisePattern:
        keys = _sample_keys(rng, range(shape.total_rounds), shape.directed_links, _budget(self.count, shape))
        return NoisePattern({key: rng.choice((1, 2)) for key in keys}, ADDITIVE)


@dataclass
class LinkBurstAdversary:
    """Corruptions confined to one link's rounds in an iteration range."""

    link: tuple[int, int] = (0, 1)
    iterations: tuple[int, int] = (1, 1)
    count: Optional[int] = None
    seed: int = 0
    kind: str = OBLIVIOUS_ADDITIVE

    def commit(self, shape: RunShape, rng: random.Random) -> NoisePattern:
        a, b = self.link
        first, last = self.iterations
        last = min(last, shape.iterations)
        if (a, b) not in shape.directed_links:
            raise AdversaryConfigError(f"link-burst: ({a}, {b}) is not a link")
        rounds = list(range(shape.iteration_start(first), shape.iteration_start(last) + shape.iteration_length)) if first <= last else []
        keys = _sample_keys(rng, rounds, [(a, b), (b, a)], _budget(self.count, shape))
        return NoisePattern({key: rng.choice((1, 2)) for key in keys}, ADDITIVE)


@dataclass
class RandomFixingAdversary:
    """Oblivious fixing table: forces uniformly random outputs at random keys."""

    count: Optional[int] = None
    seed: int = 0
    kind: str = OBLIVIOUS_FIXING

    def commit(self, shape: RunShape, rng: random.Random) -> NoisePattern:
        keys = _sample_keys(rng, range(shape.total_rounds), shape.directed_links, _budget(self.count, shape))
        return NoisePattern({key: rng.choice((0, 1, SILENCE)) for key in keys}, FIXING)


@dataclass
class BotSpoofAdversary:
    """Inserts a bottom symbol (bit 1) into the listen round on silent links
    towards ``victim`` (every party if None), within the running budget."""

    victim: Optional[int] = None
    per_iteration: int = 1
    seed: int = 0
    kind: str = ADAPTIVE
    phases: frozenset = frozenset({"listen"})

    def decide(self, rnd, in_flight, state) -> dict:
        out = {}
        for (s, t) in state.graph.directed_links():
            if len(out) >= self.per_iteration:
                break
            if self.victim is not None and t != self.victim:
                continue
            if (s, t) in in_flight or not state.parties[t].net_correct:
                continue
            if state.ledger.allows(len(out) + 1):
                out[(s, t)] = 2  # silence (2) + 2 = 1 mod 3
        return out

    def plan_meeting_points(self, r0, exchanges, state) -> dict:
        return {}


@dataclass
class GreedyAdversary:
    """Adaptive attacker on one link.

    Simulation phase: when both ends of the target link agree, flip one
    simulated bit to seed a divergence. Meeting-points phase: where the true
    inputs of a comparison differ, flip at most two hash bits so that the
    receiver believes a match, trying the comparisons in the order the
    receiver evaluates them. Spends only while Err stays within rate * CC.
    """

    link: tuple[int, int] = (0, 1)
    max_flips: int = 2
    seed: int = 0
    kind: str = ADAPTIVE
    phases: frozenset = frozenset({"simulation", "meeting-points"})
    _seeded_iteration: int = field(default=0, repr=False)

    def decide(self, rnd, in_flight, state) -> dict:
        a, b = self.link
        if self._seeded_iteration == state.iteration:
            return {}
        la, lb = state.parties[a].links[b], state.parties[b].links[a]
        same = len(la.T) == len(lb.T) and la.T.prefix_id(len(la.T)) == lb.T.prefix_id(len(lb.T))
        if not same or not state.ledger.allows(1):
            return {}
        for d in ((a, b), (b, a)):
            if d in in_flight:
                self._seeded_iteration = state.iteration
                return {d: 1 if in_flight[d] == 0 else 2}
        return {}

    def plan_meeting_points(self, r0, exchanges, state) -> dict:
        a, b = min(self.link), max(self.link)
        ex = exchanges.get((a, b))
        if ex is None:
            return {}
        out: dict[tuple[int, int], list[tuple[int, int]]] = {}
        spent = 0
        for r in (a, b):
            s = b if r == a else a
            _, f11, own11 = next(c for c in ex.compare_layout if c[0] == "c11")
            if ex.truth(r, f11, own11):
                continue  # the receiver already sees a genuine match; nothing to spoof
            for name in ("c11", "c12", "c21", "c22"):
                _, f, own = next(c for c in ex.compare_layout if c[0] == name)
                if ex.truth(r, f, own):
                    continue
                diff = ex.sent_field(s, f) ^ ex.expected(r, f, own)
                if not diff:
                    break  # the hashes already collide; the receiver believes a match for free
                flips = [p for p in range(ex.widths[f]) if (diff >> p) & 1]
                if len(flips) > self.max_flips:
                    continue
                if not state.ledger.allows(spent + len(flips)):
                    break
                sent = ex.sent_field(s, f)
                out[(s, r)] = [(ex.offsets[f] + p, 1 if not (sent >> p) & 1 else 2) for p in flips]
                spent += len(flips)
                break
        return out


STRATEGIES = {
    "null": NullAdversary,
    "uniform-random": UniformRandomAdversary,
    "link-burst": LinkBurstAdversary,
    "random-fixing": RandomFixingAdversary,
    "bot-spoof": BotSpoofAdversary,
    "greedy": GreedyAdversary,
}


def make_adversary(cfg: Optional[Mapping[str, Any]]):
    """Build an adversary from ``{"strategy": name, "params": {...}, "seed": int}``."""
    if not cfg:
        return NullAdversary()
    name = cfg.get("strategy", "null")
    if name not in STRATEGIES:
        raise AdversaryConfigError(f"unknown adversary strategy {name!r}; known: {sorted(STRATEGIES)}")
    params = dict(cfg.get("params", {}))
    for key in ("link", "iterations"):
        if key in params:
            params[key] = tuple(params[key])
    try:
        adv = STRATEGIES[name](seed=int(cfg.get("seed", 0)), **params)
    except TypeError as exc:
        raise AdversaryConfigError(f"adversary {name!r}: {exc}") from None
    kind = cfg.get("kind")
    if kind is not None and kind != adv.kind:
        raise AdversaryConfigError(f"adversary {name!r} is {adv.kind}, config says {kind}")
    return adv
