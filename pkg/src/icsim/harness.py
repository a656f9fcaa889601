"""Two-party meeting-points harness: run back-to-back meeting-points phases
on a single link with injected transcript divergence and no further noise."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .scheme import (
    SIMULATE,
    CrsFamily,
    DoubleHashFamily,
    LinkState,
    MeetingPointsExchange,
    SchemeVariant,
    SharedRandomString,
)
from .transcript import PartialTranscript, PrefixInterner, common_prefix_length


@dataclass
class ReconvergenceResult:
    phases: int  # phases until both ends are back in step, or -1
    common_prefix: int
    final_lengths: tuple[int, int]
    statuses: tuple[str, str]
    transitions: list[tuple[str, str]]

    @property
    def converged(self) -> bool:
        return self.phases >= 0


def _random_chunk(rng: random.Random, index: int, width: int) -> tuple[int, tuple[int, ...]]:
    return index, tuple(rng.randrange(2) for _ in range(width))


def diverged_pair(common: int, extra_u: int, extra_v: int, width: int = 8, seed: int = 0) -> tuple[LinkState, LinkState]:
    """Two link states sharing ``common`` chunks, then ``extra_u`` / ``extra_v``
    chunks that differ from each other (the first extra chunk always differs)."""
    rng = random.Random(seed)
    interner = PrefixInterner()
    shared = [_random_chunk(rng, c, width) for c in range(1, common + 1)]
    tu = PartialTranscript.from_chunks(shared, interner)
    tv = PartialTranscript.from_chunks(shared, interner)
    for c in range(common + 1, common + extra_u + 1):
        tu.append_chunk(*_random_chunk(rng, c, width))
    for c in range(common + 1, common + extra_v + 1):
        idx, sym = _random_chunk(rng, c, width)
        if c == common + 1 and extra_u:
            sym = tuple(1 - s for s in tu.chunk(c)[1])
        tv.append_chunk(idx, sym)
    return LinkState(tu), LinkState(tv)


def in_step(x: LinkState, y: LinkState) -> bool:
    return (
        x.status == SIMULATE
        and y.status == SIMULATE
        and len(x.T) == len(y.T)
        and common_prefix_length(x.T, y.T) == len(x.T)
    )


def run_reconvergence(
    variant: SchemeVariant,
    su: LinkState,
    sv: LinkState,
    max_phases: int,
    trial_seed: int = 0,
    family=None,
) -> ReconvergenceResult:
    """Run meeting-points phases on link (0, 1) until both transcripts agree
    and both ends are simulating again."""
    if family is None:
        crs = SharedRandomString(trial_seed)
        family = DoubleHashFamily(variant, crs, trial_seed) if variant.tag == "C" else CrsFamily(variant, crs)
    transitions = []
    for phase in range(1, max_phases + 1):
        # a link that leaves meeting points still hashes k = 1 next time; the
        # harness counts phases until a clean early exit on equal transcripts
        recs = MeetingPointsExchange(family, phase, 0, 1, su, sv).run()
        transitions.append((recs[0].transition, recs[1].transition))
        if in_step(su, sv) and su.k == 0 and sv.k == 0:
            return ReconvergenceResult(phase, len(su.T), (len(su.T), len(sv.T)), (su.status, sv.status), transitions)
    return ReconvergenceResult(-1, common_prefix_length(su.T, sv.T), (len(su.T), len(sv.T)), (su.status, sv.status), transitions)


def reconvergence_phases(variant: SchemeVariant, divergence: int, common: int = 5, seed: int = 0, max_phases: Optional[int] = None) -> ReconvergenceResult:
    """Both ends hold ``common`` shared chunks and ``divergence`` differing ones."""
    su, sv = diverged_pair(common, divergence, divergence, seed=seed)
    return run_reconvergence(variant, su, sv, max_phases or 64 * (divergence + 1), trial_seed=seed)
