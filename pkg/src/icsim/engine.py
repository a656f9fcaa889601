"""The iteration engine: initialization, then meeting points, flag passing,
simulation and rewind, repeated over the channel in lock-step rounds.

Parties are plain state records stepped by the engine. The engine hands the
observer (:mod:`icsim.instrument`) read-only state at iteration boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from collections.abc import Mapping
from typing import Any, Optional

from .adversaries import NullAdversary
from .channel import (
    ADAPTIVE,
    EMPTY_PATTERN,
    SILENCE,
    BudgetLedger,
    Channel,
    RandomnessGuard,
    RunShape,
    TraceRow,
    apply_noise,
    commit_oblivious,
)
from .hashing import int_to_bits
from .instrument import Observer, PotentialConstants, snapshots_csv
from .protocol_model import ChunkedProtocol, ChunkLayout, run_noiseless_oracle
from .scheme import (
    MEETING_POINTS,
    CrsFamily,
    DeltaFamily,
    DeltaSeedHasher,
    DoubleHashFamily,
    LinkState,
    MeetingPointsExchange,
    FlagPassing,
    PartyState,
    SchemeError,
    SchemeVariant,
    SharedRandomString,
    private_bits,
    randomness_exchange,
    seed_plan,
)
from .topology import build_spanning_tree, make_round_schedule
from .transcript import PartialTranscript, PrefixInterner

DEFAULT_ALPHA = 128.0
ITERATIONS_PER_CHUNK = 100


@dataclass
class RunReport:
    variant: str
    n: int
    m: int
    K: int
    num_chunks: int
    content_chunks: int
    iterations_run: int
    cc: int
    err: int
    err_init: int
    budget_valid: bool
    correct: bool
    protocol_cc: int
    collisions: int
    trial_seed: int
    snapshots: list = field(default_factory=list, repr=False)
    violations: list = field(default_factory=list)
    final_lengths: dict = field(default_factory=dict, repr=False)
    seed_exchange_reliable: Optional[bool] = None
    trace: Optional[str] = field(default=None, repr=False)

    @property
    def cc_ratio(self) -> float:
        return self.cc / self.protocol_cc

    def to_json(self, per_link: bool = True) -> dict[str, Any]:
        if per_link:
            iterations = [s.to_json() for s in self.snapshots]
        else:
            iterations = [s.row(None) for s in self.snapshots]
        return {
            "variant": self.variant,
            "n": self.n,
            "m": self.m,
            "K": self.K,
            "num_chunks": self.num_chunks,
            "content_chunks": self.content_chunks,
            "iterations_run": self.iterations_run,
            "cc": self.cc,
            "err": self.err,
            "err_init": self.err_init,
            "budget_valid": self.budget_valid,
            "correct": self.correct,
            "protocol_cc": self.protocol_cc,
            "cc_ratio": self.cc_ratio,
            "collisions": self.collisions,
            "trial_seed": self.trial_seed,
            "seed_exchange_reliable": self.seed_exchange_reliable,
            "violations": [v.__dict__ for v in self.violations],
            "final_lengths": {f"{u}-{v}": n for (u, v), n in sorted(self.final_lengths.items())},
            "iterations": iterations,
        }

    def dumps(self, per_link: bool = True) -> str:
        return json.dumps(self.to_json(per_link), sort_keys=True)

    def potential_csv(self) -> str:
        return snapshots_csv(self.snapshots)


class PhaseAlignmentError(AssertionError):
    pass


class _ExchangeProbe(Mapping):
    """Noise-free exchanges an adaptive adversary may inspect before choosing
    its meeting-points noise; built on first access."""

    def __init__(self, engine: "Engine", edges):
        self._engine = engine
        self._edges = list(edges)
        self._built: dict = {}

    def __getitem__(self, link):
        if link not in self._built:
            if link not in self._edges:
                raise KeyError(link)
            a, b = link
            e = self._engine
            P = e.parties
            self._built[link] = MeetingPointsExchange(e.family, e.iteration, a, b, P[a].links[b], P[b].links[a])
        return self._built[link]

    def __iter__(self):
        return iter(self._edges)

    def cached_hashes(self, link) -> Optional[dict]:
        """Hash values already computed for ``link`` (they do not depend on noise)."""
        ex = self._built.get(link)
        return ex.ctx.cache if ex is not None else None

    def __len__(self) -> int:
        return len(self._edges)


def _in_step(x: LinkState, y: LinkState) -> bool:
    return (
        x.k == 0 and y.k == 0 and x.E == 0 and y.E == 0
        and x.status != MEETING_POINTS and y.status != MEETING_POINTS
        and len(x.T) == len(y.T) and x.T.prefix_id(len(x.T)) == y.T.prefix_id(len(y.T))
    )


class Engine:
    """One run of the scheme on a chunked protocol against one adversary."""

    def __init__(
        self,
        variant: SchemeVariant,
        cp: ChunkedProtocol,
        adversary=None,
        trial_seed: int = 0,
        epsilon: float = 0.0,
        *,
        iterations: Optional[int] = None,
        record_trace: bool = False,
        full_hashing: bool = False,
        constants: PotentialConstants = PotentialConstants(),
        alpha: float = DEFAULT_ALPHA,
    ):
        if variant.K != cp.K:
            raise SchemeError(f"variant {variant.tag} has K={variant.K} but the protocol was chunked with K={cp.K}")
        self.variant = variant
        self.cp = cp
        self.graph = cp.graph
        self.adversary = adversary if adversary is not None else NullAdversary()
        self.trial_seed = trial_seed
        self.epsilon = epsilon
        self.iterations = iterations if iterations is not None else ITERATIONS_PER_CHUNK * cp.num_chunks
        self.record_trace = record_trace
        self.full_hashing = full_hashing
        self.constants = constants
        self.alpha = alpha
        self.tree = build_spanning_tree(self.graph)
        self.seed_plan = seed_plan(variant, cp, self.iterations) if variant.tag == "B" else None
        init_rounds = self.seed_plan.rounds if self.seed_plan else 0
        self.schedule = make_round_schedule(self.graph, self.tree, variant.K, variant.meeting_points_rounds, init_rounds)
        off = self.schedule.offsets
        g = self.graph
        per_iteration_floor = 2 * g.m * variant.meeting_points_rounds + 2 * (g.n - 1)
        self.shape = RunShape(
            n=g.n,
            directed_links=tuple(g.directed_links()),
            rounds_init=init_rounds,
            iteration_length=self.schedule.iteration_length,
            iterations=self.iterations,
            phase_offsets=(0, off["flag_passing"], off["simulation"], off["rewind"]),
            epsilon=epsilon,
            K=variant.K,
            cc_floor=g.m * init_rounds + self.iterations * per_iteration_floor,
        )
        self._plans: dict[int, tuple] = {}
        self.iteration = 0

    # -- helpers -------------------------------------------------------------------

    def _wants(self, phase: str) -> bool:
        return self.adaptive is not None and phase in self.adaptive.phases

    def _transmit(self, rnd: int, emissions: dict, phase: str) -> dict:
        where = self.shape.phase_of(rnd)
        if where != (self.iteration, phase):
            raise PhaseAlignmentError(f"round {rnd} belongs to {where}, engine is in {(self.iteration, phase)}")
        return self.channel.transmit(rnd, emissions, self if self._wants(phase) else None)

    def _layout_plan(self, layout: ChunkLayout) -> tuple:
        """Per round of a chunk layout: the sends ``(u, v, base, pos)`` and the
        receives ``(u, v, pos, is_base)`` (u receives from v)."""
        got = self._plans.get(id(layout))
        if got is None:
            plan = []
            for r in range(layout.num_rounds):
                sends = tuple((u, v, base, pos) for u in range(self.graph.n) for v, base, pos in layout.sends[u][r])
                recvs = tuple((u, v, pos, is_base) for u in range(self.graph.n) for v, pos, is_base in layout.recvs[u][r])
                plan.append((sends, recvs))
            got = self._plans[id(layout)] = (layout, tuple(plan))
        return got[1]

    # -- initialization ----------------------------------------------------------------

    def _initialize(self):
        tag = self.variant.tag
        if tag == "A":
            return CrsFamily(self.variant, SharedRandomString(self.trial_seed))
        if tag == "C":
            return DoubleHashFamily(self.variant, SharedRandomString(self.trial_seed), self.trial_seed)
        return DeltaFamily(self.variant, self._exchange_seeds())

    def _exchange_seeds(self) -> dict:
        """Each link's lower-id endpoint sends its encoded seed bit-serially
        during the init rounds; an observed silence reads as an erasure."""
        plan = self.seed_plan
        rounds = plan.rounds
        channel = self.channel
        blk = channel.block_entries(0, rounds)
        fixing = channel.fixing
        rows: list[TraceRow] = []
        hashers = {}
        reliable = True

        def observe(d, offset_values, word):
            out = list(word) if word is not None else None
            for off, v in offset_values:
                t = word[off] if word is not None else SILENCE
                o = v if fixing else apply_noise(t, v)
                if o != t:
                    channel.charge(d)
                if word is not None:
                    out[off] = o
                elif self.record_trace and o != t:
                    rows.append(TraceRow(off, d, t, (o - t) % 3, o))
            return out

        for a, b in self.graph.edges:
            seed = private_bits(self.trial_seed, ("delta-seed", a, b), plan.spec.seed_len)

            def channel_word(word, a=a, b=b):
                got = observe((a, b), blk.get((a, b), ()), word)
                if self.record_trace:
                    rows.extend(TraceRow(r, (a, b), t, (o - t) % 3, o) for r, (t, o) in enumerate(zip(word, got)))
                return [None if o == SILENCE else o for o in got]

            mine, theirs, ok = randomness_exchange(int_to_bits(seed, plan.spec.seed_len), plan, channel_word)
            observe((b, a), blk.get((b, a), ()), None)
            reliable = reliable and ok
            hashers[(a, b)] = DeltaSeedHasher(mine, self.variant.hash_bits, plan.hash_input_bits)
            hashers[(b, a)] = DeltaSeedHasher(theirs, self.variant.hash_bits, plan.hash_input_bits)
        rows.sort(key=lambda row: (row.round, row.link))
        channel.close_block(0, rounds, self.graph.m * rounds, rows)
        self.seed_exchange_reliable = reliable
        return hashers

    # -- phases ------------------------------------------------------------------------

    def _meeting_points(self, r0: int) -> None:
        R = self.variant.meeting_points_rounds
        channel = self.channel
        additive = not channel.fixing
        noise = {d: [(off, v, additive) for off, v in lst] for d, lst in channel.block_entries(r0, R).items()}
        edges = self.graph.edges
        P = self.parties
        probe = None
        if self._wants("meeting-points"):
            probe = _ExchangeProbe(self, edges)
            for d, lst in (self.adaptive.plan_meeting_points(r0, probe, self) or {}).items():
                noise.setdefault(d, []).extend((off, e, True) for off, e in lst if e % 3)
        rows: Optional[list[TraceRow]] = [] if self.record_trace else None
        shortcut = rows is None and not self.full_hashing
        for a, b in edges:
            sub = {d: noise[d] for d in ((a, b), (b, a)) if d in noise}
            if shortcut and not sub and _in_step(P[a].links[b], P[b].links[a]):
                # clean channel, equal transcripts, idle counters: both ends see
                # matching hashes of k = 1 and of T1 and exit straight back to
                # simulating, leaving every counter as it was
                continue
            cache = probe.cached_hashes((a, b)) if probe is not None else None
            ex = MeetingPointsExchange(
                self.family, self.iteration, a, b, P[a].links[b], P[b].links[a], sub, channel.charge, self.full_hashing, cache
            )
            if rows is not None:
                rows.extend(self._mp_rows(ex, r0, sub))
            self.observer.record_verifications((a, b), ex.run())
        if rows is not None:
            rows.sort(key=lambda row: (row.round, row.link))
        channel.close_block(r0, R, 2 * self.graph.m * R, rows)

    def _mp_rows(self, ex: MeetingPointsExchange, r0: int, noise: dict) -> list[TraceRow]:
        rows = []
        for s, r in ((ex.ctx.a, ex.ctx.b), (ex.ctx.b, ex.ctx.a)):
            word = ex.sent_word(s)
            obs = list(word)
            for off, v, additive in noise.get((s, r), ()):
                obs[off] = apply_noise(obs[off], v) if additive else v
            rows.extend(TraceRow(r0 + off, (s, r), t, (o - t) % 3, o) for off, (t, o) in enumerate(zip(word, obs)))
        return rows

    def _set_status(self) -> None:
        for p in self.parties:
            p.min_chunk = p.live_min()
            if any(ls.status == MEETING_POINTS for ls in p.links.values()):
                p.status = 0
            elif any(len(ls.T) > p.min_chunk for ls in p.links.values()):
                p.status = 0
            else:
                p.status = 1

    def _flag_passing(self, r0: int) -> None:
        fp = FlagPassing(self.tree, [p.status for p in self.parties])
        for r in fp.active_rounds():
            obs = self._transmit(r0 + r, fp.emissions(r), "flag-passing")
            fp.receive(r, obs)
        for p in self.parties:
            p.net_correct = fp.net[p.party]

    def _simulation(self, r_listen: int) -> None:
        P = self.parties
        adj = self.graph.adjacency
        bots = {(u, v): 1 for u in range(self.graph.n) if not P[u].net_correct for v in adj[u]}
        heard = self._transmit(r_listen, bots, "listen")
        # links simulating this iteration, grouped by the layout of their next chunk
        groups: dict[int, tuple] = {}
        for p in P:
            if not p.net_correct:
                continue
            u = p.party
            partners = [v for v in adj[u] if heard.get((v, u), SILENCE) != 1]
            if len(partners) == len(adj[u]):
                p.min_chunk += 1
            for v in partners:
                T = p.links[v].T
                c = len(T) + 1
                layout = self.cp.chunk(c)
                group = groups.get(id(layout))
                if group is None:
                    group = groups[id(layout)] = (self._layout_plan(layout), {})
                group[1][(u, v)] = (T, c, [SILENCE] * layout.link_size(u, v))
        if not groups:
            return
        base_round = r_listen + 1
        next_bit = self.cp.base.next_bit
        views = {p.party: p.view() for p in P if p.net_correct}
        inputs = self.cp.base.inputs
        for r in range(max(len(plan) for plan, _ in groups.values())):
            emissions = {}
            listening = False
            for plan, active in groups.values():
                if r >= len(plan):
                    continue
                for u, v, base, pos in plan[r][0]:
                    slot = active.get((u, v))
                    if slot is not None:
                        bit = 0 if base is None else next_bit(u, inputs[u], views[u], base)
                        slot[2][pos] = bit
                        emissions[(u, v)] = bit
                if not listening:
                    listening = any((u, v) in active for u, v, _, _ in plan[r][1])
            if not emissions and not listening:
                continue
            obs = self._transmit(base_round + r, emissions, "simulation")
            for plan, active in groups.values():
                if r >= len(plan):
                    continue
                for u, v, pos, is_base in plan[r][1]:
                    slot = active.get((u, v))
                    if slot is not None:
                        sym = obs.get((v, u), SILENCE)
                        slot[2][pos] = sym
                        if is_base:
                            slot[0].extend_view(sym)
        for _, active in groups.values():
            for T, c, buf in active.values():
                T.append_chunk(c, buf, received=None)

    def _rewind(self, r0: int) -> None:
        P = self.parties
        n = self.graph.n
        for p in P:
            for ls in p.links.values():
                ls.already_rewound = False
        pattern = self.channel.pattern
        watching = self._wants("rewind")
        for r in range(n):
            rnd = r0 + r
            emissions = {}
            for p in P:
                low = p.live_min()
                for v, ls in p.links.items():
                    if ls.status != MEETING_POINTS and not ls.already_rewound and len(ls.T) > low:
                        emissions[(p.party, v)] = 1
            if not emissions and not watching and not pattern.rounds_between(rnd, r0 + n):
                break
            for u, v in emissions:
                ls = P[u].links[v]
                ls.T.rewind_one()
                ls.already_rewound = True
            obs = self._transmit(rnd, emissions, "rewind")
            for (s, t), sym in obs.items():
                if sym != 1:
                    continue
                ls = P[t].links[s]
                if ls.status != MEETING_POINTS and not ls.already_rewound and len(ls.T) > 0:
                    ls.T.rewind_one()
                    ls.already_rewound = True

    # -- driver ---------------------------------------------------------------------

    def setup(self) -> None:
        """Commit the noise, build the channel and party states, and run the
        initialization (seed exchange for variant B)."""
        g = self.graph
        adv = self.adversary
        guard = RandomnessGuard()
        if adv.kind == ADAPTIVE:
            pattern, self.adaptive = EMPTY_PATTERN, adv
        else:
            pattern, self.adaptive = commit_oblivious(adv, self.shape, guard, self.trial_seed), None
        guard.draw()
        self.ledger = BudgetLedger(self.epsilon, self.variant.K)
        self.channel = Channel(self.ledger, pattern, self.adaptive, self.record_trace)
        interner = PrefixInterner()
        inputs = self.cp.base.inputs
        self.parties = [
            PartyState(u, tuple(inputs[u]), {v: LinkState(PartialTranscript(interner)) for v in g.adjacency[u]})
            for u in range(g.n)
        ]
        self.seed_exchange_reliable = None
        self.family = self._initialize()
        self.channel.advance_to(self.shape.rounds_init)
        self.err_init = self.ledger.err
        self.observer = Observer(g.edges, self.variant.K, g.m, self.constants, self.alpha)
        self.observer.snapshot(0, self.parties, 0, self.ledger.cc, self.ledger.err)

    def run(self) -> RunReport:
        self.setup()
        g = self.graph
        err_init = self.err_init
        off = self.schedule.offsets
        for i in range(1, self.iterations + 1):
            self.iteration = i
            start = self.shape.iteration_start(i)
            self.channel.corrupted_links = set()
            cc0 = self.ledger.cc
            self._meeting_points(start)
            self._set_status()
            self._flag_passing(start + off["flag_passing"])
            self._simulation(start + off["simulation"])
            self._rewind(start + off["rewind"])
            self.channel.advance_to(start + self.shape.iteration_length)
            self.observer.snapshot(
                i, self.parties, self.ledger.err - err_init, self.ledger.cc, self.ledger.err,
                self.channel.corrupted_links, self.ledger.cc - cc0,
            )
        correct = self.verdict()
        self.observer.check_final(self.cp.num_chunks, correct)
        return RunReport(
            variant=self.variant.tag,
            n=g.n,
            m=g.m,
            K=self.variant.K,
            num_chunks=self.cp.num_chunks,
            content_chunks=self.cp.content_chunks,
            iterations_run=self.iterations,
            cc=self.ledger.cc,
            err=self.ledger.err,
            err_init=err_init,
            budget_valid=self.ledger.budget_valid(),
            correct=correct,
            protocol_cc=self.cp.base.communication_complexity,
            collisions=self.observer.collisions,
            trial_seed=self.trial_seed,
            snapshots=self.observer.snapshots,
            violations=list(self.observer.violations),
            final_lengths={(u, v): len(ls.T) for p in self.parties for v, ls in p.links.items() for u in (p.party,)},
            seed_exchange_reliable=self.seed_exchange_reliable,
            trace=self.channel.trace_tsv() if self.record_trace else None,
        )

    def verdict(self) -> bool:
        """Every per-link transcript starts with the noiseless run's content
        chunks, and every party's output matches the noiseless output."""
        oracle = run_noiseless_oracle(self.cp)
        content = self.cp.content_chunks
        for p in self.parties:
            for v, ls in p.links.items():
                if len(ls.T) < content or ls.T.chunks[:content] != oracle.transcripts[(p.party, v)][:content]:
                    return False
        base = self.cp.base
        if base.output is not None:
            for p in self.parties:
                view = {v: tuple(ls.T.view) for v, ls in p.links.items()}
                if base.output(p.party, base.inputs[p.party], view) != oracle.outputs[p.party]:
                    return False
        return True


def run_simulation(variant: SchemeVariant, cp: ChunkedProtocol, adversary=None, trial_seed: int = 0, epsilon: float = 0.0, **kwargs) -> RunReport:
    return Engine(variant, cp, adversary, trial_seed, epsilon, **kwargs).run()
