"""The coding scheme's building blocks: variants and their parameters,
per-link state, the three hash families, the meeting-points exchange, flag
passing and the seed exchange.

The iteration loop that strings these together over the channel lives in
:mod:`icsim.engine`.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

from . import ecc
from .hashing import DeltaBiasedSpec, DeltaBiasedString, bits_to_int
from .protocol_model import ChunkedProtocol, bit_of
from .topology import SpanningTree
from .transcript import SILENCE, PartialTranscript, int32_bits

SIMULATE = "simulate"
MEETING_POINTS = "meeting-points"

VARIANTS = ("A", "B", "C")

# hash-size constants: tau = HASH_CONST * (K/m) for A, HASH_CONST * lg(m) for B and C
HASH_CONST = 8


class SchemeError(ValueError):
    pass


def lg(m: int) -> int:
    """ceil(log2 m), clamped to at least 1 so that m = 1 or 2 stays usable."""
    return max(1, math.ceil(math.log2(m))) if m > 1 else 1


def lglg(m: int) -> int:
    return math.ceil(math.log2(max(lg(m), 2)))


@dataclass(frozen=True)
class SchemeVariant:
    """Parameters of one scheme variant.

    A: shared random string, oblivious noise, K = m.
    B: no shared string (seeds exchanged in-band), adaptive noise, K = m lg m.
    C: shared random string, adaptive noise, K = m lglg m, double hashing
       with a fresh inner seed per meeting-points phase.
    """

    tag: str
    K: int
    hash_bits: int
    inner_hash_bits: Optional[int] = None
    fresh_seed_bits: Optional[int] = None

    def __post_init__(self) -> None:
        if self.tag not in VARIANTS:
            raise SchemeError(f"unknown variant {self.tag!r}; expected one of {VARIANTS}")
        if self.K < 1 or self.hash_bits < 1:
            raise SchemeError("K and hash width must be positive")
        if self.tag == "C" and (not self.inner_hash_bits or not self.fresh_seed_bits):
            raise SchemeError("variant C needs inner hash width and fresh seed length")

    @property
    def field_widths(self) -> tuple[int, ...]:
        """Widths of the fields one endpoint sends in a meeting-points phase."""
        if self.tag == "C":
            t2 = self.inner_hash_bits
            return (self.fresh_seed_bits, t2, t2, t2)
        return (self.hash_bits,) * 5

    @property
    def meeting_points_rounds(self) -> int:
        return sum(self.field_widths)


def inner_seed_spec(outer_bits: int, inner_bits: int) -> DeltaBiasedSpec:
    """Small-bias expansion of the fresh inner seed into an ip-hash seed of
    outer_bits * inner_bits bits with bias 2^-inner_bits."""
    return DeltaBiasedSpec(outer_bits * inner_bits, inner_bits)


def make_variant(tag: str, m: int, hash_bits: Optional[int] = None, inner_hash_bits: Optional[int] = None) -> SchemeVariant:
    if tag == "A":
        K = m
        return SchemeVariant("A", K, hash_bits or HASH_CONST * K // m)
    if tag == "B":
        return SchemeVariant("B", m * lg(m), hash_bits or HASH_CONST * lg(m))
    if tag == "C":
        outer = hash_bits or HASH_CONST * lg(m)
        inner = inner_hash_bits or HASH_CONST
        return SchemeVariant("C", m * lglg(m), outer, inner, inner_seed_spec(outer, inner).seed_len)
    raise SchemeError(f"unknown variant {tag!r}; expected one of {VARIANTS}")


# --- state ------------------------------------------------------------------------


@dataclass
class LinkState:
    T: PartialTranscript
    k: int = 0
    E: int = 0
    mpc1: int = 0
    mpc2: int = 0
    status: str = SIMULATE
    already_rewound: bool = False


@dataclass
class PartyState:
    party: int
    input: tuple[int, ...]
    links: dict[int, LinkState]
    status: int = 1
    net_correct: int = 1
    min_chunk: int = 0

    def live_min(self) -> int:
        return min(len(ls.T) for ls in self.links.values())

    def view(self) -> dict[int, list[int]]:
        return {v: ls.T.view for v, ls in self.links.items()}


# --- shared-string hashing (variants A and C) --------------------------------------


class SharedRandomString:
    """The common random string: SHAKE-256 keyed by the trial seed and a label.

    Each inner-product segment is its own extendable output, so a segment is
    only generated as far as the input being hashed reaches.
    """

    def __init__(self, trial_seed: int):
        self.trial_seed = trial_seed

    def segment(self, label: tuple, nbits: int) -> int:
        nbytes = (nbits + 7) // 8
        key = ("crs", self.trial_seed) + label
        raw = hashlib.shake_256(repr(key).encode()).digest(nbytes)
        return int.from_bytes(raw, "little") & ((1 << nbits) - 1)

    def ip_hash(self, label: tuple, tau: int, x: int, nbits: int) -> int:
        out = 0
        if nbits == 0 or x == 0:
            return 0
        for t in range(tau):
            out |= ((x & self.segment(label + (t,), nbits)).bit_count() & 1) << t
        return out


def private_bits(trial_seed: int, label: tuple, nbits: int) -> int:
    """A party's private coins for ``label`` (deterministic per trial)."""
    key = ("private", trial_seed) + label
    raw = hashlib.shake_256(repr(key).encode()).digest((nbits + 7) // 8)
    return int.from_bytes(raw, "little") & ((1 << nbits) - 1)


# --- small-bias hashing (variant B) -----------------------------------------------


class DeltaSeedHasher:
    """Inner-product hashes whose seeds are windows of one endpoint's small-bias string.

    Seed j (1..10) of iteration i occupies ``tau * L`` bits starting at
    ``(i-1)*10*tau*L + (j-1)*tau*L``; output bit t of a hash is the inner product
    of the input with the t-th L-bit window of that seed.
    """

    def __init__(self, string: DeltaBiasedString, tau: int, L: int):
        self.string = string
        self.tau = tau
        self.L = L
        f = string.field
        self._stride = 10 * tau * L
        self._seed_offsets = [string.power(j * tau * L) for j in range(10)]
        self._masks = self._output_masks()
        self._iter = (0, 0)
        self._advance = None
        self._seed_starts: dict[tuple[int, int], int] = {}

    def _output_masks(self) -> list[int]:
        """Output bit t is parity((z * a^(tL)) & y), a linear form in z; store
        it as a mask so that bit t is parity(z & mask_t)."""
        f, y = self.string.field, self.string.y
        step = f.fixed_multiplier(self.string.power(self.L))
        masks = []
        c = 1
        for _ in range(self.tau):
            mask, v = 0, c
            for j in range(f.k):
                mask |= ((v & y).bit_count() & 1) << j
                v = f.reduce(v << 1)
            masks.append(mask)
            c = step(c)
        return masks

    def _iteration_base(self, i: int) -> int:
        last, value = self._iter
        if last != i:
            if last and 0 < i - last <= 32:
                if self._advance is None:
                    self._advance = self.string.field.fixed_multiplier(self.string.power(self._stride))
                for _ in range(i - last):
                    value = self._advance(value)
            else:
                value = self.string.field.pow(self.string.a, (i - 1) * self._stride + 1)
            self._iter = (i, value)
        return value

    def hash_eval(self, i: int, j: int, x_eval: int) -> int:
        f = self.string.field
        key = (i, j)
        start = self._seed_starts.get(key)
        if start is None:
            if len(self._seed_starts) >= 20:
                self._seed_starts.clear()
            start = self._seed_starts[key] = f.mul(self._iteration_base(i), self._seed_offsets[j - 1])
        z = f.mul(start, x_eval)
        out = 0
        for t, mask in enumerate(self._masks):
            out |= ((z & mask).bit_count() & 1) << t
        return out

    def hash_int(self, i: int, j: int, x: int, nbits: int) -> int:
        return self.hash_eval(i, j, self.string.evaluate(x, nbits))

    def hash_prefix(self, i: int, j: int, t: PartialTranscript, c: int) -> int:
        return self.hash_eval(i, j, self.string.evaluate_prefix(t, c))


# --- meeting points -----------------------------------------------------------------


@dataclass(frozen=True)
class HashInput:
    """An input to a meeting-points hash: the counter k or a transcript prefix."""

    key: tuple
    transcript: Optional[PartialTranscript] = field(default=None, compare=False)
    chunks: int = 0
    value: int = 0

    def bits(self) -> tuple[int, int]:
        if self.transcript is None:
            return int32_bits(self.value)
        return self.transcript.prefix_bits(self.chunks)


def counter_input(k: int) -> HashInput:
    return HashInput(("k", k), value=k)


def prefix_input(t: PartialTranscript, c: int) -> HashInput:
    return HashInput(("T", t.prefix_id(c)), transcript=t, chunks=c)


@dataclass
class Endpoint:
    """One endpoint's pre-phase meeting-points data."""

    party: int
    k: int
    ktilde: int
    len1: int
    len2: int
    inputs: dict[str, HashInput]


def prepare_endpoint(party: int, ls: LinkState) -> Endpoint:
    k = ls.k + 1
    ktilde = 1 << (k.bit_length() - 1)
    c = len(ls.T) // ktilde
    len1 = c * ktilde
    len2 = max(0, (c - 1) * ktilde)
    return Endpoint(
        party,
        k,
        ktilde,
        len1,
        len2,
        {"k": counter_input(k), "T1": prefix_input(ls.T, len1), "T2": prefix_input(ls.T, len2)},
    )


@dataclass(frozen=True)
class ComparisonRecord:
    name: str
    believed: bool
    truth: bool
    corrupted: bool

    @property
    def collision(self) -> bool:
        return self.believed != self.truth and not self.corrupted


@dataclass
class Verification:
    """What one endpoint did in one meeting-points phase (for instrumentation)."""

    party: int
    neighbor: int
    k: int
    ktilde: int
    comparisons: list[ComparisonRecord]
    early_exit: bool
    bump1: bool
    bump2: bool
    truth1: bool
    truth2: bool
    transition: str  # exit | reset | mp1 | mp2 | window | none
    truncate_to: Optional[int] = None


# sender field layout: (field index, input name); receiver comparisons:
# (name, field index, own input name)
_AB_SENT = ("k", "T1", "T1", "T2", "T2")
_AB_COMPARE = (("ck", 0, "k"), ("c11", 1, "T1"), ("c21", 2, "T2"), ("c12", 3, "T1"), ("c22", 4, "T2"))
_C_SENT = (None, "k", "T1", "T2")
_C_COMPARE = (("ck", 1, "k"), ("c11", 2, "T1"), ("c12", 3, "T1"), ("c21", 2, "T2"), ("c22", 3, "T2"))


class HashFamily:
    """Evaluates the meeting-points hashes of one variant for one run."""

    variant: SchemeVariant

    def sent_function(self, ctx: "ExchangeContext", sender: int, f: int):
        raise NotImplementedError

    def expected_function(self, ctx: "ExchangeContext", receiver: int, f: int):
        raise NotImplementedError

    def same_function(self, ctx: "ExchangeContext", fa, fb) -> bool:
        return fa == fb

    def evaluate(self, ctx: "ExchangeContext", fn, inp: HashInput) -> int:
        raise NotImplementedError

    def raw_field(self, ctx: "ExchangeContext", sender: int, f: int) -> Optional[int]:
        """Fields that are not hashes (variant C's fresh seed); None otherwise."""
        return None


@dataclass
class ExchangeContext:
    iteration: int
    a: int  # lower id
    b: int
    cache: dict = field(default_factory=dict)
    received_seed: dict = field(default_factory=dict)  # variant C: S2 as each endpoint received it

    def other(self, x: int) -> int:
        return self.b if x == self.a else self.a


class CrsFamily(HashFamily):
    """Variant A: ten independent inner-product seeds per link and iteration."""

    def __init__(self, variant: SchemeVariant, crs: SharedRandomString):
        self.variant = variant
        self.crs = crs

    def _seed_base(self, ctx: ExchangeContext, sender: int) -> int:
        return 1 if sender == ctx.a else 6

    def sent_function(self, ctx, sender, f):
        return ("j", self._seed_base(ctx, sender) + f)

    def expected_function(self, ctx, receiver, f):
        return ("j", self._seed_base(ctx, ctx.other(receiver)) + f)

    def evaluate(self, ctx, fn, inp):
        key = (fn, inp.key)
        got = ctx.cache.get(key)
        if got is None:
            x, nbits = inp.bits()
            label = (ctx.iteration, ctx.a, ctx.b, fn[1])
            got = ctx.cache[key] = self.crs.ip_hash(label, self.variant.hash_bits, x, nbits)
        return got


class DeltaFamily(HashFamily):
    """Variant B: the same ten-seed layout read from each endpoint's own copy
    of the exchanged small-bias string (the copies differ if the exchange was
    corrupted)."""

    def __init__(self, variant: SchemeVariant, hashers: Mapping[tuple[int, int], DeltaSeedHasher]):
        self.variant = variant
        self.hashers = hashers  # (holder, neighbor) -> hasher

    def _seed_base(self, ctx, sender):
        return 1 if sender == ctx.a else 6

    def _holder_key(self, ctx, holder):
        same = ctx.cache.get("same")
        if same is None:
            ha, hb = self.hashers[(ctx.a, ctx.b)].string, self.hashers[(ctx.b, ctx.a)].string
            same = ctx.cache["same"] = (ha.a, ha.y) == (hb.a, hb.y)
        return "shared" if same else holder

    def sent_function(self, ctx, sender, f):
        return (self._holder_key(ctx, sender), sender, self._seed_base(ctx, sender) + f)

    def expected_function(self, ctx, receiver, f):
        return (self._holder_key(ctx, receiver), receiver, self._seed_base(ctx, ctx.other(receiver)) + f)

    def same_function(self, ctx, fa, fb):
        return fa[0] == fb[0] and fa[2] == fb[2]

    def evaluate(self, ctx, fn, inp):
        key = (fn[0], fn[2], inp.key)
        got = ctx.cache.get(key)
        if got is None:
            holder = fn[1]
            hasher = self.hashers[(holder, ctx.other(holder))]
            if inp.transcript is None:
                x, nbits = inp.bits()
                got = hasher.hash_int(ctx.iteration, fn[2], x, nbits)
            else:
                got = hasher.hash_prefix(ctx.iteration, fn[2], inp.transcript, inp.chunks)
            ctx.cache[key] = got
        return got


@lru_cache(maxsize=4096)
def _inner_seed(seed: int, spec: DeltaBiasedSpec) -> int:
    return DeltaBiasedString.from_seed_int(spec, seed).expand_int()


class DoubleHashFamily(HashFamily):
    """Variant C: outer inner-product hash with the shared seed, then an inner
    hash keyed by a fresh private seed that travels with the message."""

    def __init__(self, variant: SchemeVariant, crs: SharedRandomString, trial_seed: int):
        self.variant = variant
        self.crs = crs
        self.trial_seed = trial_seed
        self.spec = inner_seed_spec(variant.hash_bits, variant.inner_hash_bits)

    def fresh_seed(self, ctx, sender):
        key = ("s2", sender)
        got = ctx.cache.get(key)
        if got is None:
            label = ("s2", sender, ctx.other(sender), ctx.iteration)
            got = ctx.cache[key] = private_bits(self.trial_seed, label, self.variant.fresh_seed_bits)
        return got

    def raw_field(self, ctx, sender, f):
        return self.fresh_seed(ctx, sender) if f == 0 else None

    def sent_function(self, ctx, sender, f):
        return ("s2", self.fresh_seed(ctx, sender))

    def expected_function(self, ctx, receiver, f):
        return ("s2", ctx.received_seed[receiver])

    def evaluate(self, ctx, fn, inp):
        outer_key = ("h1", inp.key)
        y1 = ctx.cache.get(outer_key)
        if y1 is None:
            x, nbits = inp.bits()
            label = (ctx.iteration, ctx.a, ctx.b, 1)
            y1 = ctx.cache[outer_key] = self.crs.ip_hash(label, self.variant.hash_bits, x, nbits)
        key = (fn, inp.key)
        got = ctx.cache.get(key)
        if got is None:
            seed = _inner_seed(fn[1], self.spec)
            L1, out = self.variant.hash_bits, 0
            mask = (1 << L1) - 1
            for t in range(self.variant.inner_hash_bits):
                out |= ((y1 & (seed >> (t * L1)) & mask).bit_count() & 1) << t
            got = ctx.cache[key] = out
        return got


NoiseEntry = tuple[int, int, bool]  # (offset in phase, value, additive?)


class MeetingPointsExchange:
    """One meeting-points phase on one link, both directions.

    Fields are evaluated lazily: a comparison whose two hashes are provably
    equal (same function, same input, no noise on the field) is decided
    without hashing. ``full=True`` evaluates every field instead; both modes
    must agree exactly.
    """

    def __init__(
        self,
        family: HashFamily,
        iteration: int,
        a: int,
        b: int,
        state_a: LinkState,
        state_b: LinkState,
        noise: Optional[Mapping[tuple[int, int], Sequence[NoiseEntry]]] = None,
        charge: Optional[Callable[[tuple[int, int]], None]] = None,
        full: bool = False,
        cache: Optional[dict] = None,
    ):
        if a > b:
            a, b, state_a, state_b = b, a, state_b, state_a
        self.family = family
        self.variant = family.variant
        self.ctx = ExchangeContext(iteration, a, b, cache if cache is not None else {})
        self.states = {a: state_a, b: state_b}
        self.ends = {a: prepare_endpoint(a, state_a), b: prepare_endpoint(b, state_b)}
        widths = self.variant.field_widths
        self.widths = widths
        self.offsets = [sum(widths[:f]) for f in range(len(widths))]
        self.is_c = self.variant.tag == "C"
        self.sent_layout = _C_SENT if self.is_c else _AB_SENT
        self.compare_layout = _C_COMPARE if self.is_c else _AB_COMPARE
        self._sent: dict[tuple[int, int], int] = {}
        self._received: dict[tuple[int, int], int] = {}
        self.noise: dict[int, list[list[tuple[int, int, bool]]]] = {}
        self.corrupted: dict[int, set[int]] = {}
        for s in (a, b):
            r = self.ctx.other(s)
            per_field: list[list[tuple[int, int, bool]]] = [[] for _ in widths]
            bad: set[int] = set()
            for off, v, additive in (noise or {}).get((s, r), ()):
                f = bisect.bisect_right(self.offsets, off) - 1
                p = off - self.offsets[f]
                per_field[f].append((p, v, additive))
                if additive:
                    hit = v % 3 != 0
                else:
                    hit = v != ((self.sent_field(s, f) >> p) & 1)
                if hit:
                    bad.add(f)
                    if charge is not None:
                        charge((s, r))
            self.noise[r] = per_field
            self.corrupted[r] = bad
        if self.is_c:
            for r in (a, b):
                self.ctx.received_seed[r] = self.received_field(r, 0)
        if full:
            for s in (a, b):
                for f in range(len(widths)):
                    self.sent_field(s, f)
                    self.received_field(self.ctx.other(s), f)
            for r in (a, b):
                for name, f, own in self.compare_layout:
                    self.expected(r, f, own)
        self._believed: dict[tuple[int, str], bool] = {}

    # -- fields ---------------------------------------------------------------------

    def sent_field(self, s: int, f: int) -> int:
        key = (s, f)
        got = self._sent.get(key)
        if got is None:
            raw = self.family.raw_field(self.ctx, s, f)
            if raw is not None:
                got = raw
            else:
                fn = self.family.sent_function(self.ctx, s, f)
                got = self.family.evaluate(self.ctx, fn, self.ends[s].inputs[self.sent_layout[f]])
            self._sent[key] = got
        return got

    def received_field(self, r: int, f: int) -> int:
        key = (r, f)
        got = self._received.get(key)
        if got is None:
            s = self.ctx.other(r)
            got = self.sent_field(s, f)
            for p, v, additive in self.noise[r][f]:
                t = (got >> p) & 1
                obs = (t + v) % 3 if additive else v
                got = (got & ~(1 << p)) | (bit_of(obs) << p)
            self._received[key] = got
        return got

    def expected(self, r: int, f: int, own: str) -> int:
        fn = self.family.expected_function(self.ctx, r, f)
        return self.family.evaluate(self.ctx, fn, self.ends[r].inputs[own])

    def sent_word(self, s: int) -> list[int]:
        """All bits ``s`` sends in this phase, in transmission order."""
        out = []
        for f, w in enumerate(self.widths):
            v = self.sent_field(s, f)
            out.extend((v >> p) & 1 for p in range(w))
        return out

    def received_word(self, r: int) -> list[int]:
        out = []
        for f, w in enumerate(self.widths):
            v = self.received_field(r, f)
            out.extend((v >> p) & 1 for p in range(w))
        return out

    # -- comparisons ------------------------------------------------------------------

    def _field_corrupted(self, r: int, f: int) -> bool:
        bad = self.corrupted[r]
        return f in bad or (self.is_c and 0 in bad)

    def truth(self, r: int, f: int, own: str) -> bool:
        s = self.ctx.other(r)
        return self.ends[s].inputs[self.sent_layout[f]].key == self.ends[r].inputs[own].key

    def believe(self, r: int, name: str) -> bool:
        key = (r, name)
        got = self._believed.get(key)
        if got is None:
            _, f, own = next(c for c in self.compare_layout if c[0] == name)
            s = self.ctx.other(r)
            if (
                not self.noise[r][f]
                and not (self.is_c and self.noise[r][0])
                and self.truth(r, f, own)
                and self.family.same_function(
                    self.ctx,
                    self.family.sent_function(self.ctx, s, f),
                    self.family.expected_function(self.ctx, r, f),
                )
            ):
                got = True
            else:
                got = self.received_field(r, f) == self.expected(r, f, own)
            self._believed[key] = got
            self._log[r].append(ComparisonRecord(name, got, self.truth(r, f, own), self._field_corrupted(r, f)))
        return got

    def _decide(self, r: int) -> Verification:
        ls, end = self.states[r], self.ends[r]
        s = self.ctx.other(r)
        k, E = end.k, ls.E
        if not self.believe(r, "ck"):
            E += 1
        mine, theirs = self.ends[r].inputs, self.ends[s].inputs
        truth1 = mine["T1"].key in (theirs["T1"].key, theirs["T2"].key)
        truth2 = mine["T2"].key in (theirs["T1"].key, theirs["T2"].key)
        v = Verification(r, s, k, end.ktilde, self._log[r], False, False, False, truth1, truth2, "none")
        if k == 1 and E == 0 and self.believe(r, "c11"):
            v.early_exit, v.transition = True, "exit"
            self._actions[r] = dict(k=0, status=SIMULATE)
            return v
        bump1 = self.believe(r, "c11") or self.believe(r, "c12")
        bump2 = not bump1 and (self.believe(r, "c21") or self.believe(r, "c22"))
        v.bump1, v.bump2 = bump1, bump2
        mpc1, mpc2 = ls.mpc1 + bump1, ls.mpc2 + bump2
        if 2 * E >= k:
            v.transition = "reset"
            self._actions[r] = dict(k=0, E=0, mpc1=0, mpc2=0, status=MEETING_POINTS)
        elif k == end.ktilde:
            act = dict(k=k, E=E, mpc1=0, mpc2=0, status=MEETING_POINTS)
            if mpc1 > 0.4 * k:
                v.transition, v.truncate_to = "mp1", end.len1
                act.update(k=0, E=0)
            elif mpc2 > 0.4 * k:
                v.transition, v.truncate_to = "mp2", end.len2
                act.update(k=0, E=0)
            else:
                v.transition = "window"
            self._actions[r] = act
        else:
            self._actions[r] = dict(k=k, E=E, mpc1=mpc1, mpc2=mpc2, status=MEETING_POINTS)
        return v

    def run(self) -> dict[int, Verification]:
        """Decide both endpoints on the pre-phase state, then apply."""
        a, b = self.ctx.a, self.ctx.b
        self._log = {a: [], b: []}
        self._actions: dict[int, dict] = {}
        out = {a: self._decide(a), b: self._decide(b)}
        for r in (a, b):
            ls = self.states[r]
            for name, value in self._actions[r].items():
                setattr(ls, name, value)
            if out[r].truncate_to is not None:
                ls.T.truncate(out[r].truncate_to)
        return out


# --- flag passing -----------------------------------------------------------------


class FlagPassing:
    """Convergecast-then-broadcast AND over the BFS tree in 2*depth rounds.

    A node at level l sends to its parent in round d - l and, if it has
    children, to them in round d + l - 1; it hears its parent in round
    d + l - 2. Missing bits read as 0.
    """

    def __init__(self, tree: SpanningTree, status: Sequence[int]):
        self.tree = tree
        self.status = list(status)
        self.net = list(status)
        self._up: dict[int, list[int]] = {v: [] for v in range(len(status))}
        d = tree.depth
        self.rounds = 2 * d
        self._sends: dict[int, list[tuple[int, int, str]]] = {}
        self._recvs: dict[int, list[tuple[int, int, str]]] = {}
        for v in range(len(status)):
            lv = tree.level[v]
            p = tree.parent[v]
            if p is not None:
                self._sends.setdefault(d - lv, []).append((v, p, "up"))
                self._recvs.setdefault(d - lv, []).append((p, v, "up"))
                self._recvs.setdefault(d + lv - 2, []).append((v, p, "down"))
            for c in tree.children[v]:
                self._sends.setdefault(d + lv - 1, []).append((v, c, "down"))

    def active_rounds(self) -> list[int]:
        return sorted(set(self._sends) | set(self._recvs))

    def emissions(self, r: int) -> dict[tuple[int, int], int]:
        out = {}
        for v, w, direction in self._sends.get(r, ()):
            if direction == "up":
                bits = self._up[v]
                if len(bits) != len(self.tree.children[v]):
                    bits = bits + [0] * (len(self.tree.children[v]) - len(bits))
                self.net[v] = int(all(bits) and self.status[v])
            out[(v, w)] = self.net[v]
        return out

    def receive(self, r: int, obs: Mapping[tuple[int, int], int]) -> None:
        for receiver, sender, direction in self._recvs.get(r, ()):
            b = bit_of(obs.get((sender, receiver), SILENCE))
            if direction == "up":
                self._up[receiver].append(b)
            else:
                self.net[receiver] = b & self.status[receiver]
        if r == self.tree.depth - 2:
            root = self.tree.root
            self.net[root] = int(all(self._up[root]) and self.status[root])


def flag_passing(tree: SpanningTree, status: Sequence[int], deliver: Optional[Callable[[int, dict], dict]] = None) -> list[int]:
    """Run flag passing standalone; ``deliver(round, emissions)`` may corrupt."""
    fp = FlagPassing(tree, status)
    for r in range(fp.rounds):
        em = fp.emissions(r)
        obs = deliver(r, em) if deliver is not None else em
        fp.receive(r, obs)
    return fp.net


# --- seed exchange (variant B) ------------------------------------------------------


@dataclass(frozen=True)
class SeedPlan:
    """Sizes for the in-band seed exchange of variant B."""

    spec: DeltaBiasedSpec
    code: ecc.CodeSpec
    hash_input_bits: int

    @property
    def rounds(self) -> int:
        return self.code.block_len_bits


def seed_plan(variant: SchemeVariant, cp: ChunkedProtocol, iterations: int) -> SeedPlan:
    L = max_serialized_length(cp, iterations)
    output_len = iterations * 10 * variant.hash_bits * L
    log2_inv_bias = max(1, cp.num_chunks * variant.K // cp.graph.m)
    spec = DeltaBiasedSpec(output_len, log2_inv_bias)
    return SeedPlan(spec, ecc.make_code_spec(spec.seed_len), L)


def max_serialized_length(cp: ChunkedProtocol, iterations: int) -> int:
    """Upper bound on the serialization of any transcript in a run: at most one
    chunk is appended per iteration."""
    widest = max(max(layout.link_size(a, b) for (a, b) in layout.link_slots) for layout in cp.content + (cp.dummy,))
    return iterations * (2 * widest + 32)


def randomness_exchange(
    seed_bits: Sequence[int],
    plan: SeedPlan,
    channel_word: Optional[Callable[[tuple[int, ...]], Sequence[Optional[int]]]] = None,
) -> tuple[DeltaBiasedString, DeltaBiasedString, bool]:
    """Lower-id endpoint encodes its seed; the other decodes what arrives.

    Returns (sender's string, receiver's string, decode reliable).
    """
    word = ecc.encode(seed_bits, plan.code)
    received = channel_word(word) if channel_word is not None else word
    res = ecc.decode(received, plan.code)
    mine = DeltaBiasedString.from_seed_int(plan.spec, bits_to_int(seed_bits))
    theirs = DeltaBiasedString.from_seed_int(plan.spec, bits_to_int(res.message))
    return mine, theirs, res.reliable
