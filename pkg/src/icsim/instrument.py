"""Omniscient observer: the potential function and its ingredients, computed
at iteration boundaries, plus the invariant checks built on them.

Nothing here feeds back into party decisions; the engine hands the observer
read-only state after each phase.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Optional, Sequence

from .scheme import PartyState, Verification
from .transcript import common_prefix_length

Link = tuple[int, int]


@dataclass(frozen=True)
class PotentialConstants:
    C1: float = 4
    C2: float = 8
    C3: float = 128
    C4: float = 512
    C5: float = 4096
    C6: float = 65536
    C7: float = 2 ** 21

    def violations(self) -> list[str]:
        """The ordering and size requirements the analysis places on the constants."""
        c = self
        checks = [
            (2 <= c.C1 < c.C2 < c.C3 < c.C4 < c.C5 < c.C6 < c.C7, "2 <= C1 < C2 < ... < C7"),
            (c.C2 > 2.5, "C2 > 2.5"),
            (c.C3 > 8 * c.C2 + 1, "C3 > 8*C2 + 1"),
            (c.C4 > 20 and 0.05 * c.C4 >= 2 * c.C1 + 2, "C4 > 20 and 0.05*C4 >= 2*C1 + 2"),
            (c.C5 > 28 * c.C3 + 1 and c.C5 > 2 * c.C2 + 1, "C5 > 28*C3 + 1 and C5 > 2*C2 + 1"),
            (c.C6 >= 2 * c.C3 and c.C6 >= 10 * c.C5, "C6 >= 2*C3 and C6 >= 10*C5"),
            (c.C7 >= 10 * c.C6, "C7 >= 10*C6"),
        ]
        return [msg for ok, msg in checks if not ok]


@dataclass
class PotentialSnapshot:
    iteration: int
    G: dict[Link, int]
    B: dict[Link, int]
    phi_link: dict[Link, float]
    WM: dict[Link, int]  # directed: (u, v) is u's count on link {u, v}
    G_star: int
    H_star: int
    B_star: int
    EHC: int
    phi: float
    ell: int
    cc: int
    err: int
    iteration_cc: int = 0

    def row(self, delta_phi: Optional[float]) -> dict:
        return {
            "iteration": self.iteration,
            "phi": self.phi,
            "delta_phi": "" if delta_phi is None else delta_phi,
            "G_star": self.G_star,
            "H_star": self.H_star,
            "B_star": self.B_star,
            "EHC": self.EHC,
            "ell": self.ell,
            "CC": self.cc,
            "Err": self.err,
        }

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}  # shallow; asdict deep-copies
        for key in ("G", "B", "phi_link", "WM"):
            d[key] = {f"{a}-{b}": v for (a, b), v in sorted(d[key].items())}
        return d


@dataclass(frozen=True)
class Violation:
    kind: str
    iteration: int
    detail: str


def link_potential(consts: PotentialConstants, B: int, k_uv: int, k_vu: int, E_sum: int, wm_sum: int) -> float:
    k_sum = k_uv + k_vu
    if k_uv == k_vu:
        return consts.C3 * B - consts.C2 * k_sum + consts.C5 * E_sum + 2 * consts.C6 * wm_sum
    return consts.C3 * B + 0.9 * consts.C4 * k_sum - consts.C4 * E_sum + consts.C6 * wm_sum


def detect_hash_collision(v: Verification) -> int:
    """Comparisons whose outcome contradicts the truth although none of the
    bits they depend on were corrupted."""
    return sum(1 for c in v.comparisons if c.collision)


def track_wrong_matches(wm: int, v: Verification) -> int:
    """Update one party's wrong-match count after a meeting-points phase.

    A verification without early exit is wrong when the counter bumps differ
    from what the true prefixes call for. The count restarts whenever the
    party takes a reset or meeting-point transition.
    """
    if v.early_exit:
        return wm
    expect = (v.truth1, (not v.truth1) and v.truth2)
    if (v.bump1, v.bump2) != expect:
        wm += 1
    if v.transition in ("reset", "mp1", "mp2"):
        wm = 0
    return wm


class Observer:
    """Accumulates collisions and wrong matches and takes snapshots."""

    def __init__(self, edges: Sequence[Link], K: int, m: int, constants: PotentialConstants = PotentialConstants(), alpha: float = 128.0):
        self.edges = list(edges)
        self.K = K
        self.m = m
        self.constants = constants
        self.alpha = alpha
        self.wm: dict[Link, int] = {}
        for a, b in self.edges:
            self.wm[(a, b)] = self.wm[(b, a)] = 0
        self.collisions = 0
        self.iteration_collision_links: set[Link] = set()
        self.snapshots: list[PotentialSnapshot] = []
        self.violations: list[Violation] = []

    # -- event intake -----------------------------------------------------------

    def record_verifications(self, link: Link, records: Mapping[int, Verification]) -> None:
        a, b = link
        for party, v in records.items():
            hits = detect_hash_collision(v)
            if hits:
                self.collisions += hits
                self.iteration_collision_links.add((min(a, b), max(a, b)))
            key = (party, v.neighbor)
            self.wm[key] = track_wrong_matches(self.wm[key], v)

    # -- snapshots ------------------------------------------------------------------

    def snapshot(self, iteration: int, parties: Sequence[PartyState], err_main: int, cc: int, err: int, corrupted_links: Iterable[Link] = (), iteration_cc: int = 0) -> PotentialSnapshot:
        c = self.constants
        G, B, phi_link = {}, {}, {}
        h_star = 0
        for a, b in self.edges:
            la, lb = parties[a].links[b], parties[b].links[a]
            g = common_prefix_length(la.T, lb.T)
            hi = max(len(la.T), len(lb.T))
            G[(a, b)] = g
            B[(a, b)] = hi - g
            h_star = max(h_star, hi)
            phi_link[(a, b)] = link_potential(c, hi - g, la.k, lb.k, la.E + lb.E, self.wm[(a, b)] + self.wm[(b, a)])
        g_star = min(G.values())
        ehc = err_main + self.collisions
        K, m = self.K, self.m
        phi = sum(K / m * G[e] - K * phi_link[e] for e in self.edges) - c.C1 * K * (h_star - g_star) + c.C7 * K * ehc
        ell = len(set(corrupted_links) | self.iteration_collision_links)
        snap = PotentialSnapshot(iteration, G, B, phi_link, dict(self.wm), g_star, h_star, h_star - g_star, ehc, phi, ell, cc, err, iteration_cc)
        self._check(snap)
        self.snapshots.append(snap)
        self.iteration_collision_links = set()
        return snap

    def _check(self, snap: PotentialSnapshot) -> None:
        for e in self.edges:
            if not 0 <= snap.B[e] <= snap.phi_link[e]:
                self.violations.append(Violation("link-potential-bound", snap.iteration, f"link {e}: B={snap.B[e]} phi={snap.phi_link[e]}"))
        if self.snapshots:
            prev = self.snapshots[-1]
            delta = snap.phi - prev.phi
            if delta < self.K:
                self.violations.append(Violation("potential-increase", snap.iteration, f"delta phi = {delta} < K = {self.K}"))
            bound = self.alpha * (1 + snap.ell) * self.K
            if snap.iteration_cc > bound:
                self.violations.append(Violation("iteration-communication", snap.iteration, f"CC {snap.iteration_cc} > alpha(1+ell)K = {bound}"))

    def check_final(self, num_chunks: int, correct: bool) -> None:
        """If the potential says the run must have finished, it must have."""
        if not self.snapshots:
            return
        last = self.snapshots[-1]
        if last.phi >= 100 * num_chunks * self.K and last.EHC <= num_chunks / self.constants.C7:
            if last.G_star < num_chunks or not correct:
                self.violations.append(
                    Violation("final-soundness", last.iteration, f"G*={last.G_star} < {num_chunks} or incorrect output")
                )

    def deltas(self) -> list[Optional[float]]:
        out: list[Optional[float]] = [None]
        for prev, cur in zip(self.snapshots, self.snapshots[1:]):
            out.append(cur.phi - prev.phi)
        return out


CSV_FIELDS = ["iteration", "phi", "delta_phi", "G_star", "H_star", "B_star", "EHC", "ell", "CC", "Err"]


def snapshots_csv(snapshots: Sequence[PotentialSnapshot]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    prev = None
    for s in snapshots:
        w.writerow(s.row(None if prev is None else s.phi - prev.phi))
        prev = s
    return buf.getvalue()
