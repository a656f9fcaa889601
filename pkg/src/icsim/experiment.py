"""Trial sweeps: build runs from a config, execute them (optionally in
parallel), write per-trial reports and aggregate statistics."""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional

from .adversaries import make_adversary
from .config import ConfigError, ExperimentConfig, validate_config
from .engine import RunReport, run_simulation
from .instrument import PotentialConstants
from .protocol_model import ChunkedProtocol, ProtocolError, chunk_protocol
from .sample_protocols import protocol_from_descriptor
from .scheme import SchemeVariant, make_variant
from .topology import TopologyError


class InvariantViolation(RuntimeError):
    def __init__(self, seed: int, violation: dict, snapshot: Optional[dict]):
        super().__init__(f"trial seed {seed}: {violation['kind']} at iteration {violation['iteration']}: {violation['detail']}")
        self.seed = seed
        self.violation = violation
        self.snapshot = snapshot


def build_run(cfg: ExperimentConfig) -> tuple[SchemeVariant, ChunkedProtocol]:
    try:
        g = cfg.topology.build()
        variant = make_variant(cfg.variant, g.m, cfg.hash_bits, cfg.inner_hash_bits)
        base = protocol_from_descriptor(g, cfg.protocol.descriptor())
        dummy = cfg.protocol.dummy_chunks
        if cfg.protocol.total_chunks is not None:
            content = chunk_protocol(base, variant.K, 0).content_chunks
            dummy = cfg.protocol.total_chunks - content
            if dummy < 0:
                raise ConfigError(f"protocol.total_chunks: the protocol already has {content} content chunks")
        return variant, chunk_protocol(base, variant.K, dummy)
    except (TopologyError, ProtocolError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def run_trial(cfg: ExperimentConfig, seed: int, record_trace: Optional[bool] = None) -> RunReport:
    variant, cp = build_run(cfg)
    inst = cfg.instrumentation
    adversary = make_adversary(cfg.adversary.model_dump())
    return run_simulation(
        variant,
        cp,
        adversary,
        trial_seed=seed,
        epsilon=cfg.epsilon,
        iterations=cfg.iterations,
        record_trace=inst.trace if record_trace is None else record_trace,
        full_hashing=inst.full_hashing,
        constants=PotentialConstants(**inst.constants),
        alpha=inst.alpha,
    )


@dataclass
class TrialOutcome:
    seed: int
    report_json: str
    csv: str
    trace: Optional[str]
    summary: dict[str, Any]
    first_violation: Optional[dict]
    violation_snapshot: Optional[dict]


def _trial_job(args: tuple[str, int]) -> TrialOutcome:
    cfg_json, seed = args
    cfg = validate_config(cfg_json)
    rep = run_trial(cfg, seed)
    first = rep.violations[0].__dict__ if rep.violations else None
    snap = None
    if first is not None:
        snap = next((s.to_json() for s in rep.snapshots if s.iteration == first["iteration"]), None)
    summary = {
        "seed": seed,
        "correct": rep.correct,
        "cc": rep.cc,
        "protocol_cc": rep.protocol_cc,
        "err": rep.err,
        "budget_valid": rep.budget_valid,
        "collisions": rep.collisions,
        "violations": [v.kind for v in rep.violations],
    }
    return TrialOutcome(seed, rep.dumps(cfg.instrumentation.per_link), rep.potential_csv(), rep.trace, summary, first, snap)


def iter_trials(cfg: ExperimentConfig, jobs: int = 1) -> Iterator[TrialOutcome]:
    """Trial outcomes in seed order, whatever the degree of parallelism."""
    cfg_json = cfg.model_dump_json()
    args = [(cfg_json, cfg.base_seed + t) for t in range(cfg.trials)]
    if jobs <= 1:
        for a in args:
            yield _trial_job(a)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_trial_job, args)


def aggregate(cfg: ExperimentConfig, summaries: list[dict[str, Any]]) -> dict[str, Any]:
    n = len(summaries)
    ccs = [s["cc"] for s in summaries]
    errs = [s["err"] for s in summaries]
    hist: dict[str, int] = {}
    for e in sorted(errs):
        hist[str(e)] = hist.get(str(e), 0) + 1
    kinds: dict[str, int] = {}
    for s in summaries:
        for k in s["violations"]:
            kinds[k] = kinds.get(k, 0) + 1
    return {
        "variant": cfg.variant,
        "epsilon": cfg.epsilon,
        "adversary": cfg.adversary.strategy,
        "trials": n,
        "seeds": [s["seed"] for s in summaries],
        "success_rate": sum(s["correct"] for s in summaries) / n,
        "correct_trials": sum(s["correct"] for s in summaries),
        "cc": {"mean": statistics.fmean(ccs), "min": min(ccs), "max": max(ccs)},
        "protocol_cc": summaries[0]["protocol_cc"],
        "cc_overhead_mean": statistics.fmean(s["cc"] / s["protocol_cc"] for s in summaries),
        "err": {"mean": statistics.fmean(errs), "min": min(errs), "max": max(errs), "histogram": hist},
        "budget_valid_rate": sum(s["budget_valid"] for s in summaries) / n,
        "collisions_total": sum(s["collisions"] for s in summaries),
        "invariant_violations": sum(kinds.values()),
        "violations_by_kind": dict(sorted(kinds.items())),
    }


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out: Optional[str | Path] = None) -> dict[str, Any]:
    """Run every trial, write per-trial files and the aggregate under ``out``
    (default: the config's ``output``), and return the aggregate.

    Stops at the first trial that violates an invariant, after writing that
    trial's files and ``violation.json``, by raising :class:`InvariantViolation`.
    """
    out_dir = Path(out) if out is not None else (Path(cfg.output) if cfg.output else None)
    summaries = []
    for outcome in iter_trials(cfg, jobs):
        summaries.append(outcome.summary)
        if out_dir is not None:
            stem = f"trial-{outcome.seed:06d}"
            _write(out_dir / f"{stem}.json", outcome.report_json)
            _write(out_dir / f"{stem}.csv", outcome.csv)
            if outcome.trace is not None:
                _write(out_dir / f"{stem}.trace.tsv", outcome.trace)
        if outcome.first_violation is not None:
            if out_dir is not None:
                body = {"seed": outcome.seed, "violation": outcome.first_violation, "snapshot": outcome.violation_snapshot}
                _write(out_dir / "violation.json", json.dumps(body, sort_keys=True, indent=1))
            raise InvariantViolation(outcome.seed, outcome.first_violation, outcome.violation_snapshot)
    agg = aggregate(cfg, summaries)
    if out_dir is not None:
        _write(out_dir / "aggregate.json", json.dumps(agg, sort_keys=True, indent=1))
        _write(out_dir / "trials.csv", trials_csv(summaries))
    return agg


def trials_csv(summaries: list[dict[str, Any]]) -> str:
    lines = ["seed,correct,cc,err,budget_valid,collisions,violations"]
    for s in summaries:
        lines.append(f"{s['seed']},{int(s['correct'])},{s['cc']},{s['err']},{int(s['budget_valid'])},{s['collisions']},{len(s['violations'])}")
    return "\n".join(lines) + "\n"
