"""Disorder ensembles: deterministic sampling, evolution, peak collection.

Two disorder kinds are supported: Gaussian Josephson energies at fixed flux
(``ej_gaussian``) and Gaussian flux detunings at fixed E_J (``flux_gaussian``).
Every site of every realization draws from its own RNG stream seeded by
``(base_seed, realization_index, site)``, so results are independent of
scheduling and worker count.  Bond couplings stay uniform.

Realizations are independent jobs; a worker pool runs them and an append-only
JSONL checkpoint makes interrupted ensembles resumable (completed indices are
skipped, which by the seeding contract reproduces the uninterrupted result).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .chain import ChainSpec, assemble_hamiltonian, basis_state, build_chain
from .circuit import FluxoniumParams
from .errors import CheckpointMismatchError, EnsembleError, ParameterError
from .evolution import evolve, peak_stats, time_grid

DISORDER_KINDS = ("ej_gaussian", "flux_gaussian")
MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian disorder description plus ensemble size and seeding."""

    kind: str          # "ej_gaussian" | "flux_gaussian"
    mean: float        # GHz for E_J, radians for flux
    sigma: float       # GHz or radians
    n_realizations: int
    base_seed: int

    def __post_init__(self):
        if self.kind not in DISORDER_KINDS:
            raise ParameterError(f"unknown disorder kind {self.kind!r}")
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.n_realizations < 1:
            raise ParameterError(f"n_realizations must be >= 1, got {self.n_realizations}")


@dataclass(frozen=True)
class ChainTemplate:
    """Clean chain that disorder perturbs: circuit, length, uniform coupling."""

    length: int
    circuit: FluxoniumParams
    coupling: float    # GHz

    def __post_init__(self):
        if self.length < 1:
            raise ParameterError(f"length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class EvolutionOptions:
    """Time grid, peak window and integrator tolerance for ensemble runs."""

    t_max: float = 30.0    # ns
    dt: float = 0.05       # ns
    t_star: float = 30.0   # ns
    tol: float = 1e-10

    def __post_init__(self):
        if self.t_star > self.t_max:
            raise ParameterError(
                f"t_star = {self.t_star} ns exceeds t_max = {self.t_max} ns")

    def grid(self) -> np.ndarray:
        return time_grid(self.t_max, self.dt)


@dataclass(frozen=True)
class SampledChain:
    chain: ChainSpec
    sampled: np.ndarray   # per-site E_J (GHz) or flux offset (radians)
    resamples: int        # truncated non-positive E_J draws


@dataclass(frozen=True)
class RealizationRecord:
    """One realization's outcome; failures are recorded, never dropped."""

    index: int
    seed: tuple[int, int]          # (base_seed, index)
    status: str                    # "ok" | "failed"
    sampled: np.ndarray | None = None
    epsilon: np.ndarray | None = None
    p_peak: np.ndarray | None = None
    t_peak: np.ndarray | None = None
    resamples: int = 0
    error: str | None = None


@dataclass(frozen=True)
class EnsembleResult:
    template: ChainTemplate
    disorder: DisorderSpec
    evo: EvolutionOptions
    records: list[RealizationRecord]   # sorted by index, one per realization
    fingerprint: str

    @property
    def ok_records(self) -> list[RealizationRecord]:
        return [r for r in self.records if r.status == "ok"]

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.records if r.status != "ok")

    @property
    def peak_matrix(self) -> np.ndarray:
        """(n_ok, L) matrix of per-site peak probabilities."""
        return np.array([r.p_peak for r in self.ok_records])

    @property
    def epsilon_samples(self) -> np.ndarray:
        """All sampled splittings pooled over sites and realizations."""
        return np.concatenate([r.epsilon for r in self.ok_records])


def _site_rng(base_seed: int, index: int, site: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((base_seed, index, site)))


def sample_realization(template: ChainTemplate, disorder: DisorderSpec,
                       index: int, **solver_kwargs) -> SampledChain:
    """Draw one disordered chain; per-site streams keyed (seed, index, site).

    Non-positive E_J draws are rejected and redrawn (counted); with the
    sigmas in use here that is a many-sigma event.
    """
    if index < 0 or index >= disorder.n_realizations:
        raise ParameterError(
            f"realization index {index} outside 0..{disorder.n_realizations - 1}")
    values = np.empty(template.length)
    resamples = 0
    for site in range(template.length):
        rng = _site_rng(disorder.base_seed, index, site)
        v = rng.normal(disorder.mean, disorder.sigma)
        if disorder.kind == "ej_gaussian":
            while v <= 0.0:
                resamples += 1
                v = rng.normal(disorder.mean, disorder.sigma)
        values[site] = v

    base = template.circuit
    if disorder.kind == "ej_gaussian":
        params = [base.replace(e_j=v) for v in values]
    else:
        params = [base.replace(phi=v) for v in values]
    chain = build_chain(params, np.full(template.length - 1, template.coupling),
                        label=f"{disorder.kind} r{index}", **solver_kwargs)
    return SampledChain(chain=chain, sampled=values, resamples=resamples)


def run_realization(template: ChainTemplate, disorder: DisorderSpec,
                    evo: EvolutionOptions, index: int) -> RealizationRecord:
    """Sample, assemble, evolve from site 0 excited, extract peaks."""
    seed = (disorder.base_seed, index)
    try:
        sampled = sample_realization(template, disorder, index)
        h = assemble_hamiltonian(sampled.chain)
        record = evolve(h, basis_state(template.length, {0}), evo.grid(), tol=evo.tol)
        peaks = peak_stats(record, evo.t_star)
        return RealizationRecord(
            index=index,
            seed=seed,
            status="ok",
            sampled=sampled.sampled,
            epsilon=np.array([s.epsilon for s in sampled.chain.sites]),
            p_peak=np.array([p for p, _ in peaks]),
            t_peak=np.array([t for _, t in peaks]),
            resamples=sampled.resamples,
        )
    except Exception as exc:  # recorded, ensemble continues
        return RealizationRecord(index=index, seed=seed, status="failed",
                                 error=f"{type(exc).__name__}: {exc}")


def ensemble_fingerprint(template: ChainTemplate, disorder: DisorderSpec,
                         evo: EvolutionOptions) -> str:
    blob = json.dumps(
        {"template": asdict(template), "disorder": asdict(disorder), "evo": asdict(evo)},
        sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _record_to_json(rec: RealizationRecord) -> str:
    def arr(a):
        return None if a is None else [float(x) for x in a]
    return json.dumps({
        "index": rec.index, "seed": list(rec.seed), "status": rec.status,
        "sampled": arr(rec.sampled), "epsilon": arr(rec.epsilon),
        "p_peak": arr(rec.p_peak), "t_peak": arr(rec.t_peak),
        "resamples": rec.resamples, "error": rec.error,
    }, sort_keys=True, separators=(",", ":"))


def _record_from_json(line: str) -> RealizationRecord:
    d = json.loads(line)
    def arr(x):
        return None if x is None else np.asarray(x, dtype=float)
    return RealizationRecord(
        index=int(d["index"]), seed=tuple(d["seed"]), status=d["status"],
        sampled=arr(d["sampled"]), epsilon=arr(d["epsilon"]),
        p_peak=arr(d["p_peak"]), t_peak=arr(d["t_peak"]),
        resamples=int(d.get("resamples", 0)), error=d.get("error"),
    )


def read_checkpoint(path) -> tuple[dict, dict[int, RealizationRecord]]:
    """Read a checkpoint's header and all realization records."""
    records: dict[int, RealizationRecord] = {}
    header: dict = {}
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        if header_line:
            header = json.loads(header_line)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = _record_from_json(line)
            records[rec.index] = rec
    return header, records


def load_checkpoint(path: Path, fingerprint: str) -> dict[int, RealizationRecord]:
    """Read completed realizations; refuse a checkpoint of a different run."""
    header, records = read_checkpoint(path)
    if header and header.get("fingerprint") != fingerprint:
        raise CheckpointMismatchError(
            f"checkpoint {path} belongs to a different configuration "
            f"({header.get('fingerprint')!r} != {fingerprint!r})")
    return records


def run_ensemble(template: ChainTemplate, disorder: DisorderSpec,
                 evo: EvolutionOptions, workers: int = 1,
                 checkpoint_path: str | os.PathLike | None = None,
                 fingerprint: str | None = None,
                 progress: bool = False) -> EnsembleResult:
    """Run (or resume) all realizations and return the ordered result.

    Aggregation is order-independent: records are keyed and sorted by index,
    and each realization depends only on (base_seed, index), so any worker
    count and any completion order produce the same result.  More than
    ``MAX_FAILURE_FRACTION`` failed realizations abort with an error.
    """
    fingerprint = fingerprint or ensemble_fingerprint(template, disorder, evo)
    done: dict[int, RealizationRecord] = {}
    checkpoint = Path(checkpoint_path) if checkpoint_path is not None else None
    if checkpoint is not None and checkpoint.exists():
        done = load_checkpoint(checkpoint, fingerprint)

    todo = [i for i in range(disorder.n_realizations) if i not in done]
    writer = None
    if checkpoint is not None:
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        fresh = not checkpoint.exists()
        writer = open(checkpoint, "a", encoding="utf-8")
        if fresh:
            writer.write(json.dumps({"fingerprint": fingerprint,
                                     "n_realizations": disorder.n_realizations},
                                    sort_keys=True) + "\n")
            writer.flush()

    def emit(rec: RealizationRecord):
        done[rec.index] = rec
        if writer is not None:
            writer.write(_record_to_json(rec) + "\n")
            writer.flush()
        if progress:
            n = len(done)
            print(f"  [{n}/{disorder.n_realizations}] realization {rec.index}: "
                  f"{rec.status}", flush=True)

    try:
        if workers <= 1:
            for i in todo:
                emit(run_realization(template, disorder, evo, i))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_realization, template, disorder, evo, i)
                           for i in todo]
                for fut in as_completed(futures):
                    emit(fut.result())
    finally:
        if writer is not None:
            writer.close()

    records = [done[i] for i in sorted(done)]
    if len(records) != disorder.n_realizations:
        raise EnsembleError(
            f"expected {disorder.n_realizations} records, got {len(records)}")
    n_failed = sum(1 for r in records if r.status != "ok")
    if n_failed > MAX_FAILURE_FRACTION * disorder.n_realizations:
        raise EnsembleError(
            f"{n_failed}/{disorder.n_realizations} realizations failed "
            f"(> {MAX_FAILURE_FRACTION:.0%})")
    return EnsembleResult(template=template, disorder=disorder, evo=evo,
                          records=records, fingerprint=fingerprint)


def empirical_delta_epsilon(result: EnsembleResult) -> float:
    """Pooled std of sampled splittings: sqrt(mean(eps^2) - mean(eps)^2)."""
    samples = result.epsilon_samples
    if samples.size < 2:
        raise ParameterError("need at least two epsilon samples")
    return float(np.sqrt(max(np.mean(samples**2) - np.mean(samples) ** 2, 0.0)))
