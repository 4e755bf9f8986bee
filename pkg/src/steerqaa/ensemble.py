"""Seeded disorder ensembles and their aggregated observables."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evolution import IntegrationError, IntegratorConfig, evolve
from .model import Boundary, DisorderInstance, naive_solution, naive_success, sorted_spectrum
from .schedule import COS_SIN
from .steering import CDForm, Steering


class EnsembleError(RuntimeError):
    def __init__(self, seed: int, index: int, cause: Exception):
        super().__init__(f"realization (seed={seed}, index={index}) failed: {cause}")
        self.seed = seed
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class EnsembleSpec:
    L: int
    J: float
    t_a: float
    mode: Steering = Steering.SINGLE
    n_realizations: int = 10_000
    master_seed: int = 0
    W: float = 1.0
    h0: float = 10.0
    boundary: Boundary = Boundary.RING
    compute_levels: bool = False
    cap: float | None = None
    cd_form: CDForm = CDForm.GROUND
    # test hook: evaluate every realization with h -> -h
    flip_fields: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Steering(self.mode))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "cd_form", CDForm(self.cd_form))
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["boundary"] = self.boundary.value
        d["cd_form"] = self.cd_form.value
        return d


@dataclass
class RealizationRecord:
    index: int
    seed: int
    P1: float
    naive: float
    norm_drift: float
    steps: int
    naive_level: int = 1
    Pn: np.ndarray | None = field(default=None, repr=False)

    def audit(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "P1": self.P1,
            "naive": self.naive,
            "norm_drift": self.norm_drift,
        }


@dataclass
class EnsembleResult:
    mean_P1: float
    stderr_P1: float
    mean_naive_success: float
    n_realizations: int
    mean_Pn: np.ndarray | None = field(default=None, repr=False)
    S_N: np.ndarray | None = field(default=None, repr=False)
    records: list[RealizationRecord] = field(default_factory=list, repr=False)


def draw_fields(master_seed: int, index: int, L: int, W: float = 1.0) -> np.ndarray:
    """i.i.d. uniform fields on [-W, W]; the k-th draw of stream (seed, index) is site k."""
    bitgen = np.random.Philox(np.random.SeedSequence([master_seed, index]))
    return np.random.Generator(bitgen).uniform(-W, W, size=L)


def draw_instance(spec: EnsembleSpec, index: int) -> DisorderInstance:
    if not 0 <= index < spec.n_realizations:
        raise IndexError(f"realization {index} outside [0, {spec.n_realizations})")
    h = draw_fields(spec.master_seed, index, spec.L, spec.W)
    if spec.flip_fields:
        h = -h
    return DisorderInstance(h, spec.J, spec.h0, spec.W, spec.boundary)


def run_realization(spec: EnsembleSpec, cfg: IntegratorConfig, index: int) -> RealizationRecord:
    inst = draw_instance(spec, index)
    spectrum = sorted_spectrum(inst)
    try:
        res = evolve(
            inst,
            COS_SIN,
            spec.mode,
            spec.t_a,
            cfg,
            levels=spec.compute_levels,
            spectrum=spectrum,
            cap=spec.cap,
            cd_form=spec.cd_form,
        )
    except (IntegrationError, ArithmeticError, RuntimeError, ValueError) as exc:
        raise EnsembleError(spec.master_seed, index, exc) from exc
    return RealizationRecord(
        index=index,
        seed=spec.master_seed,
        P1=res.P1,
        naive=naive_success(inst, spectrum),
        norm_drift=res.norm_drift,
        steps=res.steps_taken,
        naive_level=int(np.nonzero(spectrum.configs == naive_solution(inst))[0][0]) + 1,
        Pn=res.Pn,
    )


def _run_chunk(args) -> list[RealizationRecord]:
    spec, cfg, indices = args
    return [run_realization(spec, cfg, i) for i in indices]


def _chunks(n: int, size: int) -> list[range]:
    return [range(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _kahan_rows(rows: Iterable[np.ndarray]) -> np.ndarray:
    total = None
    comp = None
    for row in rows:
        if total is None:
            total = np.array(row, dtype=float)
            comp = np.zeros_like(total)
            continue
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def level_statistics(records: Sequence[RealizationRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise mean of per-realization P_n (by each instance's own energy rank) and S_N."""
    ordered = sorted(records, key=lambda r: r.index)
    if any(r.Pn is None for r in ordered):
        raise ValueError("records were produced without level probabilities")
    mean = _kahan_rows(r.Pn for r in ordered) / len(ordered)
    return mean, np.cumsum(mean)


def naive_level_statistics(records: Sequence[RealizationRecord], L: int) -> tuple[np.ndarray, np.ndarray]:
    """P_n and S_N of the naive assignment, which sits on a single level per instance."""
    counts = np.zeros(1 << L)
    for r in records:
        counts[r.naive_level - 1] += 1
    mean = counts / len(records)
    return mean, np.cumsum(mean)


def aggregate(records: Sequence[RealizationRecord], levels: bool = False) -> EnsembleResult:
    ordered = sorted(records, key=lambda r: r.index)
    n = len(ordered)
    p1 = [r.P1 for r in ordered]
    mean = math.fsum(p1) / n
    var = math.fsum((x - mean) ** 2 for x in p1) / (n - 1) if n > 1 else 0.0
    result = EnsembleResult(
        mean_P1=mean,
        stderr_P1=math.sqrt(var / n),
        mean_naive_success=math.fsum(r.naive for r in ordered) / n,
        n_realizations=n,
        records=ordered,
    )
    if levels:
        result.mean_Pn, result.S_N = level_statistics(ordered)
    return result


def run_ensemble(
    spec: EnsembleSpec,
    cfg: IntegratorConfig = IntegratorConfig(),
    jobs: int | None = 1,
    audit_path: str | os.PathLike | None = None,
    chunk_size: int = 8,
) -> EnsembleResult:
    """Evolve every realization and reduce in ascending index order.

    The result is bit-identical for any ``jobs``: each realization depends only
    on (master_seed, index) and the reduction order is fixed.
    """
    jobs = jobs or os.cpu_count() or 1
    chunks = _chunks(spec.n_realizations, chunk_size)
    if jobs == 1:
        batches = [_run_chunk((spec, cfg, c)) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_chunk, [(spec, cfg, c) for c in chunks]))
    records = [r for batch in batches for r in batch]
    if audit_path is not None:
        write_audit(records, audit_path)
    return aggregate(records, levels=spec.compute_levels)


def write_audit(records: Iterable[RealizationRecord], path: str | os.PathLike) -> None:
    with Path(path).open("w") as fh:
        for r in sorted(records, key=lambda r: r.index):
            fh.write(json.dumps(r.audit()) + "\n")


def smallest_count_reaching(S_N: np.ndarray, threshold: float) -> int:
    """Smallest N with S_N >= threshold (1-based level count)."""
    hits = np.nonzero(S_N >= threshold)[0]
    if hits.size == 0:
        raise ValueError(f"cumulative probability never reaches {threshold}")
    return int(hits[0]) + 1


def with_mode(spec: EnsembleSpec, mode: Steering, **changes) -> EnsembleSpec:
    return replace(spec, mode=Steering(mode), **changes)
