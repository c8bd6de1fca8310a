"""Coupled Brownian lattices, strong-error estimation, rate fits and timing.

Every path owns a fine lattice of Gaussian increments at step ``h_ref``. The
reference solution is LBEM on that lattice; a scheme at coarser ``h`` sees the
block sums of the very same increments. Per-path RNG streams are keyed by
``(seed, path_idx)`` only, and per-path results are reduced in path order, so
estimates do not depend on chunking or on the number of workers.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .models import ModelSpec
from .solvers import SchemeKind, simulate_transformed

DEFAULT_H_SET = tuple(2.0**-i for i in range(5, 10))
DEFAULT_H_REF = 2.0**-12
FINE_H_REF = 2.0**-15
RNG_DESCRIPTION = "numpy Philox4x64 key=seed counter=[0,0,0,path]; Generator.standard_normal (ziggurat)"

CHUNK = 250

IncrementSource = Callable[[int, int, int, float], np.ndarray]


class PlanError(ValueError):
    pass


class DegenerateFitError(ValueError):
    pass


def _ratio(a: float, b: float) -> int:
    r = a / b
    k = round(r)
    if k < 1 or abs(r - k) > 1e-9 * max(1.0, r):
        raise PlanError(f"{a!r} is not an integer multiple of {b!r}")
    return int(k)


@dataclass(frozen=True)
class LatticePlan:
    T: float = 1.0
    h_ref: float = DEFAULT_H_REF
    h_set: tuple[float, ...] = DEFAULT_H_SET
    n_paths: int = 10_000
    seed: int = 20240601

    def __post_init__(self):
        object.__setattr__(self, "h_set", tuple(sorted((float(h) for h in self.h_set), reverse=True)))
        if not (self.T > 0 and 0 < self.h_ref <= 1):
            raise PlanError(f"need T > 0 and h_ref in (0, 1], got T={self.T!r}, h_ref={self.h_ref!r}")
        if self.n_paths < 0:
            raise PlanError("n_paths must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise PlanError("seed must be a 64-bit unsigned integer")
        _ratio(self.T, self.h_ref)
        for h in self.h_set:
            if not 0 < h <= 1:
                raise PlanError(f"step {h!r} outside (0, 1]")
            _ratio(h, self.h_ref)
            _ratio(self.T, h)

    @property
    def n_fine(self) -> int:
        return _ratio(self.T, self.h_ref)

    def ratio(self, h: float) -> int:
        return _ratio(h, self.h_ref)

    def as_dict(self) -> dict:
        return {"T": self.T, "h_ref": self.h_ref, "h_set": list(self.h_set),
                "n_paths": self.n_paths, "seed": self.seed, "rng": RNG_DESCRIPTION}


@dataclass(frozen=True)
class ErrorRow:
    h: float
    e_M: float
    n_paths: int


@dataclass
class ErrorTable:
    model: str
    scheme: str
    seed: int
    h_ref: float
    rows: list[ErrorRow] = field(default_factory=list)
    max_abs_transformed: float = 0.0
    clamp_frequency: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows.sort(key=lambda r: -r.h)

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.rows])

    @property
    def e_M(self) -> np.ndarray:
        return np.array([r.e_M for r in self.rows])

    def to_csv(self, path, header_comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["model", "scheme", "h", "e_M", "n_paths", "seed", "h_ref"])
            for r in self.rows:
                w.writerow([self.model, self.scheme, f"{r.h:.17g}", f"{r.e_M:.17g}",
                            r.n_paths, self.seed, f"{self.h_ref:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "ErrorTable":
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        reader = csv.DictReader(lines)
        missing = {"model", "scheme", "h", "e_M", "n_paths", "seed", "h_ref"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"error table CSV lacks columns {sorted(missing)}")
        recs = list(reader)
        if not recs:
            raise ValueError("error table CSV has no rows")
        first = recs[0]
        rows = [ErrorRow(float(r["h"]), float(r["e_M"]), int(r["n_paths"])) for r in recs]
        return cls(first["model"], first["scheme"], int(first["seed"]), float(first["h_ref"]), rows)


@dataclass(frozen=True)
class RateFit:
    q: float
    resid: float
    logC: float

    def to_json(self, table: ErrorTable) -> dict:
        n = table.rows[0].n_paths if table.rows else 0
        return {"model": table.model, "scheme": table.scheme, "q": self.q, "resid": self.resid,
                "logC": self.logC, "n_paths": n, "seed": table.seed}


# -- lattice -----------------------------------------------------------------

def gen_fine_increments(seed: int, path_idx: int, n_fine: int, h_ref: float) -> np.ndarray:
    """Brownian increments of one path, reproducible from ``(seed, path_idx)`` alone.

    Philox is counter based: the path index occupies the top counter word, so
    streams never overlap and any path can be generated in isolation.
    """
    if n_fine < 0:
        raise ValueError("n_fine must be >= 0")
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, 0, int(path_idx)])
    return np.random.Generator(bitgen).standard_normal(n_fine) * math.sqrt(h_ref)


def coarsen(fine: np.ndarray, ratio: int) -> np.ndarray:
    """Block sums of ``ratio`` consecutive increments along the last axis.

    Each block is summed strictly left to right.
    """
    fine = np.asarray(fine, dtype=np.float64)
    if ratio < 1 or fine.shape[-1] % ratio:
        raise ValueError(f"length {fine.shape[-1]} is not divisible by ratio {ratio}")
    out = fine[..., 0::ratio].copy()
    for j in range(1, ratio):
        out += fine[..., j::ratio]
    return out


def _fine_block(source: IncrementSource, plan: LatticePlan, i0: int, i1: int) -> np.ndarray:
    n_fine = plan.n_fine
    block = np.empty((i1 - i0, n_fine))
    for k, idx in enumerate(range(i0, i1)):
        block[k] = source(plan.seed, idx, n_fine, plan.h_ref)
    return block


def _chunks(n: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def _run_chunks(work: Callable[[int, int], None], n: int, workers: int) -> None:
    spans = _chunks(n)
    if workers <= 1 or len(spans) <= 1:
        for a, b in spans:
            work(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(work, a, b) for a, b in spans]:
            fut.result()


# -- strong error ------------------------------------------------------------

def strong_errors(
    spec: ModelSpec,
    schemes: Sequence[SchemeKind | str],
    plan: LatticePlan,
    *,
    workers: int = 1,
    audit: bool = False,
    increments: Optional[IncrementSource] = None,
) -> dict[str, ErrorTable]:
    """Strong errors of several schemes against one shared LBEM reference.

    ``e_M(h) = sqrt(mean_paths(max_n |X_ref(t_n) - Y_n|^2))`` in original
    coordinates, the max taken over the grid of step ``h``.
    """
    schemes = [SchemeKind(s) for s in schemes]
    if spec.feller_boundary:
        raise PlanError("convergence experiments need the strict Feller condition 2*kappa*theta > sigma^2")
    if plan.n_paths < 1:
        raise PlanError("strong error needs at least one path")
    if not plan.h_set:
        raise PlanError("strong error needs a non-empty h_set")
    for h in plan.h_set:
        spec.correction.check(h)
    source = increments or gen_fine_increments
    inv = spec.transform.inverse
    sq = {(s, h): np.zeros(plan.n_paths) for s in schemes for h in plan.h_set}
    clamp_hits = {h: np.zeros(plan.n_paths) for h in plan.h_set}
    max_abs = np.zeros(plan.n_paths)

    def work(i0: int, i1: int) -> None:
        fine = _fine_block(source, plan, i0, i1)
        try:
            ref_y = simulate_transformed(spec, SchemeKind.LBEM, plan.h_ref, fine)
        except Exception as exc:
            raise type(exc)(f"reference failed in paths [{i0}, {i1}): {exc}") from exc
        peak = np.max(np.abs(ref_y), axis=1)
        ref_x = inv(ref_y)
        for h in plan.h_set:
            r = plan.ratio(h)
            coarse = coarsen(fine, r)
            ref_h = ref_x[:, ::r]
            for s in schemes:
                y = simulate_transformed(spec, s, h, coarse)
                if audit and not np.all(y > 0):
                    raise AssertionError(f"nonpositive iterate: scheme={s.value} h={h!r} paths [{i0}, {i1})")
                peak = np.maximum(peak, np.max(np.abs(y), axis=1))
                d = np.max(np.abs(ref_h - inv(y)), axis=1)
                sq[(s, h)][i0:i1] = d * d
                if s is SchemeKind.PROPOSED:
                    lo, hi = spec.correction.bounds(h)
                    hits = (y[:, :-1] < lo) | (y[:, :-1] > hi)
                    clamp_hits[h][i0:i1] = hits.mean(axis=1)
        if audit and not np.all(ref_y > 0):
            raise AssertionError(f"nonpositive reference iterate in paths [{i0}, {i1})")
        max_abs[i0:i1] = peak

    _run_chunks(work, plan.n_paths, workers)

    tables = {}
    for s in schemes:
        rows = [ErrorRow(h, math.sqrt(float(np.sum(sq[(s, h)])) / plan.n_paths), plan.n_paths)
                for h in plan.h_set]
        t = ErrorTable(spec.tag, s.value, plan.seed, plan.h_ref, rows, float(np.max(max_abs)))
        if s is SchemeKind.PROPOSED:
            t.clamp_frequency = {f"{h:.17g}": float(np.mean(clamp_hits[h])) for h in plan.h_set}
        tables[s.value] = t
    return tables


def strong_error(spec: ModelSpec, scheme: SchemeKind | str, plan: LatticePlan, **kw) -> ErrorTable:
    scheme = SchemeKind(scheme)
    return strong_errors(spec, [scheme], plan, **kw)[scheme.value]


def fit_rate(table: ErrorTable) -> RateFit:
    """Least squares fit of ``log e_M = logC + q log h`` (natural logs)."""
    h, e = table.h, table.e_M
    if len(h) < 2:
        raise DegenerateFitError("rate fit needs at least two rows")
    if np.any(e <= 0):
        raise DegenerateFitError("rate fit needs strictly positive errors")
    x, y = np.log(h), np.log(e)
    A = np.column_stack([x, np.ones_like(x)])
    (q, logC), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.sum((y - (q * x + logC)) ** 2)))
    return RateFit(float(q), resid, float(logC))


# -- timing ------------------------------------------------------------------

@dataclass(frozen=True)
class BenchResult:
    model: str
    proposed_seconds: float
    lbem_seconds: float
    paths: int
    h_set: tuple[float, ...]
    backend: str = kernels.BACKEND

    @property
    def ratio(self) -> float:
        return self.lbem_seconds / self.proposed_seconds if self.proposed_seconds > 0 else math.nan


def _warm_up(spec: ModelSpec, h: float) -> None:
    z = np.zeros((1, 2))
    simulate_transformed(spec, SchemeKind.PROPOSED, h, z)
    simulate_transformed(spec, SchemeKind.LBEM, h, z)


def bench(spec: ModelSpec, plan: LatticePlan, *, repeats: int = 1, workers: int = 1,
          increments: Optional[IncrementSource] = None) -> BenchResult:
    """Wall time of the full ``h_set`` sweep over all paths, per scheme.

    Lattices are generated up front, outside the timed region; each scheme
    then steps the same coarse increments and maps its output back to original
    coordinates. ``workers=1`` (the default) is the single-threaded
    measurement; with more workers chunks run on a thread pool and the wall
    time of the whole sweep is reported. With ``repeats > 1`` the fastest
    run counts.
    """
    source = increments or gen_fine_increments
    if not (plan.h_set and plan.n_paths):
        return BenchResult(spec.tag, 0.0, 0.0, plan.n_paths, plan.h_set)
    for h in plan.h_set:
        spec.correction.check(h)
    _warm_up(spec, plan.h_set[0])
    inv = spec.transform.inverse
    lattices = []
    for i0, i1 in _chunks(plan.n_paths, 1000):
        fine = _fine_block(source, plan, i0, i1)
        lattices.append([(h, np.ascontiguousarray(coarsen(fine, plan.ratio(h)))) for h in plan.h_set])
        del fine

    def sweep(scheme, chunk):
        for h, inc in chunk:
            inv(simulate_transformed(spec, scheme, h, inc))

    totals = {}
    for s in (SchemeKind.PROPOSED, SchemeKind.LBEM):
        best = math.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            if workers <= 1:
                for chunk in lattices:
                    sweep(s, chunk)
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(lambda c: sweep(s, c), lattices))
            best = min(best, time.perf_counter() - t0)
        totals[s] = best
    return BenchResult(spec.tag, totals[SchemeKind.PROPOSED], totals[SchemeKind.LBEM],
                       plan.n_paths, plan.h_set)


def write_bench_csv(path, results: Iterable[BenchResult], header_comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["model", "proposed_seconds", "lbem_seconds", "paths", "h_set"])
        for r in results:
            w.writerow([r.model, f"{r.proposed_seconds:.6f}", f"{r.lbem_seconds:.6f}", r.paths,
                        ";".join(f"{h:.17g}" for h in r.h_set)])
