"""Batch campaigns: volume estimation, threshold bisection, family-table
reproduction, witness-driven generator runs, and the genuine-multipartite
search, with CSV and JSON emission.

Parallelism is across independent states or runs only; stream ids are
assigned to jobs deterministically, so multi-worker runs produce the same
record set as single-worker runs.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lhs
from .conic import SolverConfig
from .errors import LhsError
from .geometry import SOLID_NAMES, solid_directions
from .operators import (
    DensityMatrix,
    HermitianOperator,
    is_ppt,
    negativity,
    operator_to_json,
    trace_distance,
)
from .states import (
    RngStream,
    amplitude_damped,
    haar_unitary,
    noisy_tripartite,
    sample_bures,
    sample_hs,
)
from .witnesses import QUANTIFIER_KINDS, gme_witness

__all__ = [
    "CampaignConfig",
    "CampaignRecord",
    "run_volume_estimation",
    "run_threshold_bisection",
    "run_table_reproduction",
    "run_generator_campaign",
    "run_gme_campaign",
]

CSV_VERSION = "lhsmodels-csv v1"
_Z95 = 1.959963984540054

# published family-table reference values per solid:
# (werner w*, its negativity, rank-3 bell-diagonal p1*, its negativity)
REFERENCE_TABLE = {
    "icosahedron": (0.4285, 0.0714, 0.5390, 0.0390),
    "dodecahedron": (0.4160, 0.0620, 0.5296, 0.0296),
    "truncated-cube": (0.3553, 0.0164, 0.500, 0.0),
    "truncated-octahedron": (0.4082, 0.0561, 0.5071, 0.0071),
    "truncated-tetrahedron-antipodal": (0.4404, 0.0803, 0.5581, 0.0581),
    "rhombicuboctahedron": (0.4454, 0.0840, 0.5664, 0.0664),
}

# published volume-campaign reference fractions (icosahedron, projective)
REFERENCE_VOLUME = {
    "hs": {"separableFraction": 0.242, "lhsFractionOfEntangled": [0.19, 0.25]},
    "bures": {"separableFraction": 0.073, "lhsFractionOfEntangled": [0.05, 0.07]},
}


@dataclass(frozen=True)
class CampaignConfig:
    kind: str
    solid: str = "icosahedron"
    mode: str = "projective"
    measure: str = "hs"
    count: int = 2000
    seed: int = 0
    firstStream: int = 0
    workers: int = 1
    quantifier: str = "one-sided-generalized-robustness"
    maxIters: int = 50
    iterTol: float = 1e-5
    tolFeas: float = 1e-7
    negativityBin: float = 0.002
    distanceBin: float = 0.02
    stopAfterSuccesses: int = 1
    outDir: str | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise LhsError("bad-config", "workers must be >= 1")
        if self.count < 1:
            raise LhsError("bad-config", "count must be >= 1")
        if self.mode not in ("projective", "povm"):
            raise LhsError("bad-config", f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class CampaignRecord:
    stateId: int
    streamId: int
    entangled: bool | None
    certified: bool | None
    negativity: float
    wallTime: float
    residual: float | None
    failure: str = ""


def _solver_config(cfg: CampaignConfig) -> SolverConfig:
    return SolverConfig(eps_feas=cfg.tolFeas)


def wilson_interval(k: int, n: int) -> tuple[float, float]:
    """95% score interval for a binomial fraction."""
    if n == 0:
        return (0.0, 1.0)
    z2 = _Z95 * _Z95
    center = (k + z2 / 2) / (n + z2)
    half = _Z95 * math.sqrt(k * (n - k) / n + z2 / 4) / (n + z2)
    return (max(0.0, center - half), min(1.0, center + half))


def _write_csv(path: Path, kind: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} {kind}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _record_rows(records: list[CampaignRecord]) -> list[list]:
    return [
        [r.stateId, r.streamId, r.entangled, r.certified,
         f"{r.negativity:.10g}", f"{r.wallTime:.6g}",
         "" if r.residual is None else f"{r.residual:.6g}", r.failure]
        for r in records
    ]


_RECORD_HEADER = ["stateId", "streamId", "entangled", "certified",
                  "negativity", "wallTime", "residual", "failure"]


def _dump_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def _pool_map(fn, jobs: list, workers: int):
    if workers == 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


# ---------------------------------------------------------------------------
# Volume estimation


def _volume_job(args):
    state_id, stream_id, seed, measure, solid, mode, tol = args
    rng = RngStream(seed, stream_id)
    rho = sample_hs(rng) if measure == "hs" else sample_bures(rng)
    neg = negativity(rho)
    if is_ppt(rho):
        record = CampaignRecord(state_id, stream_id, False, None, neg, 0.0, None)
        return record, None
    mset = solid_directions(solid)
    config = SolverConfig(eps_feas=tol)
    t0 = time.perf_counter()
    try:
        if mode == "projective":
            outcome = lhs.certify_projective(rho, mset, config)
        else:
            outcome = lhs.certify_povm(rho, mset, config=config)
    except LhsError as err:
        record = CampaignRecord(state_id, stream_id, True, None, neg,
                                time.perf_counter() - t0, None, str(err))
        return record, None
    elapsed = time.perf_counter() - t0
    if outcome.certified:
        cert = outcome.certificate
        record = CampaignRecord(state_id, stream_id, True, True, neg,
                                elapsed, cert.residual)
        return record, lhs.certificate_to_json(cert)
    record = CampaignRecord(state_id, stream_id, True, False, neg, elapsed, None)
    return record, None


def run_volume_estimation(cfg: CampaignConfig) -> dict:
    """Sample states under the configured measure, split by the PPT test,
    and run certification on every entangled state.

    Solver failures are excluded from the certified-fraction denominator and
    counted separately."""
    if cfg.measure not in ("hs", "bures"):
        raise LhsError("bad-config", f"unknown measure {cfg.measure!r}")
    jobs = [
        (i, cfg.firstStream + i, cfg.seed, cfg.measure, cfg.solid, cfg.mode,
         cfg.tolFeas)
        for i in range(cfg.count)
    ]
    results = _pool_map(_volume_job, jobs, cfg.workers)
    results.sort(key=lambda pair: pair[0].stateId)
    records = [rec for rec, _ in results]
    certificates = {
        rec.stateId: cert for rec, cert in results if cert is not None
    }

    n = len(records)
    n_sep = sum(1 for r in records if r.entangled is False)
    n_failed = sum(1 for r in records if r.failure)
    n_ent_done = sum(1 for r in records if r.entangled and not r.failure)
    n_cert = sum(1 for r in records if r.certified)
    sep_frac = n_sep / n
    lhs_frac = n_cert / n_ent_done if n_ent_done else 0.0
    summary = {
        "campaign": "volume",
        "measure": cfg.measure,
        "solid": cfg.solid,
        "mode": cfg.mode,
        "n": n,
        "separable": n_sep,
        "entangledTested": n_ent_done,
        "certified": n_cert,
        "solverFailures": n_failed,
        "separableFraction": sep_frac,
        "separableCI": list(wilson_interval(n_sep, n)),
        "lhsFractionOfEntangled": lhs_frac,
        "lhsCI": list(wilson_interval(n_cert, n_ent_done)),
        "reference": REFERENCE_VOLUME.get(cfg.measure, {}),
        "records": records,
        "certificates": certificates,
    }
    if cfg.outDir is not None:
        out = Path(cfg.outDir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "records.csv", "volume-records", _RECORD_HEADER,
                   _record_rows(records))
        with open(out / "certificates.jsonl", "w") as fh:
            for state_id, cert in sorted(certificates.items()):
                fh.write(json.dumps({"stateId": state_id, "certificate": cert}))
                fh.write("\n")
        slim = {k: v for k, v in summary.items()
                if k not in ("records", "certificates")}
        _dump_json(out / "summary.json", slim)
    return summary


# ---------------------------------------------------------------------------
# Threshold bisection


_BISECTION_FAMILIES = ("amplitude-damped", "noisy-ghz", "noisy-w")


def run_threshold_bisection(family: str, solid: str, mode: str = "projective",
                            bracket: tuple[float, float] = (0.0, 1.0),
                            tol: float = 0.01,
                            config: SolverConfig = SolverConfig()) -> float:
    """Largest certified parameter of a monotone family, located by
    bisection to width tol. The low end of the bracket must certify."""
    if family == "amplitude-damped":
        def state_fn(theta):
            return amplitude_damped(theta)
        def certify(theta):
            mset = solid_directions(solid)
            if mode == "projective":
                return lhs.certify_projective(state_fn(theta), mset, config)
            return lhs.certify_povm(state_fn(theta), mset, config=config)
    elif family in ("noisy-ghz", "noisy-w"):
        kind = family.split("-")[1]
        def state_fn(theta):
            return noisy_tripartite(kind, theta)
        def certify(theta):
            mset = solid_directions(solid)
            return lhs.certify_multipartite(state_fn(theta), mset, mode,
                                            config=config)
    else:
        raise LhsError(
            "bad-parameter",
            f"unknown family {family!r}; expected one of {_BISECTION_FAMILIES}",
        )
    low, high = float(bracket[0]), float(bracket[1])
    if not low < high:
        raise LhsError("bad-parameter", "bracket must satisfy low < high")
    if tol <= 0:
        raise LhsError("bad-parameter", "tol must be positive")
    if not certify(low).certified:
        raise LhsError("bad-bracket", f"family not certified at bracket low end {low}")
    if certify(high).certified:
        return high
    while high - low > tol:
        mid = 0.5 * (low + high)
        if certify(mid).certified:
            low = mid
        else:
            high = mid
    return low


# ---------------------------------------------------------------------------
# Family table reproduction


def _table_job(args):
    solid, family_name, tol = args
    spec = lhs.named_family(family_name)
    mset = solid_directions(solid)
    config = SolverConfig(eps_feas=tol)
    t0 = time.perf_counter()
    try:
        res = lhs.maximize_family(spec, mset, config=config)
    except LhsError as err:
        return solid, family_name, None, None, f"failed: {err}", time.perf_counter() - t0
    if res.status != "optimal":
        return solid, family_name, None, None, f"failed: {res.status}", time.perf_counter() - t0
    state = lhs.family_state(spec, res.theta)
    return solid, family_name, res.objective, negativity(state), "ok", time.perf_counter() - t0


def run_table_reproduction(cfg: CampaignConfig,
                           solids: tuple[str, ...] | None = None) -> dict:
    """maximize_family for the Werner and rank-3 Bell-diagonal columns over
    the six solids, reported next to the published values with absolute
    deviations. Per-cell failures are marked and the table is still emitted."""
    if solids is None:
        solids = SOLID_NAMES[:6]
    jobs = [(s, fam, cfg.tolFeas)
            for s in solids for fam in ("werner", "bell-diag-rank3")]
    results = _pool_map(_table_job, jobs, cfg.workers)
    rows = []
    for solid, family_name, theta, neg, status, elapsed in results:
        ref_w, ref_w_neg, ref_p, ref_p_neg = REFERENCE_TABLE[solid]
        reference = ref_w if family_name == "werner" else ref_p
        ref_neg = ref_w_neg if family_name == "werner" else ref_p_neg
        rows.append({
            "solid": solid,
            "family": family_name,
            "theta": theta,
            "negativity": neg,
            "reference": reference,
            "referenceNegativity": ref_neg,
            "deviation": None if theta is None else abs(theta - reference),
            "status": status,
            "wallTime": elapsed,
        })
    table = {"campaign": "table", "rows": rows}
    if cfg.outDir is not None:
        out = Path(cfg.outDir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out / "table.csv", "family-table",
            ["solid", "family", "theta", "negativity", "reference",
             "referenceNegativity", "deviation", "status"],
            [[r["solid"], r["family"],
              "" if r["theta"] is None else f"{r['theta']:.6f}",
              "" if r["negativity"] is None else f"{r['negativity']:.6f}",
              r["reference"], r["referenceNegativity"],
              "" if r["deviation"] is None else f"{r['deviation']:.6f}",
              r["status"]] for r in rows],
        )
        _dump_json(out / "summary.json", table)
    return table


# ---------------------------------------------------------------------------
# Generator campaign


def _histogram(values: np.ndarray, width: float) -> list[tuple[float, float, int, float]]:
    if len(values) == 0:
        return []
    n_bins = int(math.floor(float(values.max()) / width)) + 1
    edges = np.arange(n_bins + 1) * width
    counts, _ = np.histogram(values, bins=edges)
    total = len(values)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i]),
         float(counts[i] / total))
        for i in range(n_bins)
    ]


def _generator_job(args):
    run_id, stream_id, seed, solid, mode, quantifier, max_iters, iter_tol, tol = args
    gen = RngStream(seed, stream_id).generator
    u = haar_unitary(4, gen)
    vec = u[:, 0]
    seed_state = DensityMatrix(HermitianOperator((2, 2), np.outer(vec, vec.conj())))
    mset = solid_directions(solid)
    config = SolverConfig(eps_feas=tol)
    t0 = time.perf_counter()
    trace = lhs.iterate_generator(seed_state, quantifier, mset, mode,
                                  maxIters=max_iters, tol=iter_tol, config=config)
    elapsed = time.perf_counter() - t0
    if not trace.steps:
        record = CampaignRecord(run_id, stream_id, None, None, 0.0, elapsed,
                                None, trace.aborted or "no-steps")
        return record, None, None
    last = trace.steps[-1]
    record = CampaignRecord(
        run_id, stream_id, True, True, negativity(last.state), elapsed,
        last.certificate.residual, trace.aborted or "")
    return record, last.state, lhs.certificate_to_json(last.certificate)


def run_generator_campaign(cfg: CampaignConfig) -> dict:
    """iterate_generator from Haar-random pure seeds; emits the terminal
    states with certificates, a negativity histogram, and a pairwise
    trace-distance histogram."""
    if cfg.quantifier not in QUANTIFIER_KINDS:
        raise LhsError("bad-config", f"unknown quantifier {cfg.quantifier!r}")
    jobs = [
        (i, cfg.firstStream + i, cfg.seed, cfg.solid, cfg.mode, cfg.quantifier,
         cfg.maxIters, cfg.iterTol, cfg.tolFeas)
        for i in range(cfg.count)
    ]
    results = _pool_map(_generator_job, jobs, cfg.workers)
    results.sort(key=lambda triple: triple[0].stateId)
    records = [rec for rec, _, _ in results]
    produced = [(rec.stateId, state, cert) for rec, state, cert in results
                if state is not None and not rec.failure]
    negs = np.array([rec.negativity for rec in records
                     if rec.certified and not rec.failure])
    states = [state for _, state, _ in produced]
    dists = []
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            dists.append(trace_distance(states[i], states[j]))
    dists = np.array(dists)
    summary = {
        "campaign": "generate",
        "solid": cfg.solid,
        "mode": cfg.mode,
        "quantifier": cfg.quantifier,
        "runs": cfg.count,
        "failures": sum(1 for r in records if r.failure),
        "meanNegativity": float(negs.mean()) if len(negs) else 0.0,
        "stdNegativity": float(negs.std()) if len(negs) else 0.0,
        "meanDistance": float(dists.mean()) if len(dists) else 0.0,
        "stdDistance": float(dists.std()) if len(dists) else 0.0,
        "negativityHistogram": _histogram(negs, cfg.negativityBin),
        "distanceHistogram": _histogram(dists, cfg.distanceBin),
        "records": records,
    }
    if cfg.outDir is not None:
        out = Path(cfg.outDir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "records.csv", "generator-records", _RECORD_HEADER,
                   _record_rows(records))
        _write_csv(out / "histogram-negativity.csv", "histogram",
                   ["binLow", "binHigh", "count", "frequency"],
                   [list(row) for row in summary["negativityHistogram"]])
        _write_csv(out / "histogram-distance.csv", "histogram",
                   ["binLow", "binHigh", "count", "frequency"],
                   [list(row) for row in summary["distanceHistogram"]])
        with open(out / "generated-states.jsonl", "w") as fh:
            for state_id, state, cert in produced:
                fh.write(json.dumps({"stateId": state_id,
                                     "state": operator_to_json(state),
                                     "certificate": cert}))
                fh.write("\n")
        slim = {k: v for k, v in summary.items() if k != "records"}
        _dump_json(out / "summary.json", slim)
    return summary


# ---------------------------------------------------------------------------
# Genuine-multipartite campaign


def _gme_job(args):
    run_id, stream_id, seed, solid, mode, max_iters, iter_tol, tol = args
    gen = RngStream(seed, stream_id).generator
    u = haar_unitary(8, gen)
    vec = u[:, 0]
    seed_state = DensityMatrix(
        HermitianOperator((2, 2, 2), np.outer(vec, vec.conj())))
    mset = solid_directions(solid)
    config = SolverConfig(eps_feas=tol)
    t0 = time.perf_counter()
    trace = lhs.iterate_generator(seed_state, "gme", mset, mode,
                                  maxIters=max_iters, tol=iter_tol, config=config)
    # step i+1's witness is the optimal witness of step i's state, so only
    # the final state needs a fresh witness solve
    best_value = 0.0
    best = None
    for i, step in enumerate(trace.steps):
        if i + 1 < len(trace.steps):
            value = float(np.real(np.trace(
                trace.steps[i + 1].witness.entries @ step.state.entries)))
        else:
            try:
                value = gme_witness(step.state, config).value
            except LhsError:
                continue
        if value < best_value:
            best_value = value
            best = step
    elapsed = time.perf_counter() - t0
    success = best is not None and best_value < -1e-6
    if success:
        success = lhs.verify_certificate(best.certificate, best.state).ok(1e-6)
    record = CampaignRecord(
        run_id, stream_id, None, success if best is not None else None,
        -best_value, elapsed,
        best.certificate.residual if best is not None else None,
        trace.aborted or "")
    if success:
        return record, best.state, lhs.certificate_to_json(best.certificate), best_value
    return record, None, None, best_value


def run_gme_campaign(cfg: CampaignConfig) -> dict:
    """Alternating genuine-multipartite witness and certified generation from
    Haar-random three-qubit pure seeds.

    A success is a produced state whose own optimal fully-decomposable
    witness value is below -1e-6 with a certificate that re-verifies. The
    campaign reports the success count without asserting reachability; runs
    stop early once stopAfterSuccesses is hit (single-worker only).

    Witness values along a trajectory range from solver dust (1e-8) up to
    a few 1e-3, and deep descents start from dust-level first steps, so
    iterTol must sit well below 1e-7 for this kind; the CLI defaults it to
    1e-9. Step values are monotone non-increasing (each new witness is
    optimal for the state that produced it), so iteration can only deepen
    a descent, never lose one."""
    jobs = [
        (i, cfg.firstStream + i, cfg.seed, cfg.solid, cfg.mode,
         cfg.maxIters, cfg.iterTol, cfg.tolFeas)
        for i in range(cfg.count)
    ]
    results = []
    if cfg.workers == 1:
        successes_seen = 0
        for job in jobs:
            results.append(_gme_job(job))
            if results[-1][1] is not None:
                successes_seen += 1
                if 0 < cfg.stopAfterSuccesses <= successes_seen:
                    break
    else:
        results = _pool_map(_gme_job, jobs, cfg.workers)
    records = [rec for rec, _, _, _ in results]
    successes = [
        {"stateId": rec.stateId, "gmeValue": value,
         "state": operator_to_json(state), "certificate": cert}
        for rec, state, cert, value in results if state is not None
    ]
    summary = {
        "campaign": "gme",
        "solid": cfg.solid,
        "mode": cfg.mode,
        "runs": len(records),
        "successCount": len(successes),
        "bestValue": min((v for _, _, _, v in results), default=0.0),
        "successes": successes,
        "records": records,
    }
    if cfg.outDir is not None:
        out = Path(cfg.outDir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "records.csv", "gme-records", _RECORD_HEADER,
                   _record_rows(records))
        with open(out / "successes.jsonl", "w") as fh:
            for entry in successes:
                fh.write(json.dumps(entry))
                fh.write("\n")
        slim = {k: v for k, v in summary.items()
                if k not in ("records", "successes")}
        _dump_json(out / "summary.json", slim)
    return summary
