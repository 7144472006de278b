"""Ensemble execution (EQUAL), single-qubit correction (SQC), EQUAL+, and
spin-reversal transforms.

Seed layout: every random choice is drawn from ``derive_seed(master_seed, tag,
index)`` so members can be run in any order or concurrently.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .annealer import DeviceModel, program, run_trials, sample_many
from .core import IsingModel, SampleSet, as_spins, derive_seed
from .precision import DeviceRanges, Qmi, normalize, prepare_qmi, quantize

SEED_PERTURB = 1
SEED_TRIALS = 2
SEED_GAUGE = 3
SEED_SIGNS = 4

SCHEMES = ("baseline", "equal", "sqc", "equal_plus", "srt")


class NeedEnsembleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: list[Qmi]
    perturbation_magnitudes: list[float]
    trials: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def trials_per_member(self) -> int:
        return min(self.trials) if self.trials else 0


@dataclass(eq=False)
class MitigationResult:
    best_spins: np.ndarray
    best_energy: float
    per_member_best: list[tuple[int, float]]
    scheme: str
    trials_used: int
    wall_time: float = 0.0
    samples: list[SampleSet] = field(default_factory=list, repr=False)

    @property
    def best(self) -> tuple[np.ndarray, float]:
        return self.best_spins, self.best_energy


def perturbation_magnitude(bits: int, rng: np.random.Generator) -> float:
    """Uniform draw from [2^-(b+1), 2^-b], in units of the device range."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    return float(rng.uniform(2.0 ** -(bits + 1), 2.0**-bits))


def split_trials(total: int, m: int) -> list[int]:
    """Equal split; the remainder goes to member 0."""
    if total < m:
        raise ValueError(f"cannot split {total} trials across {m} members")
    base = total // m
    return [base + total - base * m] + [base] * (m - 1)


def perturbed_member(
    normed: IsingModel,
    r: float,
    bits: int,
    ranges: DeviceRanges,
    signs: np.random.Generator | None = None,
    scale_applied: float = 1.0,
) -> Qmi:
    """Shift every existing coefficient by ``r`` times its range, then quantize.

    Values pushed past the range edge saturate there. With ``signs`` given,
    each coefficient's shift gets an independent random sign.
    """
    hk = sorted(normed.h)
    jk = sorted(normed.J)
    if signs is None:
        sh = np.ones(len(hk))
        sj = np.ones(len(jk))
    else:
        sh = signs.choice([-1.0, 1.0], size=len(hk))
        sj = signs.choice([-1.0, 1.0], size=len(jk))
    h = {
        k: float(np.clip(normed.h[k] + s * r * ranges.h_max, -ranges.h_max, ranges.h_max))
        for k, s in zip(hk, sh)
    }
    J = {
        k: float(np.clip(normed.J[k] + s * r * ranges.j_max, -ranges.j_max, ranges.j_max))
        for k, s in zip(jk, sj)
    }
    return quantize(normed.with_coefficients(h, J), bits, ranges, scale_applied=scale_applied)


def make_ensemble(
    original: IsingModel,
    m: int,
    bits: int,
    ranges: DeviceRanges = DeviceRanges(),
    master_seed: int = 0,
    random_sign: bool = False,
    total_trials: int | None = None,
) -> Ensemble:
    """Member 0 is the quantized original; members 1..m-1 are perturbed copies.

    All members share member 0's normalization scale.
    """
    if m < 2:
        raise NeedEnsembleError(f"an ensemble needs m >= 2 members, got {m}")
    normed, s = normalize(original, ranges)
    members = [quantize(normed, bits, ranges, scale_applied=s)]
    mags = [0.0]
    for k in range(1, m):
        r = perturbation_magnitude(bits, np.random.default_rng(derive_seed(master_seed, SEED_PERTURB, k)))
        signs = np.random.default_rng(derive_seed(master_seed, SEED_SIGNS, k)) if random_sign else None
        members.append(perturbed_member(normed, r, bits, ranges, signs, scale_applied=s))
        mags.append(r)
    trials = split_trials(total_trials, m) if total_trials is not None else []
    return Ensemble(members, mags, trials)


def sqc_many(model: IsingModel, Z: np.ndarray) -> np.ndarray:
    """Single-qubit correction applied to every row of ``Z``."""
    out = np.array(Z, dtype=np.int8, copy=True)
    if out.ndim != 2 or out.shape[1] != model.n:
        raise ValueError(f"expected shape (k, {model.n}), got {out.shape}")
    indptr, nbrs, wts = model.adjacency
    _kernels.descend(indptr, nbrs, wts, model.h_vector, out)
    return out


def sqc(model: IsingModel, z) -> np.ndarray:
    """Greedy steepest descent over single flips to a 1-flip local minimum."""
    s = as_spins(z, model.n)
    return sqc_many(model, s[None, :])[0]


def _result(scheme, original, sample_sets, trials_used, started) -> MitigationResult:
    per_member = []
    best_spins, best_e = None, np.inf
    for k, ss in enumerate(sample_sets):
        z, e = ss.lowest
        per_member.append((k, e))
        if e < best_e:
            best_spins, best_e = z, e
    return MitigationResult(
        best_spins, float(best_e), per_member, scheme, int(trials_used),
        time.perf_counter() - started, list(sample_sets),
    )


def _execute(members, trials, seeds, original, device, workers) -> list[SampleSet]:
    pqs = [program(device, q) for q in members]
    return sample_many(pqs, trials, seeds, original, workers=workers)


def run_baseline(
    original: IsingModel, device: DeviceModel, total_trials: int, master_seed: int = 0
) -> MitigationResult:
    """All trials on the single unperturbed QMI."""
    started = time.perf_counter()
    qmi = prepare_qmi(original, device.bits, device.ranges)
    sets = _execute([qmi], [total_trials], [derive_seed(master_seed, SEED_TRIALS, 0)], original, device, 1)
    return _result("baseline", original, sets, total_trials, started)


def run_equal(
    original: IsingModel,
    device: DeviceModel,
    m: int = 10,
    total_trials: int = 20_000,
    master_seed: int = 0,
    workers: int = 1,
    random_sign: bool = False,
) -> MitigationResult:
    """Split the trial budget over an ensemble and keep the best outcome."""
    started = time.perf_counter()
    ens = make_ensemble(original, m, device.bits, device.ranges, master_seed, random_sign, total_trials)
    seeds = [derive_seed(master_seed, SEED_TRIALS, k) for k in range(m)]
    sets = _execute(ens.members, ens.trials, seeds, original, device, workers)
    return _result("equal", original, sets, total_trials, started)


def _post_process(model: IsingModel, sets: Sequence[SampleSet], workers: int) -> list[SampleSet]:
    """SQC on every distinct outcome of every set; multiplicities carry over."""

    def one(ss: SampleSet) -> SampleSet:
        fixed = sqc_many(model, ss.spins)
        if ss.trial_rows is None:
            return SampleSet.from_trials(np.repeat(fixed, ss.counts, axis=0), model, ss.model_id)
        return SampleSet.from_trials(fixed[ss.trial_rows], model, ss.model_id)

    if workers <= 1:
        return [one(ss) for ss in sets]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, sets))


def run_equal_plus(
    original: IsingModel,
    device: DeviceModel,
    m: int = 10,
    total_trials: int = 20_000,
    master_seed: int = 0,
    workers: int = 1,
    random_sign: bool = False,
    equal_result: MitigationResult | None = None,
) -> MitigationResult:
    """EQUAL followed by SQC on each member's outcomes.

    Pass ``equal_result`` to post-process an existing EQUAL run on the same
    sample streams instead of re-sampling.
    """
    started = time.perf_counter()
    if equal_result is None:
        equal_result = run_equal(original, device, m, total_trials, master_seed, workers, random_sign)
    sets = _post_process(original, equal_result.samples, workers)
    return _result("equal_plus", original, sets, equal_result.trials_used, started)


def run_sqc(
    original: IsingModel,
    device: DeviceModel,
    total_trials: int,
    master_seed: int = 0,
    baseline_result: MitigationResult | None = None,
) -> MitigationResult:
    """Baseline execution followed by SQC (no ensemble)."""
    started = time.perf_counter()
    if baseline_result is None:
        baseline_result = run_baseline(original, device, total_trials, master_seed)
    sets = _post_process(original, baseline_result.samples, 1)
    return _result("sqc", original, sets, baseline_result.trials_used, started)


def srt_transform(model: IsingModel, g) -> IsingModel:
    """Gauge transform: h_i -> g_i h_i, J_ij -> g_i g_j J_ij."""
    g = as_spins(g, model.n)
    h = {i: float(g[i]) * v for i, v in model.h.items()}
    J = {(i, j): float(g[i] * g[j]) * v for (i, j), v in model.J.items()}
    return model.with_coefficients(h, J)


def srt_untransform(g, z) -> np.ndarray:
    """Map an outcome of the gauged model back to the original variables."""
    g = as_spins(g)
    z = np.asarray(z)
    if z.shape[-1] != g.shape[0]:
        raise ValueError(f"gauge has {g.shape[0]} entries, outcome has {z.shape[-1]}")
    return (z * g).astype(np.int8)


def random_gauge(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)


def run_srt(
    original: IsingModel,
    device: DeviceModel,
    k_gauges: int = 10,
    total_trials: int = 20_000,
    master_seed: int = 0,
    gauges: Sequence[np.ndarray] | None = None,
    workers: int = 1,
) -> MitigationResult:
    """Split the trials across random gauges of the problem."""
    if k_gauges < 1:
        raise ValueError(f"k_gauges must be >= 1, got {k_gauges}")
    started = time.perf_counter()
    if gauges is None:
        gauges = [random_gauge(original.n, derive_seed(master_seed, SEED_GAUGE, k)) for k in range(k_gauges)]
    gauges = [as_spins(g, original.n) for g in gauges]
    if len(gauges) != k_gauges:
        raise ValueError(f"expected {k_gauges} gauges, got {len(gauges)}")
    trials = split_trials(total_trials, k_gauges)
    pqs = [program(device, prepare_qmi(srt_transform(original, g), device.bits, device.ranges)) for g in gauges]
    seeds = [derive_seed(master_seed, SEED_TRIALS, k) for k in range(k_gauges)]

    def one(job):
        g, pq, t, seed = job
        Z = srt_untransform(g, run_trials(pq, t, seed))
        return SampleSet.from_trials(Z, original, pq.model_id)

    jobs = list(zip(gauges, pqs, trials, seeds))
    if workers <= 1:
        sets = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sets = list(pool.map(one, jobs))
    return _result("srt", original, sets, total_trials, started)


def result_curve(result: MitigationResult, checkpoints: Sequence[int]) -> list[tuple[int, float]]:
    """Best-so-far energy against total trials spent.

    Members are treated as sharing the budget proportionally: after ``c`` of
    ``T`` total trials, member ``k`` has run ``floor(c * t_k / T)`` of its own.
    For a single-QMI result this is the plain running minimum.
    """
    streams = [np.minimum.accumulate(ss.stream()) for ss in result.samples]
    sizes = [s.size for s in streams]
    total = sum(sizes)
    cps = [int(c) for c in checkpoints]
    if not cps or cps[-1] != total or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError(f"checkpoints must be strictly ascending and end at {total}, got {cps}")
    curve = []
    for c in cps:
        best = np.inf
        for s, t_k in zip(streams, sizes):
            used = c * t_k // total
            if used >= 1:
                best = min(best, float(s[used - 1]))
        if not np.isfinite(best):
            raise ValueError(f"checkpoint {c} is too small for {len(streams)} members")
        curve.append((c, best))
    return curve


def never_worse(result: MitigationResult) -> bool:
    """EQUAL containment: reported energy <= member 0's own best outcome."""
    return result.best_energy <= result.per_member_best[0][1]


def outcome_energies(result: MitigationResult) -> np.ndarray:
    """All trial energies of a result, expanded by multiplicity."""
    return np.concatenate([np.repeat(ss.energies, ss.counts) for ss in result.samples])
