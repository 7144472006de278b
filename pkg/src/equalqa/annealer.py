"""Simulated annealer with a systematic programming bias.

Programming a QMI adds a fixed Gaussian error to every coefficient. The error
draw is seeded by a hash of the programmed coefficients and the device seed,
so re-running the same QMI always sees the same corrupted Hamiltonian while
any change to the coefficients (an ensemble perturbation, a gauge) sees a
fresh, independent one. Trials are Metropolis anneals of the corrupted model;
outcomes are scored against the true problem.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .core import IsingModel, LengthMismatchError, SampleSet, energies
from .precision import DeviceRanges, Qmi


class IncompatibleDeviceError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceModel:
    bits: int = 8
    ranges: DeviceRanges = field(default_factory=DeviceRanges)
    sigma_h: float = 0.03
    sigma_j: float = 0.03
    sweeps: int = 200
    beta: tuple[float, float] = (0.1, 5.0)
    trial_correlation: float = 0.0
    device_seed: int = 0

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "beta", (float(self.beta[0]), float(self.beta[1])))

    def validation_errors(self) -> list[str]:
        errs = []
        if int(self.bits) != self.bits or self.bits < 1:
            errs.append(f"bits must be an integer >= 1 (got {self.bits!r})")
        if self.sigma_h < 0 or self.sigma_j < 0:
            errs.append("sigma_h and sigma_j must be non-negative")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            errs.append(f"sweeps must be an integer >= 1 (got {self.sweeps!r})")
        if len(self.beta) != 2 or not (0 < self.beta[0] <= self.beta[1]):
            errs.append(f"beta must satisfy 0 < start <= end (got {self.beta!r})")
        if not 0.0 <= self.trial_correlation <= 1.0:
            errs.append(f"trial_correlation must lie in [0, 1] (got {self.trial_correlation!r})")
        return errs

    def betas(self) -> np.ndarray:
        """Geometric inverse-temperature schedule, one value per sweep."""
        return np.geomspace(self.beta[0], self.beta[1], int(self.sweeps))

    def replace(self, **changes) -> DeviceModel:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "h_max": self.ranges.h_max,
            "j_max": self.ranges.j_max,
            "sigma_h": self.sigma_h,
            "sigma_j": self.sigma_j,
            "sweeps": self.sweeps,
            "beta": list(self.beta),
            "trial_correlation": self.trial_correlation,
            "device_seed": self.device_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> DeviceModel:
        default = cls()
        unknown = set(data) - set(default.to_dict())
        if unknown:
            raise ValueError(f"unknown device fields: {sorted(unknown)}")
        ranges = DeviceRanges(
            float(data.get("h_max", default.ranges.h_max)),
            float(data.get("j_max", default.ranges.j_max)),
        )
        return cls(
            bits=int(data.get("bits", default.bits)),
            ranges=ranges,
            sigma_h=float(data.get("sigma_h", default.sigma_h)),
            sigma_j=float(data.get("sigma_j", default.sigma_j)),
            sweeps=int(data.get("sweeps", default.sweeps)),
            beta=tuple(data.get("beta", default.beta)),
            trial_correlation=float(data.get("trial_correlation", default.trial_correlation)),
            device_seed=int(data.get("device_seed", default.device_seed)),
        )


def load_device(path) -> DeviceModel:
    return DeviceModel.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class ProgrammedQmi:
    intended: Qmi
    corrupted: IsingModel
    bias_fingerprint: int
    device: DeviceModel

    @property
    def model_id(self) -> str:
        return f"{self.bias_fingerprint:016x}"


def fingerprint(qmi: Qmi, device_seed: int) -> int:
    """64-bit hash of the exact programmed coefficients and the device seed."""
    m = qmi.model
    digest = hashlib.blake2b(digest_size=8)
    digest.update(np.int64(m.n).tobytes())
    digest.update(np.int64(qmi.bits).tobytes())
    digest.update(np.float64([qmi.ranges.h_max, qmi.ranges.j_max]).tobytes())
    keys = sorted(m.h)
    digest.update(np.asarray(keys, dtype=np.int64).tobytes())
    digest.update(np.asarray([m.h[k] for k in keys], dtype=np.float64).tobytes())
    ii, jj, ww = m.edge_arrays
    digest.update(ii.tobytes())
    digest.update(jj.tobytes())
    digest.update(ww.tobytes())
    digest.update(np.int64(device_seed).tobytes())
    return int.from_bytes(digest.digest(), "little")


def program(device: DeviceModel, qmi: Qmi) -> ProgrammedQmi:
    """Load a QMI onto the device, freezing its programming error."""
    if qmi.bits != device.bits or qmi.ranges != device.ranges:
        raise IncompatibleDeviceError(
            f"QMI (bits={qmi.bits}, ranges={qmi.ranges}) does not match device "
            f"(bits={device.bits}, ranges={device.ranges})"
        )
    fp = fingerprint(qmi, device.device_seed)
    rng = np.random.default_rng(fp)
    m = qmi.model
    h_keys = sorted(m.h)
    j_keys = sorted(m.J)
    e_h = rng.normal(0.0, device.sigma_h, size=len(h_keys)) if device.sigma_h > 0 else np.zeros(len(h_keys))
    e_j = rng.normal(0.0, device.sigma_j, size=len(j_keys)) if device.sigma_j > 0 else np.zeros(len(j_keys))
    h = {k: m.h[k] + float(e) for k, e in zip(h_keys, e_h)}
    J = {k: m.J[k] + float(e) for k, e in zip(j_keys, e_j)}
    return ProgrammedQmi(qmi, m.with_coefficients(h, J), fp, device)


def run_trials(pq: ProgrammedQmi, trials: int, trial_seed) -> np.ndarray:
    """Raw outcome stream, shape ``(trials, n)``, in trial order."""
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    m = pq.corrupted
    indptr, nbrs, wts = m.adjacency
    rng = np.random.default_rng(trial_seed)
    return _kernels.anneal(
        indptr, nbrs, wts, m.h_vector, pq.device.betas(), int(trials),
        float(pq.device.trial_correlation), rng,
    )


def _check_true_model(pq: ProgrammedQmi, true_model: IsingModel) -> None:
    if true_model.n != pq.corrupted.n:
        raise LengthMismatchError(f"true model has {true_model.n} spins, QMI has {pq.corrupted.n}")


def sample(pq: ProgrammedQmi, trials: int, trial_seed, true_model: IsingModel) -> SampleSet:
    """Execute ``trials`` anneals; energies are measured on ``true_model``."""
    _check_true_model(pq, true_model)
    Z = run_trials(pq, trials, trial_seed)
    return SampleSet.from_trials(Z, true_model, pq.model_id)


def sample_many(
    pqs: Sequence[ProgrammedQmi],
    trials: Sequence[int],
    seeds: Sequence[int],
    true_model: IsingModel,
    workers: int = 1,
) -> list[SampleSet]:
    """Sample several programmed QMIs, optionally on a thread pool.

    Each QMI uses its own seed, so the result does not depend on ``workers``.
    """
    jobs = list(zip(pqs, trials, seeds))
    if workers <= 1 or len(jobs) <= 1:
        return [sample(pq, t, s, true_model) for pq, t, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: sample(job[0], job[1], job[2], true_model), jobs))


def run_trials_curve(
    pq: ProgrammedQmi,
    trial_budget: int,
    checkpoints: Sequence[int],
    trial_seed,
    true_model: IsingModel,
) -> list[tuple[int, float]]:
    """Best-so-far true energy at each checkpoint of one trial stream."""
    cps = [int(c) for c in checkpoints]
    if not cps or cps[-1] != trial_budget or any(c < 1 for c in cps) or any(
        b <= a for a, b in zip(cps, cps[1:])
    ):
        raise ValueError(
            f"checkpoints must be strictly ascending positive integers ending at {trial_budget}, got {cps}"
        )
    _check_true_model(pq, true_model)
    Z = run_trials(pq, trial_budget, trial_seed)
    running = np.minimum.accumulate(energies(true_model, Z))
    return [(c, float(running[c - 1])) for c in cps]
