"""Energy Residual, ground-truth oracles, and energy histograms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .core import IsingModel, SampleSet, energy
from .precision import DeviceRanges, normalize

MAX_EXACT_QUBITS = 26
# ``auto`` switches to the estimate above this size to keep runs interactive
AUTO_EXACT_QUBITS = 20


class TooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    energy: float
    method: str
    certified: bool
    spins: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"energy": self.energy, "method": self.method, "certified": self.certified}


@dataclass
class ErReport:
    e_min: float
    e_global: GroundTruth
    er: float
    relative_er: float | None = None
    curve: list[tuple[int, float]] | None = None

    def to_dict(self) -> dict:
        d = {
            "e_min": self.e_min,
            "e_global": self.e_global.to_dict(),
            "er": self.er,
            "relative_er": self.relative_er,
        }
        if self.curve is not None:
            d["curve"] = [[t, er] for t, er in self.curve]
        return d


def energy_residual(e_min: float, ground: GroundTruth | float) -> float:
    g = ground.energy if isinstance(ground, GroundTruth) else float(ground)
    return abs(e_min - g)


def relative_er(scheme_er: float, baseline_er: float) -> float | None:
    """Scheme ER over baseline ER; ``None`` when the baseline already hit the ground."""
    if scheme_er < 0 or baseline_er < 0:
        raise ValueError(f"energy residuals must be non-negative, got {scheme_er}, {baseline_er}")
    if baseline_er == 0:
        return None
    return scheme_er / baseline_er


def exact_ground(model: IsingModel) -> GroundTruth:
    """Certified minimum by Gray-code enumeration of all 2^n states."""
    if model.n > MAX_EXACT_QUBITS:
        raise TooLargeError(
            f"exact enumeration is limited to {MAX_EXACT_QUBITS} qubits (got {model.n}); "
            "use estimate_ground instead"
        )
    indptr, nbrs, wts = model.adjacency
    _, code = _kernels.gray_minimum(indptr, nbrs, wts, model.h_vector, model.offset)
    bits = (int(code) >> np.arange(model.n)) & 1
    z = np.where(bits == 1, -1, 1).astype(np.int8)
    return GroundTruth(energy(model, z), "exact_enumeration", True, z)


def estimate_ground(
    model: IsingModel,
    restarts: int = 64,
    sweeps: int = 1000,
    seed: int = 0,
    beta: tuple[float, float] = (0.1, 10.0),
) -> GroundTruth:
    """Best of ``restarts`` noiseless anneals, each finished by single-flip descent.

    Restarts come from one seeded stream, so a larger ``restarts`` only adds
    candidates and never raises the estimate.
    """
    if restarts < 1 or sweeps < 1:
        raise ValueError("restarts and sweeps must be positive")
    normed, _ = normalize(model, DeviceRanges())
    indptr, nbrs, wts = normed.adjacency
    betas = np.geomspace(beta[0], beta[1], int(sweeps))
    Z = _kernels.anneal(indptr, nbrs, wts, normed.h_vector, betas, int(restarts), 0.0, np.random.default_rng(seed))
    indptr, nbrs, wts = model.adjacency
    _kernels.descend(indptr, nbrs, wts, model.h_vector, Z)
    ss = SampleSet.from_trials(Z, model)
    z, e = ss.lowest
    return GroundTruth(e, "multistart_descent", False, z)


def ground_truth(model: IsingModel, method: str = "auto", **effort) -> GroundTruth:
    """Exact enumeration when feasible (``auto``), otherwise the estimate."""
    if method == "exact" or (method == "auto" and model.n <= AUTO_EXACT_QUBITS):
        return exact_ground(model)
    if method in ("estimate", "auto"):
        return estimate_ground(model, **effort)
    raise ValueError(f"unknown ground-truth method {method!r}")


def _as_sets(samples) -> list[SampleSet]:
    if isinstance(samples, SampleSet):
        return [samples]
    return list(samples)


def energy_histogram(samples: SampleSet | Iterable[SampleSet], bins: int = 50) -> list[tuple[float, float, int]]:
    """Equal-width histogram of outcome energies weighted by multiplicity."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    sets = _as_sets(samples)
    if not sets or sum(len(s) for s in sets) == 0:
        raise ValueError("cannot histogram an empty sample set")
    e = np.concatenate([s.energies for s in sets])
    w = np.concatenate([s.counts for s in sets])
    lo, hi = float(e.min()), float(e.max())
    counts, edges = np.histogram(e, bins=bins, range=(lo, hi) if hi > lo else None, weights=w)
    return [(float(a), float(b), int(round(c))) for a, b, c in zip(edges[:-1], edges[1:], counts)]


def er_report(
    e_min: float,
    ground: GroundTruth,
    baseline_er: float | None = None,
    curve: Sequence[tuple[int, float]] | None = None,
) -> ErReport:
    """Bundle ER, optional relative ER, and an optional best-so-far energy curve."""
    er = energy_residual(e_min, ground)
    rel = relative_er(er, baseline_er) if baseline_er is not None else None
    er_curve = [(int(t), energy_residual(e, ground)) for t, e in curve] if curve is not None else None
    return ErReport(e_min, ground, er, rel, er_curve)
