"""Ising model representation and energy arithmetic.

The Hamiltonian is

    E(z) = offset + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j,    z_i in {-1, +1}.

Coefficients are stored sparsely (dicts keyed by index / ordered pair); dense
array views used by the numerical kernels are derived lazily and cached.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import _kernels

ENERGY_TOL = 1e-9


class LengthMismatchError(ValueError):
    """Spin configuration length does not match the model size."""


class InvalidModelError(ValueError):
    pass


class InvalidScaleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Sparse Ising Hamiltonian on ``n`` spins.

    Parameters
    ----------
    n : int
        Number of spins (qubits).
    h : dict[int, float]
        Linear coefficients. Missing indices mean 0.
    J : dict[tuple[int, int], float]
        Couplers keyed by ``(i, j)`` with ``i < j``. Missing pairs mean 0.
    offset : float
        Constant added to every energy.
    """

    n: int
    h: Mapping[int, float] = field(default_factory=dict)
    J: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidModelError(f"n must be a positive integer, got {self.n!r}")
        h = {}
        for i, v in self.h.items():
            i = int(i)
            if not 0 <= i < self.n:
                raise InvalidModelError(f"linear index {i} outside [0, {self.n})")
            h[i] = float(v)
        J = {}
        for key, v in self.J.items():
            i, j = int(key[0]), int(key[1])
            if i == j:
                raise InvalidModelError(f"self-coupling on qubit {i}")
            if i > j:
                raise InvalidModelError(f"coupler key ({i}, {j}) is not ordered i < j")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidModelError(f"coupler ({i}, {j}) outside [0, {self.n})")
            J[(i, j)] = float(v)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "offset", float(self.offset))

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (
            self.n == other.n
            and self.offset == other.offset
            and self.h == other.h
            and self.J == other.J
        )

    def __add__(self, other: IsingModel) -> IsingModel:
        if self.n != other.n:
            raise LengthMismatchError(f"cannot add models of size {self.n} and {other.n}")
        h = dict(self.h)
        for i, v in other.h.items():
            h[i] = h.get(i, 0.0) + v
        J = dict(self.J)
        for k, v in other.J.items():
            J[k] = J.get(k, 0.0) + v
        return IsingModel(self.n, h, J, self.offset + other.offset)

    @property
    def num_couplers(self) -> int:
        return len(self.J)

    def is_empty(self) -> bool:
        return not self.h and not self.J

    def with_coefficients(
        self, h: Mapping[int, float], J: Mapping[tuple[int, int], float]
    ) -> IsingModel:
        """Same size and offset, new coefficient maps."""
        return IsingModel(self.n, h, J, self.offset)

    # dense views for the kernels

    @cached_property
    def h_vector(self) -> np.ndarray:
        v = np.zeros(self.n)
        for i, x in self.h.items():
            v[i] = x
        v.setflags(write=False)
        return v

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(i, j, w)`` arrays over couplers in sorted key order."""
        keys = sorted(self.J)
        ii = np.array([k[0] for k in keys], dtype=np.int64)
        jj = np.array([k[1] for k in keys], dtype=np.int64)
        ww = np.array([self.J[k] for k in keys], dtype=np.float64)
        for a in (ii, jj, ww):
            a.setflags(write=False)
        return ii, jj, ww

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR adjacency ``(indptr, neighbors, weights)``."""
        ii, jj, ww = self.edge_arrays
        rows = np.concatenate([ii, jj])
        cols = np.concatenate([jj, ii])
        wts = np.concatenate([ww, ww])
        order = np.lexsort((cols, rows))
        rows, cols, wts = rows[order], cols[order], wts[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, cols.astype(np.int64), wts.astype(np.float64)

    def coefficient_stats(self) -> dict:
        vals = np.array(list(self.h.values()) + list(self.J.values()))
        if vals.size == 0:
            return {"count": 0, "mean": 0.0, "std": 0.0, "min": 0.0, "max": 0.0}
        return {
            "count": int(vals.size),
            "mean": float(vals.mean()),
            "std": float(vals.std()),
            "min": float(vals.min()),
            "max": float(vals.max()),
        }


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for ``(master, *keys)``."""
    ints = [int(master) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    state = np.random.SeedSequence(ints).generate_state(1, dtype=np.uint64)[0]
    return int(state) >> 1


def as_spins(z, n: int | None = None) -> np.ndarray:
    """Validate and convert ``z`` to an int8 spin vector."""
    arr = np.asarray(z)
    if arr.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spin entries must be -1 or +1")
    if n is not None and arr.shape[0] != n:
        raise LengthMismatchError(f"expected {n} spins, got {arr.shape[0]}")
    return arr.astype(np.int8)


def energy(model: IsingModel, z) -> float:
    """Energy of one configuration."""
    s = as_spins(z, model.n)
    return float(energies(model, s[None, :])[0])


def energies(model: IsingModel, Z: np.ndarray) -> np.ndarray:
    """Energies of a batch of configurations, one per row of ``Z``.

    Summation order is fixed, so a configuration's energy does not depend on
    the batch it is evaluated in.
    """
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[1] != model.n:
        raise LengthMismatchError(f"expected shape (k, {model.n}), got {Z.shape}")
    ii, jj, ww = model.edge_arrays
    return _kernels.batch_energy(
        np.ascontiguousarray(Z, dtype=np.int8), model.h_vector, ii, jj, ww, model.offset
    )


def local_fields(model: IsingModel, z) -> np.ndarray:
    """``f_k = h_k + sum_j J_kj z_j`` with J treated symmetrically."""
    s = as_spins(z, model.n).astype(np.float64)
    ii, jj, ww = model.edge_arrays
    f = model.h_vector.copy()
    np.add.at(f, ii, ww * s[jj])
    np.add.at(f, jj, ww * s[ii])
    return f


def flip_delta(model: IsingModel, z, fields: np.ndarray, i: int) -> float:
    """Energy change from flipping spin ``i``; ``fields`` must be current."""
    if not 0 <= i < model.n:
        raise IndexError(f"qubit index {i} outside [0, {model.n})")
    return float(-2.0 * z[i] * fields[i])


def flip(z, i: int) -> np.ndarray:
    out = np.array(z, dtype=np.int8, copy=True)
    out[i] = -out[i]
    return out


def scale(model: IsingModel, s: float) -> IsingModel:
    """Multiply every coefficient and the offset by ``s > 0``."""
    if not s > 0:
        raise InvalidScaleError(f"scale must be positive, got {s!r}")
    return IsingModel(
        model.n,
        {i: v * s for i, v in model.h.items()},
        {k: v * s for k, v in model.J.items()},
        model.offset * s,
    )


# model file format


def model_to_dict(model: IsingModel) -> dict:
    return {
        "n": model.n,
        "h": [[i, model.h[i]] for i in sorted(model.h)],
        "j": [[i, j, model.J[(i, j)]] for (i, j) in sorted(model.J)],
        "offset": model.offset,
    }


def model_from_dict(data: dict) -> IsingModel:
    try:
        n = data["n"]
        h_items = data.get("h", [])
        j_items = data.get("j", [])
        offset = data.get("offset", 0.0)
    except (TypeError, KeyError) as exc:
        raise InvalidModelError(f"malformed model document: {exc}") from None
    h: dict[int, float] = {}
    for i, v in h_items:
        if i in h:
            raise InvalidModelError(f"duplicate linear index {i}")
        h[i] = v
    J: dict[tuple[int, int], float] = {}
    for i, j, v in j_items:
        if (i, j) in J or (j, i) in J:
            raise InvalidModelError(f"duplicate coupler ({i}, {j})")
        J[(i, j)] = v
    return IsingModel(n, h, J, offset)


def save_model(model: IsingModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> IsingModel:
    return model_from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Distinct outcomes of a batch of trials.

    ``spins`` holds one distinct configuration per row; ``energies`` are
    measured against the true problem model, never the device's.
    ``trial_rows[t]`` is the row produced by trial ``t`` when the trial order
    is known.
    """

    spins: np.ndarray
    energies: np.ndarray
    counts: np.ndarray
    model_id: str = ""
    trial_rows: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_trials(cls, Z: np.ndarray, true_model: IsingModel, model_id: str = "") -> SampleSet:
        """Collapse a ``(trials, n)`` array of outcomes into distinct rows."""
        uniq, inverse, counts = np.unique(
            np.asarray(Z, dtype=np.int8), axis=0, return_inverse=True, return_counts=True
        )
        e = energies(true_model, uniq)
        # rows sorted by energy; ties keep np.unique's lexicographic order
        order = np.argsort(e, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        return cls(uniq[order], e[order], counts[order].astype(np.int64), model_id, rank[inverse.ravel()])

    def stream(self) -> np.ndarray:
        """Per-trial energies in execution order."""
        if self.trial_rows is None:
            raise ValueError("trial order was not recorded for this sample set")
        return self.energies[self.trial_rows]

    def __len__(self) -> int:
        return int(self.spins.shape[0])

    @property
    def num_trials(self) -> int:
        return int(self.counts.sum())

    @property
    def lowest(self) -> tuple[np.ndarray, float]:
        k = int(np.argmin(self.energies))
        return self.spins[k].copy(), float(self.energies[k])

    def __iter__(self) -> Iterable[tuple[np.ndarray, float, int]]:
        for row, e, c in zip(self.spins, self.energies, self.counts):
            yield row, float(e), int(c)

    def merge(self, other: SampleSet, true_model: IsingModel, model_id: str = "") -> SampleSet:
        rows = np.concatenate([self.spins, other.spins])
        weights = np.concatenate([self.counts, other.counts])
        uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
        counts = np.bincount(inverse.ravel(), weights=weights, minlength=len(uniq))
        e = energies(true_model, uniq)
        order = np.argsort(e, kind="stable")
        return SampleSet(uniq[order], e[order], counts[order].astype(np.int64), model_id or self.model_id)
