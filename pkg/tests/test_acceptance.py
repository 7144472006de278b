"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from conftest import enumerate_energies, naive_energy, random_model, random_spins
from equalqa.annealer import DeviceModel, program, run_trials_curve
from equalqa.cli import main
from equalqa.core import IsingModel, energy, flip, flip_delta, local_fields
from equalqa.experiments import ACCEPTANCE_DEVICE, profile_precision, without_timing
from equalqa.metrics import energy_residual, estimate_ground, exact_ground, relative_er
from equalqa.mitigate import (
    make_ensemble,
    random_gauge,
    run_baseline,
    run_equal,
    run_equal_plus,
    sqc,
    srt_transform,
    srt_untransform,
)
from equalqa.precision import DeviceRanges, prepare_qmi, quantize
from equalqa.topology import random_chimera_instance

SUITE_SEEDS = range(1000, 1020)
SUITE_TRIALS = 20_000
# first suite instance whose baseline does not reach the ground state
CURVE_SEED = 1000
# quantization is only visible when it is not swamped by programming bias, so
# the precision profile keeps the default linear bias
PROFILE_DEVICE = ACCEPTANCE_DEVICE.replace(sigma_h=0.03)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail, seconds):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail}; {seconds:.1f}s)")
        assert ok, detail

    return emit


def test_c01_energy_arithmetic(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 17))
        m = random_model(rng, n)
        z = random_spins(rng, n)
        e = energy(m, z)
        worst = max(worst, abs(e - naive_energy(m, z)))
        f = local_fields(m, z)
        for i in range(n):
            worst = max(worst, abs(flip_delta(m, z, f, i) - (energy(m, flip(z, i)) - e)))
    dt = time.perf_counter() - t0
    verdict(1, "energy arithmetic oracle", worst <= 1e-9 and dt < 5, f"max deviation {worst:.2e}", dt)


def test_c02_sqc_certification(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 17))
        m = random_model(rng, n)
        z = random_spins(rng, n)
        out = sqc(m, z)
        e = naive_energy(m, out)
        minimal = all(naive_energy(m, flip(out, i)) >= e - 1e-9 for i in range(n))
        ok = e <= naive_energy(m, z) + 1e-9 and minimal and np.array_equal(sqc(m, out), out)
        failures += not ok
    dt = time.perf_counter() - t0
    verdict(2, "SQC certification", failures == 0 and dt < 10, f"{failures} failures of 200", dt)


def test_c03_gauge_invariance(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = 0
    for k in range(50):
        n = int(rng.integers(1, 11))
        m = random_model(rng, n)
        g = random_gauge(n, k)
        gm = srt_transform(m, g)
        spectrum, gspectrum = enumerate_energies(m), enumerate_energies(gm)
        same = np.allclose(np.sort(spectrum), np.sort(gspectrum), atol=1e-9, rtol=0)
        z = srt_untransform(g, exact_ground(gm).spins)
        failures += not (same and abs(naive_energy(m, z) - spectrum.min()) <= 1e-9)
    dt = time.perf_counter() - t0
    verdict(3, "gauge invariance", failures == 0 and dt < 30, f"{failures} failures of 50", dt)


def test_c04_quantization_contract(verdict):
    t0 = time.perf_counter()
    ranges = DeviceRanges()
    rng = np.random.default_rng(4)
    x = rng.uniform(-ranges.j_max, ranges.j_max, 10_000)
    model = IsingModel(10_001, {}, {(0, i + 1): float(v) for i, v in enumerate(x)})
    keys = sorted(model.J)
    ok, max_errs = True, []
    for b in range(2, 17):
        q = quantize(model, b, ranges).model
        err = np.abs(np.array([q.J[k] for k in keys]) - x)
        ok &= bool(err.max() <= ranges.j_max * 2.0 ** -(b + 1))
        ok &= quantize(q, b, ranges).model == q
        max_errs.append(float(err.max()))
    monotone = all(b <= a for a, b in zip(max_errs, max_errs[1:]))
    dt = time.perf_counter() - t0
    verdict(4, "quantization contract", ok and monotone and dt < 1, f"max errors {max_errs[0]:.3g}..{max_errs[-1]:.3g}", dt)


def test_c05_perturbation_locality(verdict):
    t0 = time.perf_counter()
    ranges = DeviceRanges()
    hs, js = ranges.h_step(8), ranges.j_step(8)
    worst_steps, r_ok = 0.0, True
    for seed in range(50):
        ens = make_ensemble(random_chimera_instance(2, seed), 10, 8, ranges, master_seed=seed)
        base = ens.members[0].model
        for member, r in zip(ens.members[1:], ens.perturbation_magnitudes[1:]):
            r_ok &= 2.0**-9 <= r <= 2.0**-8
            for k, v in member.model.h.items():
                worst_steps = max(worst_steps, abs(v - base.h[k]) / hs)
            for k, v in member.model.J.items():
                worst_steps = max(worst_steps, abs(v - base.J[k]) / js)
    dt = time.perf_counter() - t0
    ok = worst_steps <= 2 + 1e-9 and r_ok and dt < 5
    verdict(5, "perturbation locality", ok, f"max move {worst_steps:.0f} grid steps, r in window: {r_ok}", dt)


@pytest.fixture(scope="module")
def suite():
    """Paired baseline / EQUAL / EQUAL+ arms on the seeded C2 suite."""
    t0 = time.perf_counter()
    rows = []
    for k, seed in enumerate(SUITE_SEEDS):
        model = random_chimera_instance(2, seed)
        ground = estimate_ground(model, restarts=256, sweeps=2000, seed=k)
        base = run_baseline(model, ACCEPTANCE_DEVICE, SUITE_TRIALS, k)
        eq = run_equal(model, ACCEPTANCE_DEVICE, 10, SUITE_TRIALS, k)
        plus = run_equal_plus(model, ACCEPTANCE_DEVICE, equal_result=eq)
        rows.append((seed, ground, base, eq, plus))
    return rows, time.perf_counter() - t0


def test_c06_never_worse(verdict, suite):
    rows, _ = suite
    t0 = time.perf_counter()
    bad = [seed for seed, _, _, eq, _ in rows if eq.best_energy > eq.samples[0].lowest[1]]
    verdict(6, "never-worse containment", not bad, f"{len(bad)} violations over {len(rows)} EQUAL runs", time.perf_counter() - t0)


def test_c07_noiseless_sanity(verdict):
    t0 = time.perf_counter()
    hits = 0
    for seed in range(100):
        r = np.random.default_rng(7000 + seed)
        n = int(r.integers(2, 13))
        m = random_model(r, n)
        dev = DeviceModel(bits=16, sigma_h=0.0, sigma_j=0.0, sweeps=10 * n, beta=(0.1, 10.0))
        res = run_baseline(m, dev, 20, seed)
        hits += abs(res.best_energy - exact_ground(m).energy) <= 1e-9
    dt = time.perf_counter() - t0
    verdict(7, "noiseless sanity", hits >= 95 and dt < 60, f"{hits}/100 instances at the exact ground", dt)


def test_c08_bias_saturation(verdict):
    t0 = time.perf_counter()
    model = random_chimera_instance(2, CURVE_SEED)
    ground = estimate_ground(model, restarts=256, sweeps=2000, seed=0)
    pq = program(ACCEPTANCE_DEVICE, prepare_qmi(model, ACCEPTANCE_DEVICE.bits, ACCEPTANCE_DEVICE.ranges))
    curve = dict(run_trials_curve(pq, SUITE_TRIALS, [SUITE_TRIALS // 5, SUITE_TRIALS], 0, model))
    early = energy_residual(curve[SUITE_TRIALS // 5], ground)
    er = energy_residual(curve[SUITE_TRIALS], ground)
    improvement = (early - er) / early if early > 0 else 0.0
    dt = time.perf_counter() - t0
    ok = improvement < 0.05 and er > 0 and dt < 120
    verdict(8, "systematic-bias saturation", ok, f"improvement over last 80% {improvement:.2%}, final ER {er:.4f}", dt)


def _mean_relative(rows, arm):
    rels = [relative_er(energy_residual(r[arm].best_energy, r[1]), energy_residual(r[2].best_energy, r[1])) for r in rows]
    rels = [x for x in rels if x is not None]
    return (float(np.mean(rels)) if rels else float("nan")), len(rels)


def test_c09_directional_headline(verdict, suite):
    rows, seconds = suite
    eq, ranked = _mean_relative(rows, 3)
    plus, _ = _mean_relative(rows, 4)
    ok = ranked > 0 and eq < 1.0 and plus < eq and plus <= 0.8 and seconds < 900
    detail = f"EQUAL {eq:.4f}, EQUAL+ {plus:.4f} over {ranked} ranked instances of {len(rows)}"
    verdict(9, "directional headline analog", ok, detail, seconds)


def test_c10_precision_direction(verdict):
    t0 = time.perf_counter()
    models = [random_chimera_instance(2, s) for s in SUITE_SEEDS[:10]]
    grounds = [estimate_ground(m, restarts=256, sweeps=2000, seed=k) for k, m in enumerate(models)]
    rows = profile_precision(models, grounds, PROFILE_DEVICE, [2, 4, 8, 12, 16], 10_000, seed=0)
    rel = {r["bits"]: r["relative_er"] for r in rows}
    dt = time.perf_counter() - t0
    ok = rel[2] is not None and rel[12] is not None and rel[2] >= rel[12] and dt < 300
    detail = ", ".join(f"b={b}: {v if v is None else round(v, 3)}" for b, v in rel.items())
    verdict(10, "precision-profile direction", ok, detail, dt)


def test_c11_determinism_and_parallel(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "benchmark": {"kind": "chimera", "m": 2, "seed": CURVE_SEED},
        "device": ACCEPTANCE_DEVICE.to_dict(),
        "scheme": "equal_plus", "m": 10, "total_trials": SUITE_TRIALS, "master_seed": 0,
    }))
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        texts.append(json.dumps(without_timing(json.loads(out.read_text())), sort_keys=True))
    model = random_chimera_instance(2, CURVE_SEED)
    serial = run_equal(model, ACCEPTANCE_DEVICE, 10, SUITE_TRIALS, 5, workers=1)
    parallel = run_equal(model, ACCEPTANCE_DEVICE, 10, SUITE_TRIALS, 5, workers=4)
    same = all(
        a.spins.tobytes() == b.spins.tobytes() and a.counts.tobytes() == b.counts.tobytes()
        and a.energies.tobytes() == b.energies.tobytes()
        for a, b in zip(serial.samples, parallel.samples)
    )
    dt = time.perf_counter() - t0
    ok = texts[0] == texts[1] and same and dt < 120
    verdict(11, "determinism and parallel equivalence", ok, f"rerun identical: {texts[0] == texts[1]}, parallel == serial: {same}", dt)
