"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria run at their full stated sizes through the same experiment runners
the CLI uses. Runtime limits are part of each criterion.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from chrslab.clifford import CliffordElement, canonical_key, generator_gates
from chrslab.experiments import ExperimentConfig, run_experiment
from chrslab.shadows import default_batches, lemma_shot_count, shadow_single_estimate
from chrslab.threshold import claim_implication_holds
from conftest import random_density

SEED = 20240611


def _verdict(capsys, number, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f} s / limit {limit:.0f} s]"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def _run(name, **params):
    return run_experiment(ExperimentConfig(name, params, seed=SEED))


def test_criterion_01_swap_simulation_bound(capsys):
    t = time.perf_counter()
    m = _run("swap-sim-error", d=4, q=9, trials=50, inputs=20, entangle_reference=True).metrics
    elapsed = time.perf_counter() - t
    detail = (f"max td {m['max_td']:.4f} vs bound {m['bound']:.2f} (mean {m['mean_td']:.4f}, "
              f"within-bound fraction {m['within_bound_fraction']:.3f}; twirled max {m['max_td_twirled']:.4f}, "
              f"Haar-averaged {m['max_td_haar_avg']:.4f})")
    _verdict(capsys, 1, m["max_td"] <= 6 / (9 + 1), detail, elapsed, 300)


def test_criterion_02_symmetric_subspace(capsys):
    t = time.perf_counter()
    worst_p, worst_branch = 0.0, 0.0
    for d in (2, 4):
        for ell in range(1, 6):
            m = _run("symsub-check", d=d, q=ell).metrics
            worst_p = max(worst_p, abs(m["p_sym_orthogonal"] - 1 / (ell + 1)))
            worst_branch = max(worst_branch, m["post_sym_error"], m["post_antisym_error"])
    elapsed = time.perf_counter() - t
    detail = f"max |p_sym - 1/(l+1)| {worst_p:.1e}, max branch error {worst_branch:.1e}"
    _verdict(capsys, 2, worst_p <= 1e-9 and worst_branch <= 1e-9, detail, elapsed, 60)


def test_criterion_03_shadow_tomography(capsys):
    t = time.perf_counter()
    shots = lemma_shot_count(1 / 3, 0.1, 2)
    m = _run("shadow-bench", n=3, shots=shots, eps=1 / 3, delta=0.1, trials=500).metrics
    elapsed = time.perf_counter() - t
    rate = m["fidelity_failure_rate"]
    detail = (f"N {m['shots']}, batches {m['batches']}, fidelity failure rate {rate:.3f} <= 0.15 "
              f"(orthogonal {m['orthogonal_failure_rate']:.3f})")
    _verdict(capsys, 3, shots == 6773 and m["batches"] == default_batches(0.1, 2) and rate <= 0.1 + 0.05,
             detail, elapsed, 600)


def _single_qubit_cliffords():
    seen = {}
    frontier = [CliffordElement(1, gates=())]
    seen[canonical_key(frontier[0].unitary())] = frontier[0]
    while frontier:
        nxt = []
        for c in frontier:
            for g in generator_gates(1):
                e = CliffordElement(1, gates=c.gates + (g,))
                key = canonical_key(e.unitary())
                if key not in seen:
                    seen[key] = e
                    nxt.append(e)
        frontier = nxt
    return list(seen.values())


def test_criterion_04_channel_inverse(capsys):
    t = time.perf_counter()
    group = _single_qubit_cliffords()
    gen = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        rho = random_density(2, gen)
        avg = np.zeros((2, 2), dtype=complex)
        for c in group:
            u = c.unitary()
            for b in range(2):
                p = np.real(u[b] @ rho @ u[b].conj())
                avg += p * shadow_single_estimate((c, b))
        worst = max(worst, np.abs(avg / len(group) - rho).max())
    elapsed = time.perf_counter() - t
    detail = f"{len(group)} Cliffords, max entry error {worst:.1e}"
    _verdict(capsys, 4, len(group) == 24 and worst <= 1e-12, detail, elapsed, 1)


@pytest.mark.slow
def test_criterion_05_owpuzz_correctness(capsys):
    t = time.perf_counter()
    m = _run("owpuzz-correctness", n=4, shots=1000, trials=200).metrics
    elapsed = time.perf_counter() - t
    detail = f"accept rate {m['accept_rate']:.3f} (Wilson 95% [{m['ci_low']:.3f}, {m['ci_high']:.3f}]) >= 0.95"
    _verdict(capsys, 5, m["accept_rate"] >= 0.95, detail, elapsed, 600)


@pytest.mark.slow
def test_criterion_06_owpuzz_no_sample_security(capsys):
    t = time.perf_counter()
    rates = {adv: _run("owpuzz-attack", n=4, shots=1000, trials=1000, adversary=adv).metrics
             for adv in ("random-guess", "shadow-mle")}
    elapsed = time.perf_counter() - t
    detail = ", ".join(f"{a} {m['success_rate']:.3f}" for a, m in rates.items())
    detail += f" <= 0.25 (reference point {0.6**4:.3f})"
    _verdict(capsys, 6, all(m["success_rate"] <= 0.25 for m in rates.values()), detail, elapsed, 900)


def test_criterion_07_threshold_search(capsys):
    t = time.perf_counter()
    m = _run("threshold-search-planted", trials=200, m=8, theta=0.5, copies=9).metrics
    elapsed = time.perf_counter() - t
    detail = f"planted rate {m['planted_rate']:.3f} >= 0.5, re-verify rate {m['reverify_rate']:.3f} >= 0.95"
    _verdict(capsys, 7, m["planted_rate"] >= 0.5 and m["reverify_rate"] >= 0.95, detail, elapsed, 300)


def test_criterion_08_owsg_attack(capsys):
    t = time.perf_counter()
    m = _run("owsg-attack", n=3, trials=100, **{"lambda": 3}).metrics
    grid_ok = all(claim_implication_holds(Fraction(i, 1000), 3) for i in range(1001))
    elapsed = time.perf_counter() - t
    detail = (f"success rate {m['success_rate']:.3f} >= 0.5 at re-verify bound {m['bound']:.4f}; "
              f"exact claim grid {'holds' if grid_ok else 'violated'}")
    _verdict(capsys, 8, m["success_rate"] >= 0.5 and grid_ok, detail, elapsed, 900)


def test_criterion_09_two_simulators(capsys):
    t = time.perf_counter()
    m = _run("swap-two-simulators", d=4, q=9, trials=100).metrics
    elapsed = time.perf_counter() - t
    detail = (f"td_single mean {m['td_single_mean']:.4f} (max {m['td_single_max']:.4f}) <= {m['bound_single']:.2f}, "
              f"td_double mean {m['td_separate_mean']:.4f} >= 0.2")
    ok = m["td_single_mean"] <= m["bound_single"] and m["td_separate_mean"] >= 0.2
    _verdict(capsys, 9, ok, detail, elapsed, 300)


def test_criterion_10_haar_moments(capsys):
    t = time.perf_counter()
    m = _run("haar-moments", d=16, trials=100_000).metrics
    elapsed = time.perf_counter() - t
    names = ("z_first", "random_traceless")
    ok = all(abs(m[f"{k}_mean_z"]) <= 3 and m[f"{k}_var_rel_err"] <= 0.1 for k in names)
    detail = ", ".join(f"{k}: mean z {m[f'{k}_mean_z']:+.2f}, var rel err {m[f'{k}_var_rel_err']:.3f}"
                       for k in names)
    _verdict(capsys, 10, ok, detail, elapsed, 120)
