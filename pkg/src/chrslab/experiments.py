"""Experiment registry, parameter schemas, dispatch and report writing."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import SCHEMA
from .haar import sample_haar_state, sample_haar_states
from .linalg import PureState
from .owpuzz import ADVERSARIES, OwpParams, owp_security_experiment
from .rng import RngStream
from .shadows import (default_batches, lemma_shot_count, shadow_estimate_observable,
                      shadow_gen)
from .swap_sim import swap_error_experiment, two_simulator_demo
from .symmetric import explicit_sym_projector, product_state, sym_project, symmetric_dimension
from .threshold import owsg_attack_experiment, threshold_search_experiment

SIG_DIGITS = 12


class SchemaError(ValueError):
    """Invalid experiment name or parameter."""

    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field = field_name


class ReportIOError(OSError):
    """Report could not be written."""


@dataclass(frozen=True)
class Param:
    name: str
    type: type
    default: Any
    help: str
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None


@dataclass(frozen=True)
class Experiment:
    name: str
    summary: str
    params: tuple[Param, ...]
    runner: Callable[[dict, int], tuple[dict, list[dict]]]


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    format: str = "json"


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    metrics: dict
    records: list[dict] = field(default_factory=list)
    duration_s: float = 0.0
    schema: str = SCHEMA

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "metrics": self.metrics,
            "duration_s": self.duration_s,
            "records": self.records,
        }


def _round(x):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if not math.isfinite(x) else float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def _positive(x) -> bool:
    return x >= 1


# shared parameter definitions
def _trials(default: int, what: str = "trials") -> Param:
    return Param("trials", int, default, f"number of {what}", _positive, ">= 1")


_THETA = Param("theta", float, 0.5, "threshold-search acceptance fraction", lambda x: 0.4 <= x <= 0.6, "in [0.4, 0.6]")
_D_SWAP = Param("d", int, 4, "dimension of the query register", lambda x: 3 <= x <= 16, "in [3, 16]")
_Q = Param("q", int, 9, "copies per symmetric test", lambda x: 1 <= x <= 10_000, "in [1, 10000]")


def _owp_params(p: dict) -> OwpParams:
    return OwpParams(p["n"], shots_per_ell=p["shots"], accept_threshold=p["threshold"],
                     accept_count_fraction=p["count_fraction"], n_batches=p["batches"])


_OWP_COMMON = (
    Param("n", int, 4, "security parameter (sizes n..2n)", lambda x: 1 <= x <= 5, "in [1, 5]"),
    Param("shots", int, 1000, "shadow snapshots per size", _positive, ">= 1"),
    Param("batches", int, default_batches(0.1, 2), "median-of-means batches", _positive, ">= 1"),
    Param("threshold", float, 0.5, "per-size estimate threshold", lambda x: 0 < x < 1, "in (0, 1)"),
    Param("count_fraction", float, 0.75, "fraction of sizes that must pass", lambda x: 0 < x <= 1, "in (0, 1]"),
)


def _run_owp_correctness(p: dict, seed: int):
    res = owp_security_experiment(p["n"], p["trials"], "honest", seed, _owp_params(p))
    return ({"accept_rate": res["success_rate"], "ci_low": res["ci_low"], "ci_high": res["ci_high"],
             "accepted": res["successes"], "required_count": _owp_params(p).required_count},
            res["records"])


def _run_owp_attack(p: dict, seed: int):
    res = owp_security_experiment(p["n"], p["trials"], p["adversary"], seed, _owp_params(p))
    return ({"success_rate": res["success_rate"], "ci_low": res["ci_low"], "ci_high": res["ci_high"],
             "successes": res["successes"], "reference_point": 0.6 ** p["n"],
             "required_count": _owp_params(p).required_count},
            res["records"])


def _run_owsg(p: dict, seed: int):
    res = owsg_attack_experiment(p["n"], p["lambda"], p["trials"], seed, p["variant"], p["theta"],
                                 p["copies"] or None, p["shots"], p["degenerate"])
    metrics = {k: res[k] for k in ("success_rate", "ci_low", "ci_high", "bound", "mean_reverify")}
    metrics["correct_key_rate"] = float(np.mean([r["correct_key"] for r in res["records"]]))
    return metrics, res["records"]


def _run_threshold(p: dict, seed: int):
    res = threshold_search_experiment(p["trials"], seed, p["m"], p["theta"], p["copies"], p["shots"])
    return {k: res[k] for k in ("planted_rate", "found_rate", "reverify_rate")}, res["records"]


def _run_swap_error(p: dict, seed: int):
    res = swap_error_experiment(p["d"], p["q"], p["trials"], p["inputs"], p["entangle_reference"],
                                seed, p["average"] or None)
    metrics = {k: v for k, v in res.items() if not k.startswith("td_")
               and k not in ("d", "q", "n_psi", "n_inputs", "n_average", "entangle_reference")}
    records = [{"psi": a, "input": b, "td_strict": float(res["td_strict"][a, b]),
                "td_twirled": float(res["td_twirled"][a, b])}
               for a in range(res["n_psi"]) for b in range(res["n_inputs"])]
    return metrics, records


def _run_two_sim(p: dict, seed: int):
    res = two_simulator_demo(p["d"], p["q"], p["trials"], seed)
    metrics = {k: v for k, v in res.items() if k not in ("records", "d", "q", "n_psi")}
    return metrics, res["records"]


def _run_shadow_bench(p: dict, seed: int):
    n, eps, delta = p["n"], p["eps"], p["delta"]
    shots = p["shots"] or lemma_shot_count(eps, delta, 2)
    batches = p["batches"] or default_batches(delta, 2)
    d = 2**n
    records = []
    for trial in range(p["trials"]):
        gen = RngStream(seed, trial).generator()
        psi = sample_haar_state(d, gen)
        # orthogonal partner for the second observable
        phi = sample_haar_state(d, gen).amplitudes
        phi = phi - np.vdot(psi.amplitudes, phi) * psi.amplitudes
        phi = PureState(phi, normalize=True)
        shadow = shadow_gen(psi, shots, gen)
        fid = shadow_estimate_observable(shadow, psi, batches)
        orth = shadow_estimate_observable(shadow, phi, batches)
        records.append({"trial": trial, "fidelity_estimate": fid, "orthogonal_estimate": orth,
                        "fidelity_fail": int(abs(fid - 1) > eps), "orthogonal_fail": int(abs(orth) > eps)})
    trials = len(records)
    return ({
        "shots": shots,
        "batches": batches,
        "fidelity_failure_rate": sum(r["fidelity_fail"] for r in records) / trials,
        "orthogonal_failure_rate": sum(r["orthogonal_fail"] for r in records) / trials,
        "any_failure_rate": sum(r["fidelity_fail"] or r["orthogonal_fail"] for r in records) / trials,
        "allowed_failure_rate": delta,
        "mean_fidelity_estimate": float(np.mean([r["fidelity_estimate"] for r in records])),
    }, records)


_MOMENT_CHUNK = 10_000


def _moment_observables(d: int, seed: int) -> dict[str, np.ndarray]:
    z_first = np.diag(np.r_[np.ones(d // 2), -np.ones(d // 2)]).astype(complex)
    gen = RngStream(seed, 2**32).generator()
    a = gen.normal(size=(d, d)) + 1j * gen.normal(size=(d, d))
    h = (a + a.conj().T) / 2
    h -= np.trace(h) / d * np.eye(d)
    h /= np.abs(np.linalg.eigvalsh(h)).max()
    return {"z_first": z_first, "random_traceless": h}


def _run_haar_moments(p: dict, seed: int):
    d, total = p["d"], p["trials"]
    obs = _moment_observables(d, seed)
    values = {k: [] for k in obs}
    zero_pop = []
    for chunk, start in enumerate(range(0, total, _MOMENT_CHUNK)):
        count = min(_MOMENT_CHUNK, total - start)
        states = sample_haar_states(d, count, RngStream(seed, chunk).generator())
        zero_pop.append(np.abs(states[:, 0]) ** 2)
        for k, o in obs.items():
            values[k].append(np.einsum("bi,ij,bj->b", states.conj(), o, states).real)
    metrics = {"samples": total, "zero_population_mean": float(np.concatenate(zero_pop).mean()),
               "zero_population_expected": 1 / d}
    ok = True
    for k, o in obs.items():
        v = np.concatenate(values[k])
        se = v.std(ddof=1) / math.sqrt(v.size)
        var = v.var(ddof=1)
        expected = float(np.trace(o @ o).real) / (d * (d + 1))
        metrics[f"{k}_mean"] = float(v.mean())
        metrics[f"{k}_mean_z"] = float(v.mean() / se)
        metrics[f"{k}_var"] = float(var)
        metrics[f"{k}_var_expected"] = expected
        metrics[f"{k}_var_rel_err"] = abs(var - expected) / expected
        ok &= abs(v.mean()) <= 3 * se and abs(var - expected) <= 0.1 * expected
    metrics["all_within_tolerance"] = bool(ok)
    return metrics, []


def _run_symsub(p: dict, seed: int):
    d, ell = p["d"], p["q"]
    gen = RngStream(seed, 0).generator()
    psi = sample_haar_state(d, gen).amplitudes
    phi = sample_haar_state(d, gen).amplitudes
    phi = phi - np.vdot(psi, phi) * psi
    phi /= np.linalg.norm(phi)
    regs = [f"r{i}" for i in range(ell + 1)]
    res = sym_project(product_state([phi] + [psi] * ell, regs), regs)
    shifted = [product_state([psi] * i + [phi] + [psi] * (ell - i)).amplitudes for i in range(ell + 1)]
    want_sym = sum(shifted) / math.sqrt(ell + 1)
    want_anti = ell / (ell + 1) * shifted[0] - sum(shifted[1:]) / (ell + 1)
    want_anti /= np.linalg.norm(want_anti)
    sym_input = sym_project(product_state([psi] * (ell + 1), regs), regs)
    metrics = {
        "p_sym_orthogonal": res.p_sym,
        "p_sym_expected": 1 / (ell + 1),
        "post_sym_error": float(np.abs(res.post_sym.amplitudes - want_sym).max()),
        "post_antisym_error": float(np.abs(res.post_antisym.amplitudes - want_anti).max()) if ell else 0.0,
        "p_sym_symmetric_input": sym_input.p_sym,
        "symmetric_dimension": symmetric_dimension(d, ell + 1),
    }
    if d ** (ell + 1) <= 1024:
        proj = explicit_sym_projector(d, ell + 1)
        vec = product_state([phi] + [psi] * ell).amplitudes
        metrics["projector_rank"] = int(round(np.trace(proj).real))
        metrics["idempotence_error"] = float(np.abs(proj @ proj - proj).max())
        metrics["recursion_vs_explicit_error"] = float(
            np.abs(proj @ vec - math.sqrt(res.p_sym) * res.post_sym.amplitudes).max())
    return metrics, []


EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in (
    Experiment("owpuzz-correctness", "honest sampler/verifier accept rate", (
        *_OWP_COMMON, _trials(200)), _run_owp_correctness),
    Experiment("owpuzz-attack", "no-sample adversary success against the puzzle verifier", (
        *_OWP_COMMON, _trials(1000),
        Param("adversary", str, "random-guess", "no-sample strategy",
              choices=tuple(a for a in ADVERSARIES if a != "honest"))), _run_owp_attack),
    Experiment("owsg-attack", "threshold-search attack on the toy CHRS one-way state generator", (
        Param("n", int, 3, "key length", lambda x: 1 <= x <= 4, "in [1, 4]"),
        Param("lambda", int, 3, "security parameter (10*lambda verifier repetitions)",
              lambda x: 1 <= x <= 8, "in [1, 8]"),
        _trials(100), _THETA,
        Param("copies", int, 0, "copies per test (0 picks ceil(log2(m)^2))", lambda x: x >= 0, ">= 0"),
        Param("shots", int, 1000, "re-verification shots", _positive, ">= 1"),
        Param("variant", str, "pauli", "toy generator variant", choices=("pauli", "pauli-mixed")),
        Param("degenerate", bool, False, "every key yields the same state (sanity path)"),
    ), _run_owsg),
    Experiment("threshold-search-planted", "threshold search on a planted qubit instance", (
        _trials(200, "runs"),
        Param("m", int, 8, "number of tests", _positive, ">= 1"),
        _THETA,
        Param("copies", int, 9, "copies per test", _positive, ">= 1"),
        Param("shots", int, 1000, "re-measurement shots", _positive, ">= 1"),
    ), _run_threshold),
    Experiment("swap-sim-error", "per-query error of the swap-oracle simulator", (
        _D_SWAP, _Q, _trials(50, "oracle states"),
        Param("inputs", int, 20, "random inputs per oracle state", _positive, ">= 1"),
        Param("average", int, 0, "oracle states for the Haar-averaged comparison (0 uses trials)",
              lambda x: x == 0 or x >= 2, "0 or >= 2"),
        Param("entangle_reference", bool, True, "entangle inputs with a reference of dimension d"),
    ), _run_swap_error),
    Experiment("swap-two-simulators", "two queries with one versus two simulators", (
        _D_SWAP, _Q, _trials(100, "oracle states")), _run_two_sim),
    Experiment("shadow-bench", "shadow fidelity estimation failure rate", (
        Param("n", int, 3, "qubits", lambda x: 1 <= x <= 8, "in [1, 8]"),
        Param("shots", int, 0, "snapshots per shadow (0 uses the sample-complexity bound)", lambda x: x >= 0, ">= 0"),
        Param("batches", int, 0, "median-of-means batches (0 uses ceil(2 ln(2M/delta)))",
              lambda x: x >= 0, ">= 0"),
        Param("eps", float, 1 / 3, "accuracy", lambda x: 0 < x <= 1, "in (0, 1]"),
        Param("delta", float, 0.1, "failure probability", lambda x: 0 < x < 1, "in (0, 1)"),
        _trials(500, "independent shadows"),
    ), _run_shadow_bench),
    Experiment("haar-moments", "first and second moments of trace-zero observables on Haar states", (
        Param("d", int, 16, "dimension (even)", lambda x: x >= 2 and x % 2 == 0 and x <= 4096, "even, in [2, 4096]"),
        _trials(100_000, "samples"),
    ), _run_haar_moments),
    Experiment("symsub-check", "symmetric-subspace projector closed forms", (
        Param("d", int, 2, "register dimension", lambda x: 2 <= x <= 16, "in [2, 16]"),
        Param("q", int, 1, "number l of psi copies next to phi", lambda x: 1 <= x <= 7, "in [1, 7]"),
    ), _run_symsub),
)}


def validate_config(config: ExperimentConfig) -> dict:
    """Fill defaults and check every parameter against the experiment schema.

    Raises:
        SchemaError: unknown experiment, unknown parameter or invalid value.
    """
    exp = EXPERIMENTS.get(config.experiment)
    if exp is None:
        raise SchemaError(f"unknown experiment {config.experiment!r}; choose from {', '.join(EXPERIMENTS)}",
                          "experiment")
    if config.format not in ("json", "csv"):
        raise SchemaError(f"format must be json or csv, got {config.format!r}", "format")
    if not isinstance(config.seed, int) or config.seed < 0:
        raise SchemaError("seed must be a non-negative integer", "seed")
    known = {p.name for p in exp.params}
    extra = set(config.params) - known
    if extra:
        raise SchemaError(f"{config.experiment} does not take {sorted(extra)}", sorted(extra)[0])
    resolved = {}
    for p in exp.params:
        value = config.params.get(p.name)
        if value is None:
            value = p.default
        if p.type is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, p.type) or (p.type is int and isinstance(value, bool)):
            raise SchemaError(f"{p.name} must be {p.type.__name__}", p.name)
        if p.choices is not None and value not in p.choices:
            raise SchemaError(f"{p.name} must be one of {p.choices}", p.name)
        if p.check is not None and not p.check(value):
            raise SchemaError(f"{p.name} must be {p.rule}, got {value!r}", p.name)
        resolved[p.name] = value
    return resolved


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Validate, run, and (when ``config.out`` is set) write the report."""
    params = validate_config(config)
    exp = EXPERIMENTS[config.experiment]
    start = time.perf_counter()
    metrics, records = exp.runner(params, config.seed)
    report = ExperimentReport(config.experiment, _round(params), config.seed, _round(metrics),
                              _round(records), round(time.perf_counter() - start, 3))
    if config.out:
        write_report(report, config.format, config.out)
    return report


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def write_report(report: ExperimentReport, fmt: str, path: str) -> None:
    """Write ``report`` as one JSON object or as CSV rows plus a summary row.

    Raises:
        SchemaError: unknown format.
        ReportIOError: the file could not be written.
    """
    if fmt not in ("json", "csv"):
        raise SchemaError(f"format must be json or csv, got {fmt!r}", "format")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "json":
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
                return
            record_cols: list[str] = []
            for rec in report.records:
                record_cols += [k for k in rec if k not in record_cols]
            metric_cols = [k for k in report.metrics if k not in record_cols]
            writer = csv.writer(fh)
            writer.writerow(["row_type"] + record_cols + metric_cols)
            for rec in report.records:
                writer.writerow(["trial"] + [_csv_value(rec.get(k)) for k in record_cols] + [""] * len(metric_cols))
            writer.writerow(["summary"] + [_csv_value(report.metrics.get(k)) for k in record_cols]
                            + [_csv_value(report.metrics[k]) for k in metric_cols])
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_report(path: str) -> dict:
    """Load a JSON report."""
    with open(path) as fh:
        return json.load(fh)


__all__ = [
    "EXPERIMENTS", "Experiment", "ExperimentConfig", "ExperimentReport", "Param", "ReportIOError",
    "SchemaError", "read_report", "run_experiment", "validate_config", "write_report",
]
