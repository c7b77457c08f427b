"""One-way puzzle from classical shadows of common Haar random states.

The sampler picks a key bit per size ``l``, twists ``|psi_l>`` by ``Z`` on
qubit 0 when the bit is set, and publishes a classical shadow of the twisted
state. The verifier reads the exact family states (it is deliberately not
sample-efficient) and checks that enough twisted-fidelity estimates exceed
the threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .haar import ChrsFamily
from .linalg import PureState
from .rng import RngLike, RngStream, as_generator, child_seed
from .stats import wilson_interval
from .shadows import ClassicalShadow, default_batches, shadow_estimate_observable, shadow_gen

DEFAULT_SHOTS = 10000


@dataclass(frozen=True)
class OwpParams:
    """Puzzle parameters.

    Attributes:
        n: security parameter.
        shots_per_ell: copies of each family state measured by the sampler.
        accept_threshold: an index counts when its estimate exceeds this.
        accept_count_fraction: fraction of indices that must count.
        ell_range: inclusive size range, ``(n, 2n)`` when omitted.
        n_batches: median-of-means batch count used by the verifier.
    """

    n: int
    shots_per_ell: int = DEFAULT_SHOTS
    accept_threshold: float = 0.5
    accept_count_fraction: float = 0.75
    ell_range: tuple[int, int] | None = None
    n_batches: int = field(default_factory=lambda: default_batches(0.1, 2))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < self.accept_threshold < 1:
            raise ValueError("accept_threshold must lie in (0, 1)")
        if not 0 < self.accept_count_fraction <= 1:
            raise ValueError("accept_count_fraction must lie in (0, 1]")
        if self.shots_per_ell < 1 or self.n_batches < 1:
            raise ValueError("shots_per_ell and n_batches must be positive")
        if self.ell_range is None:
            object.__setattr__(self, "ell_range", (self.n, 2 * self.n))
        lo, hi = self.ell_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad ell_range {self.ell_range}")

    @property
    def ells(self) -> range:
        return range(self.ell_range[0], self.ell_range[1] + 1)

    @property
    def required_count(self) -> int:
        """Indices that must pass, counted against the full index range."""
        return math.ceil(self.accept_count_fraction * len(self.ells) - 1e-12)


@dataclass(eq=False)
class Puzzle:
    """Key bits (one per size, lowest size first) and per-size shadows."""

    n: int
    key: str
    shadows: dict[int, ClassicalShadow]

    def __post_init__(self):
        if set(self.key) - {"0", "1"}:
            raise ValueError(f"key must be a bitstring, got {self.key!r}")
        if len(self.key) != len(self.shadows):
            raise ValueError("key length must equal the number of shadow indices")
        for ell, shadow in self.shadows.items():
            if shadow.n != ell:
                raise ValueError(f"shadow for size {ell} has {shadow.n} qubits")

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "key": self.key,
            "shadows": {str(ell): s.to_records() for ell, s in sorted(self.shadows.items())},
        })

    @classmethod
    def from_json(cls, text: str) -> "Puzzle":
        obj = json.loads(text)
        shadows = {int(ell): ClassicalShadow.from_records(int(ell), recs) for ell, recs in obj["shadows"].items()}
        return cls(int(obj["n"]), obj["key"], dict(sorted(shadows.items())))


def z1_twist(state: PureState, bit: int) -> PureState:
    """``Z`` on qubit 0 (the most significant) when ``bit`` is 1."""
    if not bit:
        return state
    amps = state.amplitudes.copy()
    amps[amps.shape[0] // 2:] *= -1
    return PureState(amps)


def owp_samp(family: ChrsFamily, params: OwpParams, rng: RngLike = None) -> Puzzle:
    """Sample a uniformly random key and the shadows of the twisted states."""
    lo, hi = params.ell_range
    if lo < family.ell_range[0] or hi > family.ell_range[1]:
        raise ValueError(f"family range {family.ell_range} does not cover {params.ell_range}")
    gen = as_generator(rng)
    bits = gen.integers(0, 2, size=len(params.ells))
    shadows = {}
    for bit, ell in zip(bits, params.ells):
        psi = family.state(ell)
        family.record_queries(params.shots_per_ell)
        shadows[ell] = shadow_gen(z1_twist(psi, int(bit)), params.shots_per_ell, gen)
    return Puzzle(params.n, "".join(str(int(b)) for b in bits), shadows)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    passing: int = 0
    required: int = 0
    estimates: dict = field(default_factory=dict)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted


def owp_ver(family: ChrsFamily, key: str, shadows: Mapping[int, ClassicalShadow], params: OwpParams) -> Verdict:
    """Accept iff enough twisted-fidelity estimates exceed the threshold.

    Malformed inputs are rejected with a diagnostic rather than raising.
    """
    ells = list(params.ells)
    if len(key) != len(ells) or set(key) - {"0", "1"}:
        return Verdict(False, required=params.required_count, reason=f"key must be {len(ells)} bits")
    if sorted(shadows) != ells:
        return Verdict(False, required=params.required_count, reason="shadow indices do not match ell_range")
    estimates = {}
    for bit, ell in zip(key, ells):
        shadow = shadows[ell]
        if len(shadow) == 0:
            return Verdict(False, required=params.required_count, reason=f"empty shadow for size {ell}")
        if shadow.n != ell:
            return Verdict(False, required=params.required_count, reason=f"shadow for size {ell} has wrong qubit count")
        target = z1_twist(family.state(ell), int(bit))
        estimates[ell] = shadow_estimate_observable(shadow, target, min(params.n_batches, len(shadow)))
    passing = sum(v > params.accept_threshold for v in estimates.values())
    return Verdict(passing >= params.required_count, passing, params.required_count, estimates)


ADVERSARIES = ("random-guess", "shadow-mle", "all-zeros", "honest")


def _x1_expectation(shadow: ClassicalShadow, n_batches: int) -> float:
    return shadow_estimate_observable(shadow, "X" + "I" * (shadow.n - 1), min(n_batches, len(shadow)))


def owp_no_sample_adversary(shadows: Mapping[int, ClassicalShadow], strategy: str,
                            rng: RngLike = None, n_batches: int = 8) -> str:
    """Guess a key from the puzzle alone, without any copies of the family states.

    Args:
        shadows: the published per-size shadows.
        strategy: ``random-guess`` draws a uniform key; ``shadow-mle`` sets bit
            ``l`` to 1 when the shadow estimate of ``X`` on qubit 0 is negative
            (the twist flips that sign); ``all-zeros`` always answers zeros.
        rng: randomness for ``random-guess``.
        n_batches: batches for the ``shadow-mle`` estimates.

    Returns:
        The guessed key, lowest size first.
    """
    ells = sorted(shadows)
    if strategy == "random-guess":
        return "".join(str(b) for b in as_generator(rng).integers(0, 2, size=len(ells)))
    if strategy == "shadow-mle":
        return "".join("1" if _x1_expectation(shadows[ell], n_batches) < 0 else "0" for ell in ells)
    if strategy == "all-zeros":
        return "0" * len(ells)
    raise ValueError(f"unknown no-sample strategy {strategy!r}")


def owp_security_experiment(n: int, trials: int, adversary: str, seed: int,
                            params: OwpParams | None = None,
                            on_trial: Callable[[dict], None] | None = None) -> dict:
    """Run fresh-family sample / attack / verify loops.

    Trial ``i`` draws all of its randomness from stream ``i`` of ``seed``.
    The ``honest`` adversary replays the sampled key, which measures
    correctness rather than security.

    Returns:
        ``{"success_rate", "ci_low", "ci_high", "successes", "trials", "records"}``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if adversary not in ADVERSARIES:
        raise ValueError(f"unknown adversary {adversary!r}; choose from {ADVERSARIES}")
    params = params or OwpParams(n)
    records = []
    for trial in range(trials):
        gen = RngStream(seed, trial).generator()
        family = ChrsFamily(child_seed(gen), params.ell_range)
        puzzle = owp_samp(family, params, gen)
        if adversary == "honest":
            guess = puzzle.key
        else:
            guess = owp_no_sample_adversary(puzzle.shadows, adversary, gen, params.n_batches)
        verdict = owp_ver(family, guess, puzzle.shadows, params)
        rec = {
            "trial": trial,
            "success": int(verdict.accepted),
            "passing": verdict.passing,
            "key_matches": sum(a == b for a, b in zip(guess, puzzle.key)),
        }
        records.append(rec)
        if on_trial:
            on_trial(rec)
    successes = sum(r["success"] for r in records)
    low, high = wilson_interval(successes, trials)
    return {
        "success_rate": successes / trials,
        "ci_low": low,
        "ci_high": high,
        "successes": successes,
        "trials": trials,
        "records": records,
    }
