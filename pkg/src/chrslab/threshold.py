"""Threshold search and the key-recovery attack on state generators.

Threshold search repeatedly picks a random two-outcome test, runs it on a
handful of fresh copies of the unknown state and stops once the empirical
accept fraction reaches ``theta``. Against a state generator with an
efficient verifier the tests are ``Pi_k``: accept iff many parallel
verifier runs on copies of the challenge state all accept.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Protocol, Sequence, Union

import numpy as np

from . import resources
from .haar import ChrsFamily
from .linalg import DensityMatrix, MeasurementEffect, PureState
from .rng import RngLike, RngStream, as_generator, child_seed
from .stats import wilson_interval

State = Union[PureState, DensityMatrix]


class BinaryTest(Protocol):
    def accept_probability(self, copy) -> float: ...


def _accept(test, copy) -> float:
    if isinstance(test, MeasurementEffect):
        return test.accept_probability(copy)
    return float(test.accept_probability(copy))


def default_copies_per_test(m: int) -> int:
    """``ceil(log2(m)^2)``, at least 1."""
    return max(1, math.ceil(math.log2(m) ** 2)) if m > 1 else 1


class CopySupplier:
    """Hands out fresh copies of one fixed state and counts them."""

    def __init__(self, state):
        self._state = state
        self.issued = 0

    def __call__(self, count: int) -> list:
        self.issued += count
        return [self._state] * count


@dataclass
class ThresholdInstance:
    """Tests ``M_i``, a source of copies of ``rho`` and the threshold.

    Attributes:
        tests: one test per index; each is a :class:`MeasurementEffect` or has
            ``accept_probability(copy)``.
        state_supplier: ``supplier(c)`` returns ``c`` fresh copies.
        theta: accept-fraction threshold in ``[0.4, 0.6]``.
        copies_per_test: copies measured per round, ``ceil(log2(m)^2)`` by default.
    """

    tests: Sequence
    state_supplier: Callable[[int], list]
    theta: float = 0.5
    copies_per_test: int | None = None

    def __post_init__(self):
        if not 0.4 <= self.theta <= 0.6:
            raise ValueError(f"theta must lie in [0.4, 0.6], got {self.theta}")
        if not self.tests:
            raise ValueError("need at least one test")
        if self.copies_per_test is None:
            self.copies_per_test = default_copies_per_test(len(self.tests))
        if self.copies_per_test < 1:
            raise ValueError("copies_per_test must be positive")

    @property
    def m(self) -> int:
        return len(self.tests)


@dataclass(frozen=True)
class SearchResult:
    index: int | None
    rounds: int
    copies_used: int

    @property
    def found(self) -> bool:
        return self.index is not None


def _threshold_projector(effect: np.ndarray, copies: int, need: int) -> np.ndarray:
    """Projector onto ``at least need`` accepts among ``copies`` runs of ``effect``."""
    d = effect.shape[0]
    resources.guard(d ** (2 * copies), what="coherent threshold projector")
    rej = np.eye(d) - effect
    total = np.zeros((d**copies, d**copies), dtype=complex)
    for pattern in itertools.product((0, 1), repeat=copies):
        if sum(pattern) >= need:
            term = np.ones((1, 1), dtype=complex)
            for bit in pattern:
                term = np.kron(term, effect if bit else rej)
            total += term
    return total


def threshold_search(instance: ThresholdInstance, rng: RngLike = None, mode: str = "fresh",
                     max_rounds: int | None = None) -> SearchResult:
    """Search for a test whose accept fraction reaches ``theta``.

    Args:
        instance: the tests, copy source and threshold.
        rng: randomness for index choice and measurement outcomes.
        mode: ``fresh`` measures new copies each round; ``coherent`` measures
            the Hamming-threshold projector on one joint register of copies and
            keeps the collapsed register after a reject (tiny sizes only).
        max_rounds: round cap, ``10 m`` by default.

    Returns:
        The accepted index, or ``None`` once the cap is reached.
    """
    gen = as_generator(rng)
    m, c = instance.m, instance.copies_per_test
    cap = 10 * m if max_rounds is None else max_rounds
    need = math.ceil(instance.theta * c - 1e-12)
    if mode == "fresh":
        used = 0
        for rnd in range(1, cap + 1):
            i = int(gen.integers(m))
            copies = instance.state_supplier(c)
            used += c
            probs = np.array([_accept(instance.tests[i], cp) for cp in copies])
            if (gen.random(c) < probs).sum() >= need:
                return SearchResult(i, rnd, used)
        return SearchResult(None, cap, used)
    if mode != "coherent":
        raise ValueError(f"unknown mode {mode!r}")
    effects = []
    for t in instance.tests:
        if not isinstance(t, MeasurementEffect) or not t.is_projector:
            raise ValueError("coherent mode needs projector MeasurementEffect tests")
        effects.append(t.operator)
    copies = instance.state_supplier(c)
    if not all(isinstance(cp, PureState) for cp in copies):
        raise ValueError("coherent mode needs pure-state copies")
    joint = np.ones(1, dtype=complex)
    for cp in copies:
        joint = np.kron(joint, cp.amplitudes)
    projectors: dict[int, np.ndarray] = {}
    for rnd in range(1, cap + 1):
        i = int(gen.integers(m))
        if i not in projectors:
            projectors[i] = _threshold_projector(effects[i], c, need)
        accepted = projectors[i] @ joint
        p = float(np.vdot(accepted, accepted).real)
        if gen.random() < p:
            return SearchResult(i, rnd, c)
        rest = joint - accepted
        joint = rest / np.linalg.norm(rest)
    return SearchResult(None, cap, c)


# -- toy state generator -----------------------------------------------------


def z_string(n: int, key: str) -> np.ndarray:
    """Diagonal of ``Z^{k_0} (x) ... (x) Z^{k_{n-1}}``."""
    x = np.arange(2**n)
    mask = int(key, 2)
    parity = np.array([bin(v & mask).count("1") & 1 for v in x])
    return 1 - 2 * parity


class ToyVerifier:
    """Projective check of ``P_k |psi>`` with ``|psi>`` read from the family.

    The object never stores a key; callers name the key they want checked.
    """

    def __init__(self, n: int, family: ChrsFamily):
        self.n = n
        self._family = family

    def expected_state(self, key: str) -> np.ndarray:
        psi = self._family.state(self.n).amplitudes
        return z_string(self.n, key) * psi

    def accept_probability(self, key: str, rho: State) -> float:
        v = self.expected_state(key)
        if isinstance(rho, PureState):
            return float(min(1.0, abs(np.vdot(v, rho.amplitudes)) ** 2))
        return float(np.clip(np.vdot(v, rho.matrix @ v).real, 0.0, 1.0))

    def effect(self, key: str) -> MeasurementEffect:
        return MeasurementEffect.projector_onto(self.expected_state(key))


@dataclass
class ToyOwsg:
    """``StateGen(k) = P_k |psi_n>`` with ``P_k`` a Z string (optionally depolarized)."""

    n: int
    family: ChrsFamily
    variant: str = "pauli"
    depolarizing: float = 0.05
    verifier: ToyVerifier = field(init=False)

    def __post_init__(self):
        self.verifier = ToyVerifier(self.n, self.family)

    @property
    def keys(self) -> list[str]:
        return ["".join(bits) for bits in itertools.product("01", repeat=self.n)]

    def key_gen(self, rng: RngLike = None) -> str:
        return "".join(str(b) for b in as_generator(rng).integers(0, 2, size=self.n))

    def state_gen(self, key: str) -> State:
        vec = self.verifier.expected_state(key)
        if self.variant == "pauli":
            return PureState(vec)
        d = vec.shape[0]
        rho = (1 - self.depolarizing) * np.outer(vec, vec.conj()) + self.depolarizing * np.eye(d) / d
        return DensityMatrix(rho)


def toy_owsg_chrs(n: int, family: ChrsFamily, variant: str = "pauli") -> ToyOwsg:
    """Toy state generator on top of the family state of size ``n``."""
    if not 1 <= n <= 4:
        raise ValueError("toy generator supports 1 <= n <= 4")
    if variant not in ("pauli", "pauli-mixed"):
        raise ValueError(f"unknown variant {variant!r}")
    return ToyOwsg(n, family, variant)


@dataclass(frozen=True)
class ProductCopy:
    """``reps`` copies of one state, consumed together by a ``Pi_k`` test."""

    state: State
    reps: int


def poisson_binomial_tail(probs: Sequence[float], at_least: int) -> float:
    """``P(sum of independent Bernoulli(p_j) >= at_least)``."""
    dist = np.zeros(len(probs) + 1)
    dist[0] = 1.0
    for p in probs:
        dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
        dist[0] *= 1 - p
    return float(dist[at_least:].sum())


class PiK:
    """Accept iff the verifier accepts on all (or at least half) of ``reps`` copies."""

    def __init__(self, verifier: ToyVerifier, key: str, repetitions: int, rule: str = "all"):
        if repetitions < 1:
            raise ValueError("repetitions must be positive")
        if rule not in ("all", "hamming"):
            raise ValueError(f"unknown rule {rule!r}")
        self.verifier = verifier
        self.key = key
        self.repetitions = repetitions
        self.rule = rule

    def accept_probability(self, copy: ProductCopy) -> float:
        if copy.reps != self.repetitions:
            raise ValueError("copy does not hold the expected number of repetitions")
        p = self.verifier.accept_probability(self.key, copy.state)
        if self.rule == "all":
            return p**self.repetitions
        return poisson_binomial_tail([p] * self.repetitions, math.ceil(self.repetitions / 2))


def build_pi_k(verifier: ToyVerifier, k: str, repetitions: int, rule: str = "all") -> PiK:
    """Test accepting iff ``repetitions`` parallel verifier runs all accept.

    ``rule="hamming"`` instead accepts when at least half of the runs accept.
    """
    return PiK(verifier, k, repetitions, rule)


def claim_min_run_probability(reps: int, target: Fraction = Fraction(1, 3)) -> float:
    """Smallest per-run probability ``p`` with ``p^reps >= target``."""
    return float(target) ** (1 / reps)


def claim_implication_holds(p: Fraction, lam: int) -> bool:
    """Check ``p^(10 lam) >= 1/3  =>  p >= 1 - 1/(5 lam)`` in exact arithmetic."""
    p = Fraction(p)
    return not (p ** (10 * lam) >= Fraction(1, 3)) or p >= 1 - Fraction(1, 5 * lam)


def owsg_attack(supplier: CopySupplier, verifier: ToyVerifier, keys: Sequence[str], lam: int,
                rng: RngLike = None, theta: float = 0.5, copies_per_test: int | None = None,
                rule: str = "all") -> tuple[str | None, SearchResult]:
    """Recover an accepting key from copies of the challenge state.

    The attack sees only the copy source, the public verifier and the key
    space.
    """
    reps = 10 * lam
    tests = [build_pi_k(verifier, k, reps, rule) for k in keys]
    instance = ThresholdInstance(tests, lambda c: [ProductCopy(s, reps) for s in supplier(c * reps)[::reps]],
                                 theta, copies_per_test)
    result = threshold_search(instance, rng)
    return (keys[result.index] if result.found else None), result


def owsg_attack_experiment(n: int, lam: int, trials: int, seed: int, variant: str = "pauli",
                           theta: float = 0.5, copies_per_test: int | None = None,
                           reverify_shots: int = 1000, degenerate: bool = False) -> dict:
    """Break the toy generator: sample ``k'``, attack, re-verify the returned key.

    A trial succeeds when the returned key's exact verifier accept probability
    on ``rho_{k'}`` is at least ``1 - 1/(5 lam)``. With ``degenerate`` every key
    maps to the same state (sanity path).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    bound = 1 - 1 / (5 * lam)
    records = []
    for trial in range(trials):
        gen = RngStream(seed, trial).generator()
        family = ChrsFamily(child_seed(gen), (n, n))
        owsg = toy_owsg_chrs(n, family, variant)
        secret = owsg.key_gen(gen)
        challenge = owsg.state_gen("0" * n if degenerate else secret)
        verifier = owsg.verifier
        if degenerate:
            verifier = _DegenerateVerifier(verifier)
        supplier = CopySupplier(challenge)
        key, result = owsg_attack(supplier, verifier, owsg.keys, lam, gen, theta, copies_per_test)
        p_exact = verifier.accept_probability(key, challenge) if key is not None else 0.0
        empirical = float((gen.random(reverify_shots) < p_exact).mean()) if key is not None else 0.0
        records.append({
            "trial": trial,
            "found": int(key is not None),
            "correct_key": int(key == secret),
            "reverify_exact": p_exact,
            "reverify_empirical": empirical,
            "success": int(key is not None and p_exact >= bound),
            "rounds": result.rounds,
            "copies_used": supplier.issued,
        })
    successes = sum(r["success"] for r in records)
    low, high = wilson_interval(successes, trials)
    return {
        "success_rate": successes / trials,
        "ci_low": low,
        "ci_high": high,
        "bound": bound,
        "mean_reverify": float(np.mean([r["reverify_exact"] for r in records])),
        "records": records,
    }


class _DegenerateVerifier:
    """Verifier for the generator that ignores its key."""

    def __init__(self, inner: ToyVerifier):
        self._inner = inner

    def accept_probability(self, key: str, rho: State) -> float:
        return self._inner.accept_probability("0" * self._inner.n, rho)


def planted_instance(m: int = 8, planted: int = 0, p_planted: float = 0.8, p_background: float = 0.1,
                     theta: float = 0.5, copies_per_test: int | None = None) -> ThresholdInstance:
    """Qubit instance with one test accepting ``rho`` with ``p_planted``, the rest ``p_background``.

    ``rho = |0><0|`` and test ``i`` projects onto ``cos a_i |0> + sin a_i |1>``.
    """
    if not 0 <= planted < m:
        raise ValueError("planted index out of range")
    tests = []
    for i in range(m):
        p = p_planted if i == planted else p_background
        v = np.array([math.sqrt(p), math.sqrt(1 - p)], dtype=complex)
        tests.append(MeasurementEffect.projector_onto(v))
    return ThresholdInstance(tests, CopySupplier(PureState.basis(0, 2)), theta, copies_per_test)


def threshold_search_experiment(runs: int, seed: int, m: int = 8, theta: float = 0.5,
                                copies_per_test: int | None = 9, reverify_shots: int = 1000) -> dict:
    """Planted-instance search; reports how often the planted index comes back."""
    records = []
    for run in range(runs):
        gen = RngStream(seed, run).generator()
        planted = int(gen.integers(m))
        inst = planted_instance(m, planted, theta=theta, copies_per_test=copies_per_test)
        result = threshold_search(inst, gen)
        if result.found:
            p = inst.tests[result.index].accept_probability(PureState.basis(0, 2))
            remeasured = float((gen.random(reverify_shots) < p).mean())
        else:
            remeasured = None
        records.append({
            "run": run,
            "found": int(result.found),
            "planted_found": int(result.index == planted),
            "remeasured": remeasured,
            "reverified": int(result.found and remeasured >= 1 / 3 - 0.1),
            "rounds": result.rounds,
        })
    found = [r for r in records if r["found"]]
    return {
        "planted_rate": sum(r["planted_found"] for r in records) / runs,
        "found_rate": len(found) / runs,
        "reverify_rate": (sum(r["reverified"] for r in found) / len(found)) if found else 0.0,
        "records": records,
    }
