"""Coarse-grained descriptions: sector decoherence, rate equations,
time-ordered history probabilities, and deviant-branch weights.

History probabilities use the two-sided projected form
trace(P_k ... P_1 rho P_1 ... P_k) with Heisenberg-picture projectors; the
single-sided trace that this form reduces to for exactly consistent sets is
exposed separately for comparison.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .dynamics import Hamiltonian, propagator
from .errors import SpaceMismatchError, ValidationError, VALIDITY_ATOL
from .hilbert import DensityOperator, StateVector, TensorSpace


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Exhaustive family of mutually orthogonal projectors."""

    space: TensorSpace
    projectors: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        d = self.space.total_dim
        mats = []
        for p in self.projectors:
            p = np.array(p, dtype=np.complex128, copy=True)
            if p.shape != (d, d):
                raise SpaceMismatchError(f"projector shape {p.shape} for dimension {d}")
            if np.abs(p - p.conj().T).max() > VALIDITY_ATOL:
                raise ValidationError("projector is not Hermitian")
            if np.abs(p @ p - p).max() > VALIDITY_ATOL:
                raise ValidationError("projector is not idempotent")
            p.setflags(write=False)
            mats.append(p)
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                if np.abs(mats[i] @ mats[j]).max() > VALIDITY_ATOL:
                    raise ValidationError(f"projectors {i} and {j} are not orthogonal")
        total = sum(mats)
        if np.abs(total - np.eye(d)).max() > VALIDITY_ATOL:
            raise ValidationError("projectors do not resolve the identity")
        labels = self.labels
        if labels is None:
            labels = tuple(str(i) for i in range(len(mats)))
        if len(labels) != len(mats):
            raise ValidationError("one label per projector required")
        object.__setattr__(self, "projectors", tuple(mats))
        object.__setattr__(self, "labels", tuple(str(l) for l in labels))

    def __len__(self) -> int:
        return len(self.projectors)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.projectors[i]

    def union(self, indices: Sequence[int]) -> np.ndarray:
        out = np.zeros_like(self.projectors[0])
        for i in indices:
            out = out + self.projectors[i]
        return out

    @classmethod
    def from_basis(cls, basis: Sequence[StateVector], labels=None) -> ProjectorSet:
        space = basis[0].space
        mats = tuple(np.outer(b.amplitudes, b.amplitudes.conj()) for b in basis)
        return cls(space, mats, labels=tuple(labels) if labels is not None else None)

    @classmethod
    def from_index_blocks(cls, space: TensorSpace, blocks, labels=None) -> ProjectorSet:
        d = space.total_dim
        mats = []
        for block in blocks:
            p = np.zeros((d, d), dtype=np.complex128)
            for i in block:
                p[int(i), int(i)] = 1.0
            mats.append(p)
        return cls(space, tuple(mats), labels=tuple(labels) if labels is not None else None)


def decohere_projectors(rho: DensityOperator, pset: ProjectorSet) -> DensityOperator:
    """Keep each sector, drop all cross terms: sum of P rho P."""
    if rho.space != pset.space:
        raise SpaceMismatchError("state and projectors live on different spaces")
    out = np.zeros_like(rho.matrix)
    for p in pset.projectors:
        out = out + p @ rho.matrix @ p
    return DensityOperator(rho.space, out)


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Nonnegative transition rates with zero diagonal, in 1/time."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.array(self.matrix, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"rate matrix must be square, got {a.shape}")
        if a.min() < 0.0:
            raise ValidationError(f"negative rate {a.min()}")
        if np.abs(np.diag(a)).max() > 0.0:
            raise ValidationError("rate matrix diagonal must be zero")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def generator(self) -> np.ndarray:
        """Linear generator of dp_n/dt = sum_m A_nm (p_m - p_n)."""
        return self.matrix - np.diag(self.matrix.sum(axis=1))


def pauli_master_evolve(p0, rates: RateMatrix, t: float) -> np.ndarray:
    """Propagate occupation probabilities by the exact matrix exponential.

    The gain/loss form conserves total probability only when each index
    has equal row and column rate sums; anything else is rejected because
    the result would leave the simplex.  Negative times are rejected: the
    equation is not time-reversal invariant.
    """
    p = np.asarray(p0, dtype=np.float64).reshape(-1)
    if p.size != rates.size:
        raise SpaceMismatchError(f"{p.size} probabilities for {rates.size} states")
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > VALIDITY_ATOL:
        raise ValidationError("initial occupations are not a probability distribution")
    if t < 0.0:
        raise ValidationError("negative time rejected for the rate equation")
    a = rates.matrix
    imbalance = np.abs(a.sum(axis=0) - a.sum(axis=1)).max()
    if imbalance > 1e-12:
        raise ValidationError(
            "rate matrix row and column sums differ; the gain/loss form "
            f"would not conserve probability (imbalance {imbalance:.3e})"
        )
    return expm(rates.generator() * float(t)) @ p


@dataclass(frozen=True, eq=False)
class HistorySpec:
    """Initial state, Hamiltonian, and one projector family per time slice."""

    hamiltonian: Hamiltonian
    initial_state: DensityOperator
    times: tuple[float, ...]
    projector_sets: tuple[ProjectorSet, ...]
    t0: float = 0.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) != len(self.projector_sets):
            raise ValidationError("one projector family per time slice required")
        if not times:
            raise ValidationError("at least one time slice required")
        prev = float(self.t0)
        for t in times:
            if t <= prev:
                raise ValidationError(f"slice times must increase strictly after t0, got {times}")
            prev = t
        space = self.initial_state.space
        if self.hamiltonian.space != space:
            raise SpaceMismatchError("Hamiltonian lives off the state space")
        for pset in self.projector_sets:
            if pset.space != space:
                raise SpaceMismatchError("projector family lives off the state space")
        object.__setattr__(self, "times", times)

    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.projector_sets)

    def heisenberg_projectors(self, slice_index: int, matrix: np.ndarray) -> np.ndarray:
        u = propagator(self.hamiltonian, self.times[slice_index] - self.t0)
        return u.conj().T @ matrix @ u


def _chain_probability(spec: HistorySpec, mats: Sequence[np.ndarray]) -> float:
    chain = None
    for i, m in enumerate(mats):
        ph = spec.heisenberg_projectors(i, m)
        chain = ph if chain is None else ph @ chain
    rho = spec.initial_state.matrix
    val = np.trace(chain @ rho @ chain.conj().T)
    return float(val.real)


def history_probability(spec: HistorySpec, history: Sequence[int]) -> float:
    """Two-sided projected probability of one outcome sequence."""
    counts = spec.outcome_counts()
    if len(history) != len(counts):
        raise ValidationError(f"history length {len(history)} for {len(counts)} slices")
    mats = []
    for i, n in enumerate(history):
        n = int(n)
        if not 0 <= n < counts[i]:
            raise ValidationError(f"outcome {n} out of range at slice {i}")
        mats.append(spec.projector_sets[i][n])
    return _chain_probability(spec, mats)


def history_trace_single_sided(spec: HistorySpec, history: Sequence[int]) -> complex:
    """Raw trace(P_k ... P_1 rho); complex unless the family decoheres."""
    counts = spec.outcome_counts()
    if len(history) != len(counts):
        raise ValidationError(f"history length {len(history)} for {len(counts)} slices")
    chain = None
    for i, n in enumerate(history):
        ph = spec.heisenberg_projectors(i, spec.projector_sets[i][int(n)])
        chain = ph if chain is None else ph @ chain
    return complex(np.trace(chain @ spec.initial_state.matrix))


def enumerate_histories(spec: HistorySpec):
    """All outcome tuples in lexicographic order."""
    return itertools.product(*(range(n) for n in spec.outcome_counts()))


def consistency_defect(spec: HistorySpec) -> float:
    """Worst additivity failure over coarse-grainings.

    For every slice, every union of two or more outcomes there, and every
    assignment of outcomes to the other slices, compares the probability of
    the union against the sum over its members.  Zero certifies that the
    family's probabilities obey the classical sum rule.
    """
    counts = spec.outcome_counts()
    k = len(counts)
    worst = 0.0
    for i in range(k):
        others = [range(counts[j]) for j in range(k) if j != i]
        subsets = []
        for r in range(2, counts[i] + 1):
            subsets.extend(itertools.combinations(range(counts[i]), r))
        for subset in subsets:
            union = spec.projector_sets[i].union(subset)
            for ctx in itertools.product(*others):
                mats_union = []
                ctx_iter = iter(ctx)
                for j in range(k):
                    if j == i:
                        mats_union.append(union)
                    else:
                        mats_union.append(spec.projector_sets[j][next(ctx_iter)])
                p_union = _chain_probability(spec, mats_union)
                p_sum = 0.0
                for member in subset:
                    mats = list(mats_union)
                    mats[i] = spec.projector_sets[i][member]
                    p_sum += _chain_probability(spec, mats)
                worst = max(worst, abs(p_union - p_sum))
    return worst


_MULTINOMIAL_TERM_CAP = 2_000_000
_EXACT_N_CAP = 1000


def _binomial_deviant_weight(p1: float, n: int, epsilon: float) -> float:
    ks = np.arange(n + 1)
    deviant = np.abs(ks / n - p1) >= epsilon
    if not deviant.any():
        return 0.0
    if p1 == 0.0 or p1 == 1.0:
        certain = int(round(n * p1))
        return float(abs(certain / n - p1) >= epsilon)
    if n <= _EXACT_N_CAP:
        total = 0.0
        for k in ks[deviant]:
            total += math.comb(n, int(k)) * p1 ** int(k) * (1.0 - p1) ** int(n - k)
        return float(total)
    logs = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(k + 1) + math.lgamma(n - k + 1) for k in ks[deviant]])
        + ks[deviant] * math.log(p1)
        + (n - ks[deviant]) * math.log1p(-p1)
    )
    peak = logs.max()
    return float(math.exp(peak) * np.exp(logs - peak).sum())


def graham_deviant_norm(born_p, n_trials: int, epsilon: float) -> float:
    """Total weight of branches with deviant relative frequencies.

    A length-``n_trials`` outcome sequence is deviant when any outcome's
    relative frequency differs from its squared amplitude by ``epsilon``
    or more.  The weight of a branch is the multinomial coefficient times
    the product of squared amplitudes, so the result equals the exact
    binomial (or multinomial) tail probability.  It vanishes as n_trials
    grows: branches that would contradict the squared-amplitude statistics
    carry no weight in the limit.
    """
    p = np.asarray(born_p, dtype=np.float64).reshape(-1)
    if p.size < 2:
        raise ValidationError("need at least two outcomes")
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-10:
        raise ValidationError("born_p is not a probability distribution")
    n = int(n_trials)
    if n < 1:
        raise ValidationError("n_trials must be at least 1")
    eps = float(epsilon)
    if eps <= 0.0:
        raise ValidationError("epsilon must be positive")
    if eps > 1.0:
        return 0.0
    p = np.clip(p, 0.0, 1.0)
    if p.size == 2:
        return _binomial_deviant_weight(float(p[0]), n, eps)
    m = p.size
    if math.comb(n + m - 1, m - 1) > _MULTINOMIAL_TERM_CAP:
        raise ValidationError(
            "multinomial enumeration too large; reduce n_trials or outcome count"
        )
    log_p = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    total = 0.0
    lg_n = math.lgamma(n + 1)
    for counts in _compositions(n, m):
        counts_arr = np.array(counts, dtype=np.float64)
        if np.abs(counts_arr / n - p).max() < eps:
            continue
        if any(c > 0 and p[i] == 0.0 for i, c in enumerate(counts)):
            continue
        log_w = lg_n - sum(math.lgamma(c + 1) for c in counts) + float((counts_arr * log_p).sum())
        total += math.exp(log_w)
    return float(total)


def _compositions(n: int, m: int):
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest
