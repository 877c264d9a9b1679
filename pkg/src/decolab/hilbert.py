"""State vectors, density operators, and observables on labeled tensor spaces.

Subsystems are declared as an ordered list of (label, dimension) pairs.  The
flattened index runs row-major over that order, first-listed subsystem
slowest-varying, so ``basis_state(space, (1, 0))`` on a (2, 3) space sits at
flat index 3.  Global phase is physically irrelevant but is stored as given;
use :func:`ray_equal` for phase-insensitive comparison.

All values are immutable after construction (frozen dataclasses wrapping
read-only arrays) and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import serialize
from .errors import SpaceMismatchError, ValidationError, VALIDITY_ATOL


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TensorSpace:
    """Ordered collection of labeled finite-dimensional subsystems."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        if not subs:
            raise ValidationError("a tensor space needs at least one subsystem")
        labels = [label for label, _ in subs]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"label collision in {labels}")
        for label, dim in subs:
            if dim < 1:
                raise ValidationError(f"subsystem {label!r} has dimension {dim} < 1")
        object.__setattr__(self, "subsystems", subs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        out = 1
        for _, dim in self.subsystems:
            out *= dim
        return out

    def axis(self, label: str) -> int:
        for i, (name, _) in enumerate(self.subsystems):
            if name == label:
                return i
        raise ValidationError(f"unknown label {label!r}; space has {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.subsystems[self.axis(label)][1]

    def subspace(self, labels: Iterable[str]) -> TensorSpace:
        """Subsystems restricted to ``labels``, kept in this space's order."""
        wanted = set(labels)
        for name in wanted:
            self.axis(name)
        return TensorSpace(tuple(s for s in self.subsystems if s[0] in wanted))

    def concat(self, other: TensorSpace) -> TensorSpace:
        return TensorSpace(self.subsystems + other.subsystems)

    def flatten(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.dims))

    def unflatten(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def to_json_obj(self) -> list:
        return [[label, dim] for label, dim in self.subsystems]

    @classmethod
    def from_json_obj(cls, obj) -> TensorSpace:
        return cls(tuple((str(l), int(d)) for l, d in obj))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state; amplitudes indexed by the flattened space convention."""

    space: TensorSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128, copy=True).reshape(-1)
        if amps.size != self.space.total_dim:
            raise SpaceMismatchError(
                f"{amps.size} amplitudes for a space of dimension {self.space.total_dim}"
            )
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValidationError("non-finite amplitude")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, atol: float = VALIDITY_ATOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= atol

    def normalized(self) -> StateVector:
        n = self.norm()
        if n == 0.0:
            raise ValidationError("cannot normalize zero-norm state")
        return StateVector(self.space, self.amplitudes / n)

    def inner(self, other: StateVector) -> complex:
        """<self|other> with conjugation on self."""
        _check_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def ray_equal(self, other: StateVector, atol: float = VALIDITY_ATOL) -> bool:
        """Equality up to global phase."""
        _check_same_space(self.space, other.space)
        na, nb = self.norm(), other.norm()
        if na == 0.0 or nb == 0.0:
            raise ValidationError("ray comparison with a zero-norm state")
        return abs(self.inner(other)) / (na * nb) >= 1.0 - atol

    def density(self) -> DensityOperator:
        a = self.amplitudes
        return DensityOperator(self.space, np.outer(a, a.conj()))

    def to_json_obj(self) -> dict:
        return {
            "space": self.space.to_json_obj(),
            "amplitudes": serialize.complex_pairs(self.amplitudes),
        }

    def to_json(self) -> str:
        return serialize.dumps(self.to_json_obj())

    @classmethod
    def from_json(cls, data) -> StateVector:
        if isinstance(data, str):
            data = json.loads(data)
        return cls(
            TensorSpace.from_json_obj(data["space"]),
            serialize.pairs_to_complex(data["amplitudes"]),
        )


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    space: TensorSpace
    matrix: np.ndarray

    def __post_init__(self):
        d = self.space.total_dim
        mat = np.array(self.matrix, dtype=np.complex128, copy=True)
        if mat.shape != (d, d):
            raise SpaceMismatchError(f"matrix shape {mat.shape} for dimension {d}")
        if not np.all(np.isfinite(mat.view(np.float64))):
            raise ValidationError("non-finite matrix entry")
        herm = np.abs(mat - mat.conj().T).max()
        if herm > VALIDITY_ATOL:
            raise ValidationError(f"matrix is not Hermitian (deviation {herm:.3e})")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > VALIDITY_ATOL:
            raise ValidationError(f"trace is {tr:.15g}, expected 1")
        w = np.linalg.eigvalsh(mat)
        if w.min() < -VALIDITY_ATOL:
            raise ValidationError(f"negative eigenvalue {w.min():.3e}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @classmethod
    def maximally_mixed(cls, space: TensorSpace) -> DensityOperator:
        d = space.total_dim
        return cls(space, np.eye(d, dtype=np.complex128) / d)

    def to_json_obj(self) -> dict:
        return {
            "space": self.space.to_json_obj(),
            "matrix": serialize.matrix_pairs(self.matrix),
        }

    def to_json(self) -> str:
        return serialize.dumps(self.to_json_obj())

    @classmethod
    def from_json(cls, data) -> DensityOperator:
        if isinstance(data, str):
            data = json.loads(data)
        return cls(
            TensorSpace.from_json_obj(data["space"]),
            serialize.pairs_to_matrix(data["matrix"]),
        )


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator, optionally carrying its defining eigensystem."""

    space: TensorSpace
    matrix: np.ndarray
    basis: tuple[StateVector, ...] | None = None
    scale: tuple[float, ...] | None = None

    def __post_init__(self):
        d = self.space.total_dim
        mat = np.array(self.matrix, dtype=np.complex128, copy=True)
        if mat.shape != (d, d):
            raise SpaceMismatchError(f"matrix shape {mat.shape} for dimension {d}")
        herm = np.abs(mat - mat.conj().T).max()
        if herm > VALIDITY_ATOL:
            raise ValidationError(f"observable is not Hermitian (deviation {herm:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def identity(cls, space: TensorSpace) -> Observable:
        return cls(space, np.eye(space.total_dim, dtype=np.complex128))


def _check_same_space(a: TensorSpace, b: TensorSpace) -> None:
    if a != b:
        raise SpaceMismatchError(f"spaces differ: {a.subsystems} vs {b.subsystems}")


def basis_state(space: TensorSpace, index) -> StateVector:
    """Computational basis vector; ``index`` is flat or a per-subsystem tuple."""
    flat = space.flatten(index) if isinstance(index, (tuple, list)) else int(index)
    if not 0 <= flat < space.total_dim:
        raise ValidationError(f"basis index {flat} outside dimension {space.total_dim}")
    amps = np.zeros(space.total_dim, dtype=np.complex128)
    amps[flat] = 1.0
    return StateVector(space, amps)


def computational_basis(space: TensorSpace) -> tuple[StateVector, ...]:
    return tuple(basis_state(space, i) for i in range(space.total_dim))


def random_state(space: TensorSpace, rng: np.random.Generator) -> StateVector:
    """Haar-distributed pure state from a seeded generator."""
    d = space.total_dim
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return StateVector(space, z / np.linalg.norm(z))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Product state on the concatenated space (label collision rejected)."""
    return StateVector(a.space.concat(b.space), np.kron(a.amplitudes, b.amplitudes))


def tensor_many(*states: StateVector) -> StateVector:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def born_probability(n: StateVector, alpha: StateVector) -> float:
    """|<n|alpha>|^2 for normalized arguments."""
    _check_same_space(n.space, alpha.space)
    return float(abs(n.inner(alpha)) ** 2)


def _check_orthonormal_complete(basis: Sequence[StateVector], space: TensorSpace) -> None:
    d = space.total_dim
    if len(basis) != d:
        raise ValidationError(f"{len(basis)} basis vectors for dimension {d}")
    mat = np.column_stack([b.amplitudes for b in basis])
    gram = mat.conj().T @ mat
    dev = np.abs(gram - np.eye(d)).max()
    if dev > VALIDITY_ATOL:
        raise ValidationError(f"basis is not orthonormal (deviation {dev:.3e})")


def build_observable(basis: Sequence[StateVector], scale: Sequence[float]) -> Observable:
    """Spectral assembly: sum of eigenvalue times eigenprojector."""
    if len(basis) != len(scale):
        raise ValidationError("basis and scale lengths differ")
    space = basis[0].space
    for b in basis:
        _check_same_space(b.space, space)
    _check_orthonormal_complete(basis, space)
    mat = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
    for vec, a in zip(basis, scale):
        mat += float(a) * np.outer(vec.amplitudes, vec.amplitudes.conj())
    return Observable(space, mat, basis=tuple(basis), scale=tuple(float(a) for a in scale))


def expectation(observable: Observable, state) -> float:
    """<A> for a pure state, or trace(A rho)/trace(rho) for a density operator."""
    _check_same_space(observable.space, state.space)
    if isinstance(state, StateVector):
        val = np.vdot(state.amplitudes, observable.matrix @ state.amplitudes)
        return float(val.real)
    num = np.trace(observable.matrix @ state.matrix)
    den = np.trace(state.matrix)
    return float((num / den).real)


def _split_axes(space: TensorSpace, keep) -> tuple[list[int], list[int]]:
    if isinstance(keep, str):
        keep = [keep]
    wanted = set(keep)
    if not wanted:
        raise ValidationError("keep set is empty")
    for name in wanted:
        space.axis(name)
    keep_axes = [i for i, l in enumerate(space.labels) if l in wanted]
    env_axes = [i for i, l in enumerate(space.labels) if l not in wanted]
    if not env_axes:
        raise ValidationError("keep set covers the whole space; nothing to trace out")
    return keep_axes, env_axes


def partial_trace(state, keep) -> DensityOperator:
    """Reduced density operator over the subsystems named in ``keep``.

    The retained subsystems keep their order from the parent space.  Accepts
    a StateVector or a DensityOperator.
    """
    space = state.space
    keep_axes, env_axes = _split_axes(space, keep)
    dims = space.dims
    dk = int(np.prod([dims[i] for i in keep_axes]))
    de = int(np.prod([dims[i] for i in env_axes]))
    sub = space.subspace([space.labels[i] for i in keep_axes])
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape(dims).transpose(keep_axes + env_axes)
        m = t.reshape(dk, de)
        return DensityOperator(sub, m @ m.conj().T)
    n = len(dims)
    t = state.matrix.reshape(dims + dims)
    perm = keep_axes + env_axes + [n + i for i in keep_axes] + [n + i for i in env_axes]
    t = t.transpose(perm).reshape(dk, de, dk, de)
    return DensityOperator(sub, np.trace(t, axis1=1, axis2=3))


def embed_matrix(mat: np.ndarray, sub: TensorSpace, full: TensorSpace) -> np.ndarray:
    """Lift an operator on ``sub`` to ``full`` by tensoring identity elsewhere.

    Handles arbitrary label positions; ``sub``'s labels may appear anywhere
    in ``full`` but must carry the same dimensions.
    """
    for label, dim in sub.subsystems:
        if full.dim_of(label) != dim:
            raise SpaceMismatchError(
                f"label {label!r} has dimension {dim} in the operand "
                f"but {full.dim_of(label)} in the target space"
            )
    mat = np.asarray(mat, dtype=np.complex128)
    d_sub = sub.total_dim
    if mat.shape != (d_sub, d_sub):
        raise SpaceMismatchError(f"matrix shape {mat.shape} for dimension {d_sub}")
    missing = [s for s in full.subsystems if s[0] not in sub.labels]
    big = mat
    for _, dim in missing:
        big = np.kron(big, np.eye(dim, dtype=np.complex128))
    order = list(sub.labels) + [label for label, _ in missing]
    dims = [full.dim_of(label) for label in order]
    perm = [order.index(label) for label in full.labels]
    n = len(order)
    t = big.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    d = full.total_dim
    return np.ascontiguousarray(t.reshape(d, d))


def embed_observable(observable: Observable, full: TensorSpace) -> Observable:
    """A acting on its own subsystems, identity on the rest of ``full``."""
    return Observable(full, embed_matrix(observable.matrix, observable.space, full))


def ray_equal(a: StateVector, b: StateVector, atol: float = VALIDITY_ATOL) -> bool:
    return a.ray_equal(b, atol=atol)
