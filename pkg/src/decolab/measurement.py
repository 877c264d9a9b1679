"""Unitary measurement models: pointer devices, record chains, recoherence.

A device register starts in a ready state and is driven by a controlled
shift: the unitary acts as |n> x V_n where V_n carries the ready state to
the n-th pointer state.  Chains tensor several such registers onto one
system and activate them in order, the observer register last.  Everything
here is globally unitary; apparent irreversibility enters only through
which registers are later ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import serialize
from .errors import SpaceMismatchError, ValidationError, VALIDITY_ATOL
from .hilbert import (
    StateVector,
    TensorSpace,
    _check_orthonormal_complete,
    basis_state,
    computational_basis,
    embed_matrix,
    partial_trace,
    tensor,
    tensor_many,
)

_GS_RESIDUAL_FLOOR = 1e-7


def _complete_orthonormal(seeds: list[np.ndarray], dim: int) -> np.ndarray:
    """Extend orthonormal ``seeds`` to a full basis, columns of the result.

    Completion sweeps the canonical basis in index order and keeps residuals
    above a fixed floor, so the result is deterministic.
    """
    cols = [np.asarray(v, dtype=np.complex128) for v in seeds]
    for k in range(dim):
        if len(cols) == dim:
            break
        cand = np.zeros(dim, dtype=np.complex128)
        cand[k] = 1.0
        for _ in range(2):
            for c in cols:
                cand = cand - np.vdot(c, cand) * c
        nrm = np.linalg.norm(cand)
        if nrm > _GS_RESIDUAL_FLOOR:
            cols.append(cand / nrm)
    if len(cols) != dim:
        raise ValidationError("could not complete an orthonormal basis")
    return np.column_stack(cols)


def _transport_unitary(src: list[np.ndarray], dst: list[np.ndarray], dim: int) -> np.ndarray:
    """Unitary taking each src vector to the matching dst vector.

    Both families must be orthonormal; the complement is fixed by canonical
    completion on each side.
    """
    b_src = _complete_orthonormal(src, dim)
    b_dst = _complete_orthonormal(dst, dim)
    return b_dst @ b_src.conj().T


def record_states_with_overlap(n_outcomes: int, overlap: float, dim: int) -> list[np.ndarray]:
    """Unit record vectors with constant pairwise inner product ``overlap``.

    Built from the Cholesky factor of the Gram matrix, supported on basis
    indices 1..n so index 0 stays free for a ready state.
    """
    if dim < n_outcomes + 1:
        raise ValidationError(f"dimension {dim} too small for {n_outcomes} records plus ready state")
    if not -1.0 / max(1, n_outcomes - 1) < overlap <= 1.0:
        raise ValidationError(f"overlap {overlap} outside the positive-semidefinite range")
    gram = np.full((n_outcomes, n_outcomes), float(overlap))
    np.fill_diagonal(gram, 1.0)
    chol = np.linalg.cholesky(gram)
    out = []
    for i in range(n_outcomes):
        vec = np.zeros(dim, dtype=np.complex128)
        vec[1 : 1 + n_outcomes] = chol[i, :]
        out.append(vec)
    return out


@dataclass(frozen=True, eq=False)
class ApparatusModel:
    """Single device register: ready state plus one pointer state per outcome."""

    space: TensorSpace
    pointer_ready: StateVector
    pointer_states: tuple[StateVector, ...]
    overlap_matrix: np.ndarray = None

    def __post_init__(self):
        if self.pointer_ready.space != self.space:
            raise SpaceMismatchError("ready state lives off the device space")
        if not self.pointer_ready.is_normalized():
            raise ValidationError("ready state is not normalized")
        for p in self.pointer_states:
            if p.space != self.space:
                raise SpaceMismatchError("pointer state lives off the device space")
            if not p.is_normalized():
                raise ValidationError("pointer state is not normalized")
        n = len(self.pointer_states)
        ov = np.empty((n, n), dtype=np.complex128)
        for i, a in enumerate(self.pointer_states):
            for j, b in enumerate(self.pointer_states):
                ov[i, j] = a.inner(b)
        ov.setflags(write=False)
        object.__setattr__(self, "overlap_matrix", ov)

    @property
    def n_outcomes(self) -> int:
        return len(self.pointer_states)

    @classmethod
    def ideal(cls, label: str, n_outcomes: int, dim: int | None = None) -> ApparatusModel:
        """Orthonormal pointer states on basis indices 1..n, ready at 0."""
        d = dim if dim is not None else n_outcomes + 1
        space = TensorSpace(((label, d),))
        if d < n_outcomes + 1:
            raise ValidationError(f"dimension {d} too small for {n_outcomes} pointers plus ready state")
        return cls(
            space=space,
            pointer_ready=basis_state(space, 0),
            pointer_states=tuple(basis_state(space, i + 1) for i in range(n_outcomes)),
        )

    @classmethod
    def with_overlap(
        cls, label: str, n_outcomes: int, overlap: float, dim: int | None = None
    ) -> ApparatusModel:
        """Pointer states with constant pairwise overlap; 0 recovers ``ideal``."""
        d = dim if dim is not None else n_outcomes + 1
        space = TensorSpace(((label, d),))
        recs = record_states_with_overlap(n_outcomes, overlap, d)
        return cls(
            space=space,
            pointer_ready=basis_state(space, 0),
            pointer_states=tuple(StateVector(space, r) for r in recs),
        )

    def shift_unitaries(self) -> list[np.ndarray]:
        """One unitary per outcome, carrying the ready state to that pointer."""
        d = self.space.total_dim
        return [
            _transport_unitary([self.pointer_ready.amplitudes], [p.amplitudes], d)
            for p in self.pointer_states
        ]


def measurement_unitary(
    basis: Sequence[StateVector], app: ApparatusModel, full_space: TensorSpace | None = None
) -> np.ndarray:
    """Controlled shift sum(|n><n| x V_n), optionally embedded in a larger space."""
    basis = tuple(basis)
    sys_space = basis[0].space
    _check_orthonormal_complete(basis, sys_space)
    if len(basis) != app.n_outcomes:
        raise ValidationError(
            f"{len(basis)} outcomes but {app.n_outcomes} pointer states"
        )
    shifts = app.shift_unitaries()
    da = app.space.total_dim
    ds = sys_space.total_dim
    u = np.zeros((ds * da, ds * da), dtype=np.complex128)
    for vec, v_n in zip(basis, shifts):
        proj = np.outer(vec.amplitudes, vec.amplitudes.conj())
        u += np.kron(proj, v_n)
    local_space = sys_space.concat(app.space)
    dev = np.abs(u.conj().T @ u - np.eye(ds * da)).max()
    if dev > VALIDITY_ATOL:
        raise ValidationError(f"controlled shift is not unitary (deviation {dev:.3e})")
    if full_space is None or full_space == local_space:
        return u
    return embed_matrix(u, local_space, full_space)


def _device_ready_weight(joint: StateVector, app: ApparatusModel) -> float:
    rho_dev = partial_trace(joint, list(app.space.labels))
    r = app.pointer_ready.amplitudes
    return float(np.vdot(r, rho_dev.matrix @ r).real)


def premeasure(
    system: StateVector,
    app: ApparatusModel,
    basis: Sequence[StateVector],
    post_maps: Sequence[np.ndarray] | None = None,
) -> StateVector:
    """Entangle a device with the system without selecting an outcome.

    ``system`` may be the bare system state (the ready device is appended)
    or a joint state already containing the device register, which must
    then actually hold the ready state.  Eigenstates of the measured basis
    come out as product states with the matching pointer; superpositions
    come out entangled, component by component.

    ``post_maps`` optionally applies a unitary to the system conditioned on
    each pointer outcome (a disturbing measurement).  This requires
    orthogonal pointer states.
    """
    if app.space.labels[0] in system.space.labels:
        joint = system
        if _device_ready_weight(joint, app) < 1.0 - VALIDITY_ATOL:
            raise ValidationError("apparatus is not in its ready state")
    else:
        joint = tensor(system, app.pointer_ready)
    u = measurement_unitary(basis, app, joint.space)
    out = StateVector(joint.space, u @ joint.amplitudes)
    if post_maps is not None:
        out = _apply_post_maps(out, app, basis, post_maps)
    return out


def _apply_post_maps(joint, app, basis, post_maps):
    if len(post_maps) != app.n_outcomes:
        raise ValidationError("one post map per outcome required")
    ident = np.eye(app.space.total_dim, dtype=np.complex128)
    pointer_gram = np.abs(app.overlap_matrix - np.eye(app.n_outcomes)).max()
    if pointer_gram > VALIDITY_ATOL:
        raise ValidationError("post maps require orthogonal pointer states")
    sys_space = basis[0].space
    ds = sys_space.total_dim
    u = np.zeros((ds * app.space.total_dim,) * 2, dtype=np.complex128)
    rest = ident.copy()
    for w, pointer in zip(post_maps, app.pointer_states):
        w = np.asarray(w, dtype=np.complex128)
        if np.abs(w.conj().T @ w - np.eye(ds)).max() > VALIDITY_ATOL:
            raise ValidationError("post map is not unitary")
        pp = np.outer(pointer.amplitudes, pointer.amplitudes.conj())
        u += np.kron(w, pp)
        rest -= pp
    u += np.kron(np.eye(ds), rest)
    local = sys_space.concat(app.space)
    big = embed_matrix(u, local, joint.space) if joint.space != local else u
    return StateVector(joint.space, big @ joint.amplitudes)


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """System basis, a row of record registers, and a final observer register."""

    system_basis: tuple[StateVector, ...]
    links: tuple[ApparatusModel, ...]
    observer: ApparatusModel
    activation_order: tuple[int, ...] | None = None

    def __post_init__(self):
        order = self.activation_order
        if order is None:
            order = tuple(range(len(self.links)))
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(len(self.links))):
            raise ValidationError(
                f"activation order {order} must visit each link exactly once"
            )
        object.__setattr__(self, "activation_order", order)
        n = len(self.system_basis)
        for link in self.links + (self.observer,):
            if link.n_outcomes != n:
                raise ValidationError("every register needs one pointer state per outcome")
        labels = [l.space.labels[0] for l in self.links] + [self.observer.space.labels[0]]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"label collision among registers: {labels}")

    @property
    def system_space(self) -> TensorSpace:
        return self.system_basis[0].space

    def joint_space(self) -> TensorSpace:
        space = self.system_space
        for link in self.links:
            space = space.concat(link.space)
        return space.concat(self.observer.space)

    @classmethod
    def from_scenario(cls, doc: dict) -> ChainSpec:
        """Build from a plain dict: system_dim, links (dim/overlap), observer, order."""
        n = int(doc["system_dim"])
        sys_space = TensorSpace((("system", n),))
        basis = computational_basis(sys_space)
        links = []
        for i, link_doc in enumerate(doc.get("links", [])):
            dim = int(link_doc.get("dim", n + 1))
            g = float(link_doc.get("overlap", 0.0))
            links.append(ApparatusModel.with_overlap(f"link{i}", n, g, dim=dim))
        obs_doc = doc.get("observer", {})
        observer = ApparatusModel.ideal(
            "observer", n, dim=int(obs_doc.get("dim", n + 1))
        )
        order = doc.get("order")
        return cls(
            system_basis=basis,
            links=tuple(links),
            observer=observer,
            activation_order=tuple(order) if order is not None else None,
        )

    def to_scenario(self) -> dict:
        return {
            "system_dim": self.system_space.total_dim,
            "links": [
                {
                    "dim": link.space.total_dim,
                    "overlap": float(link.overlap_matrix[0, 1].real)
                    if link.n_outcomes > 1
                    else 0.0,
                }
                for link in self.links
            ],
            "observer": {"dim": self.observer.space.total_dim},
            "order": list(self.activation_order),
        }


def chain_propagate(spec: ChainSpec, initial_system: StateVector) -> list[StateVector]:
    """Activate each link in order, then the observer.

    Returns the joint state before any step and after every step:
    ``len(links) + 2`` entries.  With no links this reduces to a single
    premeasurement by the observer.
    """
    if initial_system.space != spec.system_space:
        raise SpaceMismatchError("initial state lives off the chain's system space")
    full = spec.joint_space()
    joint = initial_system
    for link in spec.links:
        joint = tensor(joint, link.pointer_ready)
    joint = tensor(joint, spec.observer.pointer_ready)
    states = [joint]
    for idx in spec.activation_order:
        u = measurement_unitary(spec.system_basis, spec.links[idx], full)
        joint = StateVector(full, u @ joint.amplitudes)
        states.append(joint)
    u = measurement_unitary(spec.system_basis, spec.observer, full)
    states.append(StateVector(full, u @ joint.amplitudes))
    return states


@dataclass(frozen=True, eq=False)
class BranchingModel:
    """Registers and unitaries for the branch / decohere / reset cycle.

    Step 1 entangles the apparatus with the system; step 2 writes a record
    of each branch into one environment register; step 3 resets the
    apparatus to its ready state while depositing a second record in a
    separate environment register.  After step 3 the apparatus factors out
    exactly, yet the branches stay orthogonal through their records, so no
    recoherence of the system ever occurs.
    """

    system_basis: tuple[StateVector, ...]
    apparatus: ApparatusModel
    env_decohere: ApparatusModel
    env_reset: ApparatusModel
    explicit_steps: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        n = len(self.system_basis)
        for reg in (self.apparatus, self.env_decohere, self.env_reset):
            if reg.n_outcomes != n:
                raise ValidationError("every register needs one pointer state per outcome")

    @classmethod
    def ideal(cls, amplitude_count: int, env_dim: int | None = None) -> BranchingModel:
        n = amplitude_count
        d_env = env_dim if env_dim is not None else n + 1
        if d_env < n + 1:
            raise ValidationError(
                f"env_dim {d_env} too small: need {n} records plus a ready state"
            )
        sys_space = TensorSpace((("system", n),))
        return cls(
            system_basis=computational_basis(sys_space),
            apparatus=ApparatusModel.ideal("apparatus", n),
            env_decohere=ApparatusModel.ideal("env_record", n, dim=d_env),
            env_reset=ApparatusModel.ideal("env_reset", n, dim=d_env),
        )

    def joint_space(self) -> TensorSpace:
        return (
            self.system_basis[0]
            .space.concat(self.apparatus.space)
            .concat(self.env_decohere.space)
            .concat(self.env_reset.space)
        )

    def ready_joint(self, system: StateVector) -> StateVector:
        return tensor_many(
            system,
            self.apparatus.pointer_ready,
            self.env_decohere.pointer_ready,
            self.env_reset.pointer_ready,
        )

    def step_unitaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        full = self.joint_space()
        if self.explicit_steps is not None:
            d = full.total_dim
            steps = []
            for u in self.explicit_steps:
                u = np.asarray(u, dtype=np.complex128)
                if u.shape != (d, d):
                    raise SpaceMismatchError(f"step shape {u.shape} for dimension {d}")
                if np.abs(u.conj().T @ u - np.eye(d)).max() > VALIDITY_ATOL:
                    raise ValidationError("step specification is not unitary")
                steps.append(u)
            return tuple(steps)
        u1 = measurement_unitary(self.system_basis, self.apparatus, full)
        u2 = measurement_unitary(self.system_basis, self.env_decohere, full)
        # Reset: |pointer_n>|ready> -> |ready>|record_n> on apparatus x env_reset.
        da = self.apparatus.space.total_dim
        dr = self.env_reset.space.total_dim
        src = [
            np.kron(p.amplitudes, self.env_reset.pointer_ready.amplitudes)
            for p in self.apparatus.pointer_states
        ]
        dst = [
            np.kron(self.apparatus.pointer_ready.amplitudes, r.amplitudes)
            for r in self.env_reset.pointer_states
        ]
        u3_local = _transport_unitary(src, dst, da * dr)
        local = self.apparatus.space.concat(self.env_reset.space)
        u3 = embed_matrix(u3_local, local, full)
        return u1, u2, u3


def branch_and_recohere(
    initial: StateVector, model: BranchingModel
) -> tuple[StateVector, StateVector, StateVector]:
    """Run the three-step cycle; returns the state after each step.

    The third step recoheres the apparatus (it returns to the ready state
    with unit fidelity) while the branch records migrate into the
    environment registers.
    """
    full = model.joint_space()
    if initial.space != full:
        raise SpaceMismatchError("initial state lives off the model's joint space")
    u1, u2, u3 = model.step_unitaries()
    s1 = StateVector(full, u1 @ initial.amplitudes)
    s2 = StateVector(full, u2 @ s1.amplitudes)
    s3 = StateVector(full, u3 @ s2.amplitudes)
    return s1, s2, s3


def write_chain_csv(path, rows) -> None:
    """CSV of (step, off_diagonal, system_linear_entropy, global_purity)."""
    text = serialize.csv_text(
        ["step", "off_diagonal", "system_linear_entropy", "global_purity"],
        [
            [str(int(step)), serialize.fmt(off), serialize.fmt(slin), serialize.fmt(pur)]
            for step, off, slin, pur in rows
        ],
    )
    with open(path, "w", newline="") as fh:
        fh.write(text)
