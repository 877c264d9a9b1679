"""Scenario runner: validate and execute JSON scenario files.

Commands:

    decolab run <scenario.json> [--out DIR] [--seed N]
    decolab validate <scenario.json>
    decolab --version

Every artifact is a pure function of (scenario, seed): reruns are
byte-identical.  A manifest.json records a content hash for each emitted
file.  Exit codes: 0 success, 2 schema violation, 3 numerical invariant
violation during the run, 4 I/O failure.

DECOLAB_THREADS caps the worker threads used for trial batches (0 or unset
means automatic).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, serialize
from .dynamics import Hamiltonian, collapse
from .entanglement import decoherence_factor, linear_entropy, schmidt_decompose
from .errors import DecolabError, ValidationError
from .hilbert import (
    DensityOperator,
    StateVector,
    TensorSpace,
    computational_basis,
    partial_trace,
    random_state,
)
from .histories import (
    HistorySpec,
    ProjectorSet,
    RateMatrix,
    consistency_defect,
    enumerate_histories,
    graham_deviant_norm,
    history_probability,
    history_trace_single_sided,
    pauli_master_evolve,
)
from .ledger import branching_ledger, classical_ledger, quantum_collapse_ledger, write_ledger_csv
from .measurement import (
    ApparatusModel,
    BranchingModel,
    ChainSpec,
    branch_and_recohere,
    chain_propagate,
    premeasure,
    write_chain_csv,
)
from .wigner import (
    GridState,
    marginals,
    oscillator_state,
    two_packet_mixture,
    two_packet_superposition,
    wigner_transform,
    write_marginals_csv,
    write_wigner_binary,
    write_wigner_csv,
)

SCENARIO_SCHEMA = "decolab/scenario/v1"
MANIFEST_SCHEMA = "decolab/manifest/v1"

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

KINDS = (
    "premeasurement",
    "chain",
    "branch_recohere",
    "collapse_mc",
    "wigner",
    "schmidt",
    "master",
    "histories",
    "graham",
    "ledger_classical",
    "ledger_quantum",
    "ledger_branching",
)


@dataclass
class Scenario:
    kind: str
    seed: int
    params: dict
    raw_bytes: bytes


def thread_cap() -> int:
    raw = os.environ.get("DECOLAB_THREADS", "0")
    try:
        val = int(raw)
    except ValueError:
        raise ValidationError(f"DECOLAB_THREADS must be an integer, got {raw!r}") from None
    if val < 0:
        raise ValidationError(f"DECOLAB_THREADS must be nonnegative, got {val}")
    if val == 0:
        return min(32, os.cpu_count() or 1)
    return val


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _parse_amplitudes(raw, diags: list[str], field: str) -> np.ndarray | None:
    if not isinstance(raw, list) or len(raw) < 2:
        diags.append(f"{field}: expected a list of two or more amplitudes")
        return None
    out = np.empty(len(raw), dtype=np.complex128)
    for i, item in enumerate(raw):
        if _is_number(item):
            out[i] = complex(item)
        elif (
            isinstance(item, list)
            and len(item) == 2
            and _is_number(item[0])
            and _is_number(item[1])
        ):
            out[i] = complex(item[0], item[1])
        else:
            diags.append(f"{field}[{i}]: expected a number or an [re, im] pair")
            return None
    norm = float(np.linalg.norm(out))
    if abs(norm - 1.0) > 1e-6:
        diags.append(f"{field}: amplitudes are not normalized (norm {norm:.12g})")
        return None
    return out / norm


def _parse_probabilities(raw, diags: list[str], field: str) -> np.ndarray | None:
    if not isinstance(raw, list) or len(raw) < 2:
        diags.append(f"{field}: expected a list of two or more probabilities")
        return None
    if not all(_is_number(x) for x in raw):
        diags.append(f"{field}: entries must be numbers")
        return None
    p = np.asarray(raw, dtype=np.float64)
    if p.min() < 0.0:
        diags.append(f"{field}: negative entry {p.min()}")
        return None
    if abs(p.sum() - 1.0) > 1e-8:
        diags.append(f"{field}: entries sum to {p.sum():.12g}, expected 1")
        return None
    return p


def _require_positive_int(params, key, diags, default=None, minimum=1):
    val = params.get(key, default)
    if val is None:
        diags.append(f"params.{key}: required")
        return None
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        diags.append(f"params.{key}: expected an integer >= {minimum}, got {val!r}")
        return None
    return val


def _validate_premeasurement(params, diags):
    _parse_amplitudes(params.get("amplitudes"), diags, "params.amplitudes")
    g = params.get("pointer_overlap", 0.0)
    if not _is_number(g) or not -1.0 < float(g) <= 1.0:
        diags.append(f"params.pointer_overlap: expected a number in (-1, 1], got {g!r}")


def _validate_chain(params, diags):
    _parse_amplitudes(params.get("amplitudes"), diags, "params.amplitudes")
    links = _require_positive_int(params, "links", diags, minimum=0, default=None)
    overlaps = params.get("overlaps")
    if overlaps is not None:
        if not isinstance(overlaps, list) or (
            links is not None and len(overlaps) != links
        ):
            diags.append("params.overlaps: expected one overlap per link")
        elif not all(_is_number(g) for g in overlaps):
            diags.append("params.overlaps: entries must be numbers")
    else:
        g = params.get("overlap", 0.0)
        if not _is_number(g):
            diags.append(f"params.overlap: expected a number, got {g!r}")


def _validate_branch(params, diags):
    amps = _parse_amplitudes(params.get("amplitudes"), diags, "params.amplitudes")
    env_dim = params.get("env_dim")
    if env_dim is not None:
        if not isinstance(env_dim, int) or isinstance(env_dim, bool):
            diags.append(f"params.env_dim: expected an integer, got {env_dim!r}")
        elif amps is not None and env_dim < len(amps) + 1:
            diags.append(
                f"params.env_dim: {env_dim} too small for {len(amps)} records plus a ready state"
            )


def _validate_collapse_mc(params, diags):
    _parse_amplitudes(params.get("amplitudes"), diags, "params.amplitudes")
    _require_positive_int(params, "trials", diags)
    limit = params.get("record_limit", 5)
    if not isinstance(limit, int) or isinstance(limit, bool) or limit < 0:
        diags.append(f"params.record_limit: expected an integer >= 0, got {limit!r}")


def _validate_wigner(params, diags):
    state = params.get("state")
    if not isinstance(state, dict):
        diags.append("params.state: required object")
        return
    kind = state.get("kind")
    if kind == "oscillator":
        n = state.get("n", 0)
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            diags.append(f"params.state.n: expected an integer >= 0, got {n!r}")
    elif kind in ("superposition", "mixture"):
        center = state.get("center")
        if not _is_number(center) or float(center) <= 0:
            diags.append(f"params.state.center: expected a positive number, got {center!r}")
    else:
        diags.append(f"params.state.kind: unknown kind {kind!r}")
    n_points = params.get("n_points", 256)
    if not isinstance(n_points, int) or n_points < 2 or n_points & (n_points - 1):
        diags.append(f"params.n_points: expected a power of two >= 2, got {n_points!r}")
    q_min = params.get("q_min", -8.0)
    q_max = params.get("q_max", 8.0)
    if not (_is_number(q_min) and _is_number(q_max) and float(q_max) > float(q_min)):
        diags.append("params.q_min/q_max: expected numbers with q_max > q_min")


def _validate_schmidt(params, diags):
    dims = params.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) < 2
        or not all(
            isinstance(d, list) and len(d) == 2 and isinstance(d[0], str)
            and isinstance(d[1], int) and d[1] >= 1
            for d in dims
        )
    ):
        diags.append('params.dims: expected [["label", dim], ...] with at least two entries')
        return
    labels = [d[0] for d in dims]
    system = params.get("system")
    if (
        not isinstance(system, list)
        or not system
        or not all(isinstance(s, str) and s in labels for s in system)
        or len(system) >= len(labels)
    ):
        diags.append("params.system: expected a proper nonempty subset of the labels")
    state = params.get("state", {"kind": "random"})
    if isinstance(state, dict) and "amplitudes" in state:
        total = 1
        for d in dims:
            total *= d[1]
        amps = state["amplitudes"]
        if not isinstance(amps, list) or len(amps) != total:
            diags.append(f"params.state.amplitudes: expected {total} entries")
        else:
            _parse_amplitudes(amps, diags, "params.state.amplitudes")
    elif not (isinstance(state, dict) and state.get("kind") == "random"):
        diags.append('params.state: expected {"kind": "random"} or explicit amplitudes')


def _validate_master(params, diags):
    p0 = _parse_probabilities(params.get("p0"), diags, "params.p0")
    rates = params.get("rates")
    if not isinstance(rates, list) or not rates:
        diags.append("params.rates: required square matrix")
        return
    size = len(rates)
    for i, row in enumerate(rates):
        if not isinstance(row, list) or len(row) != size:
            diags.append(f"params.rates[{i}]: expected {size} entries")
            return
        for j, val in enumerate(row):
            if not _is_number(val):
                diags.append(f"params.rates[{i}][{j}]: expected a number")
                return
            if val < 0:
                diags.append(f"params.rates[{i}][{j}]: negative rate {val}")
            if i == j and val != 0:
                diags.append(f"params.rates[{i}][{j}]: diagonal must be zero")
    if p0 is not None and p0.size != size:
        diags.append(f"params.p0: {p0.size} entries for a {size}-state rate matrix")
    times = params.get("times")
    if not isinstance(times, list) or not times or not all(_is_number(t) for t in times):
        diags.append("params.times: expected a nonempty list of numbers")
    elif any(t < 0 for t in times):
        diags.append("params.times: negative time rejected for the rate equation")


def _named_hamiltonian(dim: int, doc, diags) -> np.ndarray | None:
    if not isinstance(doc, dict):
        diags.append("params.hamiltonian: required object")
        return None
    name = doc.get("name")
    scale = doc.get("scale", 1.0)
    if not _is_number(scale):
        diags.append(f"params.hamiltonian.scale: expected a number, got {scale!r}")
        return None
    pauli = {
        "sigma_x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
        "sigma_y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
        "sigma_z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    }
    if name == "zero":
        return np.zeros((dim, dim), dtype=np.complex128)
    if name in pauli:
        if dim != 2:
            diags.append(f"params.hamiltonian: {name} needs dimension 2, space has {dim}")
            return None
        return float(scale) * pauli[name]
    if name == "diagonal":
        entries = doc.get("entries")
        if not isinstance(entries, list) or len(entries) != dim or not all(
            _is_number(e) for e in entries
        ):
            diags.append(f"params.hamiltonian.entries: expected {dim} numbers")
            return None
        return np.diag(np.asarray(entries, dtype=np.complex128))
    if name == "matrix":
        entries = doc.get("entries")
        try:
            mat = serialize.pairs_to_matrix(entries)
        except (TypeError, ValueError, IndexError):
            diags.append("params.hamiltonian.entries: expected a matrix of [re, im] pairs")
            return None
        if mat.shape != (dim, dim):
            diags.append(f"params.hamiltonian.entries: shape {mat.shape}, expected {(dim, dim)}")
            return None
        if np.abs(mat - mat.conj().T).max() > 1e-10:
            diags.append("params.hamiltonian.entries: matrix is not Hermitian")
            return None
        return mat
    diags.append(f"params.hamiltonian.name: unknown name {name!r}")
    return None


def _validate_histories(params, diags):
    dim = _require_positive_int(params, "dim", diags, minimum=2)
    if dim is None:
        return
    _named_hamiltonian(dim, params.get("hamiltonian"), diags)
    t0 = params.get("t0", 0.0)
    if not _is_number(t0):
        diags.append(f"params.t0: expected a number, got {t0!r}")
        t0 = 0.0
    times = params.get("times")
    if not isinstance(times, list) or not times or not all(_is_number(t) for t in times):
        diags.append("params.times: expected a nonempty list of numbers")
    else:
        prev = float(t0)
        for i, t in enumerate(times):
            if t <= prev:
                diags.append(f"params.times[{i}]: must increase strictly after t0")
                break
            prev = float(t)
    projectors = params.get("projectors", {"type": "computational"})
    slot_docs = projectors if isinstance(projectors, list) else [projectors]
    for i, pd in enumerate(slot_docs):
        if not isinstance(pd, dict):
            diags.append(f"params.projectors[{i}]: expected an object")
        elif pd.get("type") == "blocks":
            blocks = pd.get("blocks")
            if not isinstance(blocks, list) or not blocks:
                diags.append(f"params.projectors[{i}].blocks: required")
            else:
                seen = []
                for block in blocks:
                    if not isinstance(block, list) or not all(
                        isinstance(b, int) and 0 <= b < dim for b in block
                    ):
                        diags.append(
                            f"params.projectors[{i}].blocks: indices must lie in [0, {dim})"
                        )
                        break
                    seen.extend(block)
                else:
                    if sorted(seen) != list(range(dim)):
                        diags.append(
                            f"params.projectors[{i}].blocks: must partition all {dim} indices"
                        )
        elif pd.get("type") != "computational":
            diags.append(f"params.projectors[{i}].type: unknown type {pd.get('type')!r}")
    initial = params.get("initial")
    if not isinstance(initial, dict):
        diags.append("params.initial: required object")
    elif "amplitudes" in initial:
        amps = initial["amplitudes"]
        if not isinstance(amps, list) or len(amps) != dim:
            diags.append(f"params.initial.amplitudes: expected {dim} entries")
        else:
            _parse_amplitudes(amps, diags, "params.initial.amplitudes")
    elif "diagonal" in initial:
        diag = _parse_probabilities(initial["diagonal"], diags, "params.initial.diagonal")
        if diag is not None and diag.size != dim:
            diags.append(f"params.initial.diagonal: expected {dim} entries")
    else:
        diags.append("params.initial: expected amplitudes or diagonal")


def _validate_graham(params, diags):
    p = params.get("p")
    if _is_number(p):
        if not 0.0 <= float(p) <= 1.0:
            diags.append(f"params.p: probability out of range: {p}")
    else:
        _parse_probabilities(p, diags, "params.p")
    eps = params.get("epsilon")
    if not _is_number(eps) or float(eps) <= 0.0:
        diags.append(f"params.epsilon: expected a positive number, got {eps!r}")
    n_values = params.get("n_values")
    if n_values is None:
        _require_positive_int(params, "n", diags)
    elif not isinstance(n_values, list) or not all(
        isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in n_values
    ):
        diags.append("params.n_values: expected a list of integers >= 1")


def _validate_ledger_classical(params, diags):
    p = _parse_probabilities(params.get("p"), diags, "params.p")
    if p is not None and (p > 0).sum() < 2:
        diags.append("params.p: need at least two outcomes with positive probability")


def _validate_ledger_quantum(params, diags):
    _parse_amplitudes(params.get("amplitudes"), diags, "params.amplitudes")


_VALIDATORS = {
    "premeasurement": _validate_premeasurement,
    "chain": _validate_chain,
    "branch_recohere": _validate_branch,
    "collapse_mc": _validate_collapse_mc,
    "wigner": _validate_wigner,
    "schmidt": _validate_schmidt,
    "master": _validate_master,
    "histories": _validate_histories,
    "graham": _validate_graham,
    "ledger_classical": _validate_ledger_classical,
    "ledger_quantum": _validate_ledger_quantum,
    "ledger_branching": _validate_branch,
}


def validate_document(doc) -> list[str]:
    """Schema-level diagnostics for a parsed scenario document."""
    diags: list[str] = []
    if not isinstance(doc, dict):
        return ["scenario: expected a JSON object"]
    schema = doc.get("schema")
    if schema != SCENARIO_SCHEMA:
        diags.append(f"schema: expected {SCENARIO_SCHEMA!r}, got {schema!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        diags.append(f"kind: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
        return diags
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        diags.append(f"seed: expected a nonnegative integer, got {seed!r}")
    params = doc.get("params")
    if not isinstance(params, dict):
        diags.append("params: required object")
        return diags
    _VALIDATORS[kind](params, diags)
    return diags


class _Emitter:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.entries: list[dict] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_bytes(self, name: str, data: bytes) -> None:
        with open(self.path(name), "wb") as fh:
            fh.write(data)
        self._record(name, data)

    def write_text(self, name: str, text: str) -> None:
        self.write_bytes(name, text.encode("utf-8"))

    def add_existing(self, name: str) -> None:
        with open(self.path(name), "rb") as fh:
            data = fh.read()
        self._record(name, data)

    def _record(self, name: str, data: bytes) -> None:
        self.entries.append(
            {"name": name, "sha256": serialize.sha256_hex(data), "bytes": len(data)}
        )

    def manifest(self, scenario: Scenario) -> None:
        doc = {
            "schema": MANIFEST_SCHEMA,
            "kind": scenario.kind,
            "seed": scenario.seed,
            "scenario_sha256": serialize.sha256_hex(scenario.raw_bytes),
            "files": sorted(self.entries, key=lambda e: e["name"]),
        }
        with open(self.path("manifest.json"), "w", newline="") as fh:
            fh.write(serialize.dumps(doc))


def _amplitudes(params) -> np.ndarray:
    diags: list[str] = []
    amps = _parse_amplitudes(params["amplitudes"], diags, "params.amplitudes")
    if amps is None:
        raise ValidationError("; ".join(diags))
    return amps


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _run_premeasurement(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    amps = _amplitudes(params)
    n = amps.size
    sys_space = TensorSpace((("system", n),))
    system = StateVector(sys_space, amps)
    g = float(params.get("pointer_overlap", 0.0))
    app = ApparatusModel.with_overlap("pointer", n, g)
    joint = premeasure(system, app, computational_basis(sys_space))
    purity = joint.norm() ** 4
    _check(abs(purity - 1.0) <= 1e-10, f"global purity drifted to {purity!r}")
    rho_sys = partial_trace(joint, "system")
    off, _pops = decoherence_factor(rho_sys, computational_basis(sys_space))
    emit.write_text("joint_state.json", joint.to_json())
    emit.write_text("system_density.json", rho_sys.to_json())
    emit.write_text(
        "summary.csv",
        serialize.csv_text(
            ["off_diagonal_max", "system_linear_entropy", "global_purity"],
            [
                [
                    serialize.fmt(off.max() if n > 1 else 0.0),
                    serialize.fmt(linear_entropy(rho_sys)),
                    serialize.fmt(purity),
                ]
            ],
        ),
    )


def _run_chain(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    amps = _amplitudes(params)
    n = amps.size
    k = int(params["links"])
    overlaps = params.get("overlaps")
    if overlaps is None:
        overlaps = [float(params.get("overlap", 0.0))] * k
    spec = ChainSpec.from_scenario(
        {
            "system_dim": n,
            "links": [{"overlap": float(g)} for g in overlaps],
            "observer": {},
        }
    )
    system = StateVector(spec.system_space, amps)
    states = chain_propagate(spec, system)
    basis = computational_basis(spec.system_space)
    rows = []
    for step in range(1, k + 1):
        state = states[step]
        purity = state.norm() ** 4
        _check(abs(purity - 1.0) <= 1e-10, f"global purity drifted to {purity!r} at step {step}")
        rho_sys = partial_trace(state, "system")
        off, _pops = decoherence_factor(rho_sys, basis)
        rows.append((step, off.max() if n > 1 else 0.0, linear_entropy(rho_sys), purity))
    write_chain_csv(emit.path("chain.csv"), rows)
    emit.add_existing("chain.csv")
    final = states[-1]
    rho_final = partial_trace(final, "system")
    _off, pops = decoherence_factor(rho_final, basis)
    born = np.abs(amps) ** 2
    _check(
        float(np.abs(pops - born).max()) <= 1e-10,
        "final populations deviate from the squared amplitudes",
    )
    summary = {
        "final_populations": [float(x) for x in pops],
        "born_probabilities": [float(x) for x in born],
        "max_population_deviation": float(np.abs(pops - born).max()),
    }
    emit.write_text("summary.json", serialize.dumps(summary))


def _run_branch_recohere(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    amps = _amplitudes(params)
    model = BranchingModel.ideal(amps.size, env_dim=params.get("env_dim"))
    system = StateVector(model.system_basis[0].space, amps)
    initial = model.ready_joint(system)
    states = (initial,) + branch_and_recohere(initial, model)
    ready = model.apparatus.pointer_ready.amplitudes
    rows = []
    for step, state in enumerate(states):
        purity = state.norm() ** 4
        _check(abs(purity - 1.0) <= 1e-10, f"global purity drifted to {purity!r} at step {step}")
        rho_app = partial_trace(state, "apparatus")
        fidelity = float(np.vdot(ready, rho_app.matrix @ ready).real)
        rho_sys = partial_trace(state, "system")
        rows.append(
            [
                str(step),
                serialize.fmt(fidelity),
                serialize.fmt(linear_entropy(rho_sys)),
                serialize.fmt(purity),
            ]
        )
    emit.write_text(
        "branch.csv",
        serialize.csv_text(
            ["step", "apparatus_fidelity", "system_linear_entropy", "global_purity"], rows
        ),
    )


def _collapse_counts(psi, basis, seeds) -> np.ndarray:
    counts = np.zeros(len(basis), dtype=np.int64)
    for s in seeds:
        rec = collapse(psi, basis, int(s))
        counts[rec.outcome_index] += 1
    return counts


def _run_collapse_mc(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    amps = _amplitudes(params)
    trials = int(params["trials"])
    limit = int(params.get("record_limit", 5))
    n = amps.size
    sys_space = TensorSpace((("system", n),))
    psi = StateVector(sys_space, amps)
    basis = computational_basis(sys_space)
    workers = thread_cap()
    seeds = [scenario.seed + i for i in range(trials)]
    if workers <= 1 or trials < 256:
        counts = _collapse_counts(psi, basis, seeds)
    else:
        chunk = (trials + workers - 1) // workers
        parts = [seeds[i : i + chunk] for i in range(0, trials, chunk)]
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda part: _collapse_counts(psi, basis, part), parts))
        counts = np.sum(results, axis=0)
    born = np.abs(amps) ** 2
    rows = []
    for i in range(n):
        rows.append(
            [
                str(i),
                serialize.fmt(born[i]),
                str(int(counts[i])),
                serialize.fmt(counts[i] / trials),
            ]
        )
    emit.write_text(
        "collapse.csv",
        serialize.csv_text(["outcome", "born_probability", "count", "frequency"], rows),
    )
    records = [collapse(psi, basis, scenario.seed + i).to_json_obj() for i in range(min(limit, trials))]
    emit.write_text("records.json", serialize.dumps(records))


def _wigner_state(params) -> GridState:
    doc = params["state"]
    q_min = float(params.get("q_min", -8.0))
    q_max = float(params.get("q_max", 8.0))
    n_points = int(params.get("n_points", 256))
    kind = doc["kind"]
    if kind == "oscillator":
        return oscillator_state(int(doc.get("n", 0)), q_min, q_max, n_points)
    center = float(doc["center"])
    momentum = float(doc.get("momentum", 0.0))
    width = float(doc.get("width", 1.0))
    if kind == "superposition":
        return two_packet_superposition(center, momentum, width, q_min, q_max, n_points)
    return two_packet_mixture(center, momentum, width, q_min, q_max, n_points)


def _run_wigner(scenario: Scenario, emit: _Emitter) -> None:
    state = _wigner_state(scenario.params)
    w = wigner_transform(state)
    write_wigner_csv(emit.path("wigner.csv"), w)
    emit.add_existing("wigner.csv")
    write_wigner_binary(emit.path("wigner"), w)
    emit.add_existing("wigner.bin")
    emit.add_existing("wigner.meta.json")
    write_marginals_csv(emit.path("marginals.csv"), w)
    emit.add_existing("marginals.csv")


def _run_schmidt(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    space = TensorSpace(tuple((d[0], int(d[1])) for d in params["dims"]))
    state_doc = params.get("state", {"kind": "random"})
    if "amplitudes" in state_doc:
        diags: list[str] = []
        amps = _parse_amplitudes(state_doc["amplitudes"], diags, "params.state.amplitudes")
        if amps is None:
            raise ValidationError("; ".join(diags))
        psi = StateVector(space, amps)
    else:
        psi = random_state(space, np.random.default_rng(scenario.seed))
    dec = schmidt_decompose(psi, params["system"])
    err = float(np.abs(dec.reconstruct().amplitudes - psi.amplitudes).max())
    _check(err <= 1e-10, f"reconstruction error {err!r}")
    doc = dec.to_json_obj()
    doc["reconstruction_error"] = err
    emit.write_text("schmidt.json", serialize.dumps(doc))
    rows = [
        [str(k), serialize.fmt(c), serialize.fmt(c * c)]
        for k, c in enumerate(dec.coefficients)
    ]
    emit.write_text(
        "coefficients.csv", serialize.csv_text(["k", "coefficient", "probability"], rows)
    )


def _run_master(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    p0 = np.asarray(params["p0"], dtype=np.float64)
    rates = RateMatrix(np.asarray(params["rates"], dtype=np.float64))
    times = [float(t) for t in params["times"]]
    rows = []
    for t in times:
        p = pauli_master_evolve(p0, rates, t)
        _check(p.min() >= -1e-12, f"occupation {p.min()!r} below zero at t={t}")
        _check(abs(p.sum() - 1.0) <= 1e-10, f"occupations sum to {p.sum()!r} at t={t}")
        rows.append([serialize.fmt(t)] + [serialize.fmt(x) for x in p])
    header = ["t"] + [f"p{i}" for i in range(rates.size)]
    emit.write_text("master.csv", serialize.csv_text(header, rows))


def _histories_spec(params) -> HistorySpec:
    dim = int(params["dim"])
    space = TensorSpace((("system", dim),))
    diags: list[str] = []
    hmat = _named_hamiltonian(dim, params["hamiltonian"], diags)
    if hmat is None:
        raise ValidationError("; ".join(diags))
    hamiltonian = Hamiltonian(space, hmat)
    initial = params["initial"]
    if "amplitudes" in initial:
        amps = _parse_amplitudes(initial["amplitudes"], diags, "params.initial.amplitudes")
        if amps is None:
            raise ValidationError("; ".join(diags))
        rho = StateVector(space, amps).density()
    else:
        rho = DensityOperator(space, np.diag(np.asarray(initial["diagonal"], dtype=np.complex128)))
    times = tuple(float(t) for t in params["times"])
    proj_doc = params.get("projectors", {"type": "computational"})
    slot_docs = proj_doc if isinstance(proj_doc, list) else [proj_doc] * len(times)
    if len(slot_docs) != len(times):
        raise ValidationError("one projector family per time slice required")
    psets = []
    for pd in slot_docs:
        if pd.get("type") == "blocks":
            psets.append(ProjectorSet.from_index_blocks(space, pd["blocks"]))
        else:
            psets.append(ProjectorSet.from_basis(computational_basis(space)))
    return HistorySpec(
        hamiltonian=hamiltonian,
        initial_state=rho,
        times=times,
        projector_sets=tuple(psets),
        t0=float(params.get("t0", 0.0)),
    )


def _run_histories(scenario: Scenario, emit: _Emitter) -> None:
    spec = _histories_spec(scenario.params)
    defect = consistency_defect(spec)
    rows = []
    total = 0.0
    for hist in enumerate_histories(spec):
        p = history_probability(spec, hist)
        raw = history_trace_single_sided(spec, hist)
        total += p
        rows.append(
            [
                "|".join(str(h) for h in hist),
                serialize.fmt(p),
                serialize.fmt(raw.real),
                serialize.fmt(raw.imag),
                serialize.fmt(defect),
            ]
        )
    _check(abs(total - 1.0) <= 1e-10, f"history probabilities sum to {total!r}")
    emit.write_text(
        "histories.csv",
        serialize.csv_text(
            ["history", "probability", "single_sided_real", "single_sided_imag", "consistency_defect"],
            rows,
        ),
    )
    emit.write_text(
        "summary.json",
        serialize.dumps({"total_probability": total, "consistency_defect": defect}),
    )


def _run_graham(scenario: Scenario, emit: _Emitter) -> None:
    params = scenario.params
    p = params["p"]
    born = [float(p), 1.0 - float(p)] if _is_number(p) else [float(x) for x in p]
    eps = float(params["epsilon"])
    n_values = params.get("n_values")
    if n_values is None:
        n_values = [int(params["n"])]
    rows = []
    for n in n_values:
        val = graham_deviant_norm(born, int(n), eps)
        rows.append([str(int(n)), serialize.fmt(eps), serialize.fmt(val)])
    emit.write_text("graham.csv", serialize.csv_text(["n", "epsilon", "deviant_norm"], rows))


def _run_ledger_classical(scenario: Scenario, emit: _Emitter) -> None:
    rows = classical_ledger(np.asarray(scenario.params["p"], dtype=np.float64))
    write_ledger_csv(emit.path("ledger.csv"), rows)
    emit.add_existing("ledger.csv")


def _run_ledger_quantum(scenario: Scenario, emit: _Emitter) -> None:
    rows = quantum_collapse_ledger(_amplitudes(scenario.params))
    write_ledger_csv(emit.path("ledger.csv"), rows)
    emit.add_existing("ledger.csv")


def _run_ledger_branching(scenario: Scenario, emit: _Emitter) -> None:
    rows = branching_ledger(
        _amplitudes(scenario.params), env_dim=scenario.params.get("env_dim")
    )
    write_ledger_csv(emit.path("ledger.csv"), rows)
    emit.add_existing("ledger.csv")


_RUNNERS = {
    "premeasurement": _run_premeasurement,
    "chain": _run_chain,
    "branch_recohere": _run_branch_recohere,
    "collapse_mc": _run_collapse_mc,
    "wigner": _run_wigner,
    "schmidt": _run_schmidt,
    "master": _run_master,
    "histories": _run_histories,
    "graham": _run_graham,
    "ledger_classical": _run_ledger_classical,
    "ledger_quantum": _run_ledger_quantum,
    "ledger_branching": _run_ledger_branching,
}


def _load_document(path: str):
    with open(path, "rb") as fh:
        raw = fh.read()
    return json.loads(raw.decode("utf-8")), raw


def run(scenario_path: str, out_dir: str | None = None, seed: int | None = None) -> int:
    """Execute one scenario; returns the process exit code."""
    try:
        doc, raw = _load_document(scenario_path)
    except OSError as exc:
        print(f"error: cannot read {scenario_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"schema: not valid JSON: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    diags = validate_document(doc)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_SCHEMA
    effective_seed = seed if seed is not None else int(doc.get("seed", 0))
    scenario = Scenario(
        kind=doc["kind"], seed=effective_seed, params=doc["params"], raw_bytes=raw
    )
    if out_dir is None:
        stem = os.path.splitext(os.path.basename(scenario_path))[0]
        out_dir = f"{stem}_out"
    try:
        os.makedirs(out_dir, exist_ok=True)
        emit = _Emitter(out_dir)
        _RUNNERS[scenario.kind](scenario, emit)
        emit.manifest(scenario)
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except DecolabError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def validate(scenario_path: str) -> int:
    """Print diagnostics for a scenario file; exit 0 iff clean."""
    try:
        doc, _raw = _load_document(scenario_path)
    except OSError as exc:
        print(f"error: cannot read {scenario_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"schema: not valid JSON: {exc}")
        return EXIT_SCHEMA
    diags = validate_document(doc)
    if diags:
        for d in diags:
            print(d)
        return EXIT_SCHEMA
    print("OK")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="decolab", description="Run or validate decolab scenario files."
    )
    parser.add_argument("--version", action="version", version=f"decolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario and write artifacts")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_val = sub.add_parser("validate", help="check a scenario without running it")
    p_val.add_argument("scenario")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.scenario, out_dir=args.out, seed=args.seed)
    return validate(args.scenario)


if __name__ == "__main__":
    sys.exit(main())
