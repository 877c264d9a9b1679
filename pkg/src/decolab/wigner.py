"""Phase-space representation of one continuous degree of freedom on a grid.

Conventions (hbar = 1):

    W(p, q) = (1/pi) * integral dx  exp(2 i p x) rho(q + x, q - x)

sampled on q_j = q_min + j dq, j = 0..N-1, with dq = (q_max - q_min)/N and
N a power of two.  The x integral runs over the same lattice, so the
conjugate momentum grid is p_m = (m - N/2) dp with dp = pi/(N dq); with
that pairing the double Riemann sum of W over phase space telescopes to the
trace exactly.  States far narrower or wider than the grid are rejected
through a boundary-amplitude check instead of silently wrapping.

The transform is also expressible as the trace against a phase-point
kernel; :func:`pauli_kernel_value` returns that kernel's matrix elements
(a Kronecker comb standing in for the delta on the midpoint lattice) and
:func:`wigner_via_kernel` contracts it directly, without the FFT, as an
independent route to the same surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import serialize
from .errors import ValidationError, VALIDITY_ATOL

BOUNDARY_FLOOR = 1e-8
NORMALIZATION_ATOL = 1e-6
IMAG_RESIDUE_ATOL = 1e-10
_GRID_ALIGN_ATOL = 1e-9


def grid_points(q_min: float, q_max: float, n_points: int) -> np.ndarray:
    dq = (q_max - q_min) / n_points
    return q_min + dq * np.arange(n_points)


@dataclass(frozen=True, eq=False)
class GridState:
    """Wavefunction samples (1d) or density-matrix samples (2d) on the q grid."""

    q_min: float
    q_max: float
    n_points: int
    values: np.ndarray

    def __post_init__(self):
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise ValidationError(f"n_points must be a power of two, got {n}")
        if not self.q_max > self.q_min:
            raise ValidationError("q_max must exceed q_min")
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.shape not in ((n,), (n, n)):
            raise ValidationError(f"values shape {v.shape} incompatible with {n} grid points")
        if v.ndim == 1:
            total = float((np.abs(v) ** 2).sum() * self.dq)
        else:
            if np.abs(v - v.conj().T).max() > VALIDITY_ATOL:
                raise ValidationError("density samples are not Hermitian")
            total = float(np.trace(v).real * self.dq)
        if abs(total - 1.0) > NORMALIZATION_ATOL:
            raise ValidationError(f"grid normalization is {total:.8g}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "q_min", float(self.q_min))
        object.__setattr__(self, "q_max", float(self.q_max))

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_points

    @property
    def q_grid(self) -> np.ndarray:
        return grid_points(self.q_min, self.q_max, self.n_points)

    def density_samples(self) -> np.ndarray:
        """rho(z, z') = psi(z) conj(psi(z')) for pure input, or the matrix itself."""
        if self.values.ndim == 1:
            return np.outer(self.values, self.values.conj())
        return self.values

    def boundary_magnitude(self) -> float:
        if self.values.ndim == 1:
            return float(max(abs(self.values[0]), abs(self.values[-1])))
        edges = [self.values[0, :], self.values[-1, :], self.values[:, 0], self.values[:, -1]]
        return float(max(np.abs(e).max() for e in edges))


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Real phase-space samples W[m, j] = W(p_m, q_j)."""

    q_min: float
    q_max: float
    n_points: int
    values: np.ndarray

    def __post_init__(self):
        n = int(self.n_points)
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (n, n):
            raise ValidationError(f"values shape {v.shape}, expected {(n, n)}")
        total = float(v.sum() * self.dq * self.dp)
        if abs(total - 1.0) > NORMALIZATION_ATOL:
            raise ValidationError(f"phase-space normalization is {total:.8g}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n_points", n)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_points

    @property
    def dp(self) -> float:
        return math.pi / (self.n_points * self.dq)

    @property
    def q_grid(self) -> np.ndarray:
        return grid_points(self.q_min, self.q_max, self.n_points)

    @property
    def p_grid(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.dp


def _offset_indices(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.where(k < n // 2, k, k - n)


def _shear_samples(rho: np.ndarray, n: int) -> np.ndarray:
    """T[k', j] = rho(q_j + x_k, q_j - x_k) with out-of-range samples zero."""
    kk = _offset_indices(n)
    j = np.arange(n)
    ip = j[None, :] + kk[:, None]
    im = j[None, :] - kk[:, None]
    valid = (ip >= 0) & (ip < n) & (im >= 0) & (im < n)
    t = np.where(valid, rho[ip.clip(0, n - 1), im.clip(0, n - 1)], 0.0)
    return t


def wigner_transform(state: GridState) -> WignerGrid:
    """Fourier transform of the sheared density samples; exact trace pairing."""
    if state.boundary_magnitude() >= BOUNDARY_FLOOR:
        raise ValidationError(
            f"grid too narrow: boundary amplitude {state.boundary_magnitude():.3e}"
        )
    n = state.n_points
    rho = state.density_samples()
    t = _shear_samples(rho, n)
    signs = np.where(_offset_indices(n) % 2 == 0, 1.0, -1.0)
    w_complex = (state.dq / math.pi) * n * np.fft.ifft(signs[:, None] * t, axis=0)
    residue = float(np.abs(w_complex.imag).max())
    if residue > IMAG_RESIDUE_ATOL:
        raise ValidationError(f"imaginary residue {residue:.3e} in the transform")
    return WignerGrid(state.q_min, state.q_max, n, w_complex.real)


def marginals(w: WignerGrid) -> tuple[np.ndarray, np.ndarray]:
    """(position density, momentum density): sums over the conjugate axis."""
    pos = w.values.sum(axis=0) * w.dp
    mom = w.values.sum(axis=1) * w.dq
    return pos, mom


def _aligned_index(x: float, origin: float, step: float, what: str) -> int:
    ratio = (x - origin) / step
    idx = round(ratio)
    if abs(ratio - idx) > _GRID_ALIGN_ATOL:
        raise ValidationError(f"{what} {x} is not on the grid")
    return int(idx)


def pauli_kernel_value(state: GridState, p: float, q: float, z: float, z_prime: float) -> complex:
    """Matrix element of the phase-point kernel at grid-aligned arguments.

    The delta in q - (z + z') / 2 becomes a Kronecker comb on the midpoint
    lattice (half the grid step), normalized by 1/dq.  Arguments off their
    lattices are rejected rather than rounded.
    """
    dq = state.dq
    _aligned_index(z, state.q_min, dq, "z")
    _aligned_index(z_prime, state.q_min, dq, "z_prime")
    q_idx2 = _aligned_index(q, state.q_min, dq / 2.0, "q (midpoint lattice)")
    mid2 = _aligned_index((z + z_prime) / 2.0, state.q_min, dq / 2.0, "midpoint")
    if q_idx2 != mid2:
        return 0.0 + 0.0j
    return complex(np.exp(1j * p * (z - z_prime)) / (2.0 * math.pi * dq))


def wigner_via_kernel(state: GridState) -> np.ndarray:
    """Contract the phase-point kernel against the density samples directly.

    The (z, z') double sum collapses on the midpoint comb to the pairs
    (q + k dq, q - k dq); the change of variables to midpoint and offset
    carries a Jacobian factor 2, so each pair enters with measure 2 dq^2.
    No FFT is used; this is the cross-check route for wigner_transform.
    """
    if state.boundary_magnitude() >= BOUNDARY_FLOOR:
        raise ValidationError(
            f"grid too narrow: boundary amplitude {state.boundary_magnitude():.3e}"
        )
    n = state.n_points
    dq = state.dq
    dp = math.pi / (n * dq)
    rho = state.density_samples()
    kk = _offset_indices(n)
    # rho(z', z) for the pairs z = q_j + k dq, z' = q_j - k dq.
    j = np.arange(n)
    ip = j[None, :] + kk[:, None]
    im = j[None, :] - kk[:, None]
    valid = (ip >= 0) & (ip < n) & (im >= 0) & (im < n)
    t = np.where(valid, rho[im.clip(0, n - 1), ip.clip(0, n - 1)], 0.0)
    p_vals = (np.arange(n) - n // 2) * dp
    phases = np.exp(1j * 2.0 * dq * np.outer(p_vals, kk))
    kernel_scale = 1.0 / (2.0 * math.pi * dq)
    w = (phases @ t) * kernel_scale * 2.0 * dq * dq
    residue = float(np.abs(w.imag).max())
    if residue > IMAG_RESIDUE_ATOL:
        raise ValidationError(f"imaginary residue {residue:.3e} in the kernel contraction")
    return w.real


def oscillator_state(
    n: int, q_min: float = -8.0, q_max: float = 8.0, n_points: int = 256
) -> GridState:
    """Unit-frequency oscillator eigenstate, renormalized on the grid."""
    if n < 0:
        raise ValidationError("quantum number must be nonnegative")
    q = grid_points(q_min, q_max, n_points)
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    herm = np.polynomial.hermite.hermval(q, coeffs)
    psi = herm * np.exp(-0.5 * q * q)
    dq = (q_max - q_min) / n_points
    psi = psi / math.sqrt(float((np.abs(psi) ** 2).sum() * dq))
    return GridState(q_min, q_max, n_points, psi)


def gaussian_packet_samples(
    center: float, momentum: float, width: float, q: np.ndarray
) -> np.ndarray:
    return np.exp(-((q - center) ** 2) / (2.0 * width**2) + 1j * momentum * q)


def two_packet_superposition(
    center: float,
    momentum: float = 0.0,
    width: float = 1.0,
    q_min: float = -12.0,
    q_max: float = 12.0,
    n_points: int = 256,
) -> GridState:
    """Coherent sum of two packets at +/- center; shows interference fringes."""
    q = grid_points(q_min, q_max, n_points)
    psi = gaussian_packet_samples(center, momentum, width, q) + gaussian_packet_samples(
        -center, -momentum, width, q
    )
    dq = (q_max - q_min) / n_points
    psi = psi / math.sqrt(float((np.abs(psi) ** 2).sum() * dq))
    return GridState(q_min, q_max, n_points, psi)


def two_packet_mixture(
    center: float,
    momentum: float = 0.0,
    width: float = 1.0,
    q_min: float = -12.0,
    q_max: float = 12.0,
    n_points: int = 256,
) -> GridState:
    """Equal-weight incoherent mixture of the same two packets; no fringes."""
    q = grid_points(q_min, q_max, n_points)
    dq = (q_max - q_min) / n_points
    rho = np.zeros((n_points, n_points), dtype=np.complex128)
    for sign in (+1.0, -1.0):
        psi = gaussian_packet_samples(sign * center, sign * momentum, width, q)
        psi = psi / math.sqrt(float((np.abs(psi) ** 2).sum() * dq))
        rho += 0.5 * np.outer(psi, psi.conj())
    return GridState(q_min, q_max, n_points, rho)


def write_wigner_csv(path, w: WignerGrid) -> None:
    """Long-format (q, p, w) table, q outer loop."""
    rows = []
    qs = w.q_grid
    ps = w.p_grid
    for j, qv in enumerate(qs):
        for m, pv in enumerate(ps):
            rows.append([serialize.fmt(qv), serialize.fmt(pv), serialize.fmt(w.values[m, j])])
    with open(path, "w", newline="") as fh:
        fh.write(serialize.csv_text(["q", "p", "w"], rows))


def write_marginals_csv(path, w: WignerGrid) -> None:
    pos, mom = marginals(w)
    rows = []
    qs = w.q_grid
    ps = w.p_grid
    for i in range(w.n_points):
        rows.append(
            [
                serialize.fmt(qs[i]),
                serialize.fmt(pos[i]),
                serialize.fmt(ps[i]),
                serialize.fmt(mom[i]),
            ]
        )
    with open(path, "w", newline="") as fh:
        fh.write(serialize.csv_text(["q", "position_density", "p", "momentum_density"], rows))


def write_wigner_binary(path_prefix, w: WignerGrid) -> tuple[str, str]:
    """Row-major little-endian float64 dump plus a JSON metadata sidecar."""
    bin_path = f"{path_prefix}.bin"
    meta_path = f"{path_prefix}.meta.json"
    data = np.ascontiguousarray(w.values, dtype="<f8").tobytes()
    with open(bin_path, "wb") as fh:
        fh.write(data)
    meta = {
        "dtype": "<f8",
        "order": "C",
        "rows": "p",
        "cols": "q",
        "shape": [w.n_points, w.n_points],
        "q_min": w.q_min,
        "q_max": w.q_max,
        "dq": w.dq,
        "dp": w.dp,
        "p_min": float(w.p_grid[0]),
    }
    with open(meta_path, "w", newline="") as fh:
        fh.write(serialize.dumps(meta))
    return bin_path, meta_path
