"""Moment-space lattice Boltzmann algebra and the D1Q3 wave scheme.

Populations and moments are stored with the velocity/moment index on the
first axis, so every function here works on a single vector of shape ``(q,)``
as well as on a field of shape ``(q, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Equilibrium = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    """A generic multiple-relaxation-time scheme.

    Args:
        velocities: integer dimensionless velocities, one per population.
        lattice_velocity: ratio dx/dt, must be positive.
        moment_matrix: invertible ``q x q`` matrix mapping populations to moments.
        relaxation: diagonal of the relaxation matrix. The first
            ``conserved_count`` entries must be zero and the others in (0, 2].
        conserved_count: number of conserved moments.
        equilibrium: maps the conserved moments, shape ``(q_c, ...)``, to the
            full equilibrium moment vector, shape ``(q, ...)``.
    """

    velocities: tuple[int, ...]
    lattice_velocity: float
    moment_matrix: np.ndarray
    relaxation: tuple[float, ...]
    conserved_count: int
    equilibrium: Equilibrium
    inverse_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = len(self.velocities)
        matrix = np.array(self.moment_matrix, dtype=float)
        if matrix.shape != (q, q):
            raise ValueError(f"moment matrix must be {q}x{q}, got {matrix.shape}")
        if len(self.relaxation) != q:
            raise ValueError("one relaxation rate per moment is required")
        if self.lattice_velocity <= 0:
            raise ValueError("lattice velocity must be positive")
        if not 0 < self.conserved_count <= q:
            raise ValueError("conserved_count must lie in [1, q]")
        rates = np.asarray(self.relaxation, dtype=float)
        zero = rates == 0.0
        if not (zero[: self.conserved_count].all() and not zero[self.conserved_count :].any()):
            raise ValueError("relaxation must vanish exactly on the leading conserved slots")
        free = rates[self.conserved_count :]
        if np.any((free <= 0.0) | (free > 2.0)):
            raise ValueError("non-conserved relaxation rates must lie in (0, 2]")
        if abs(np.linalg.det(matrix)) < 1e-12 * max(1.0, np.abs(matrix).max()) ** q:
            raise ValueError("moment matrix is singular")
        matrix.setflags(write=False)
        inverse = np.linalg.inv(matrix)
        inverse.setflags(write=False)
        object.__setattr__(self, "velocities", tuple(int(c) for c in self.velocities))
        object.__setattr__(self, "relaxation", tuple(float(s) for s in rates))
        object.__setattr__(self, "moment_matrix", matrix)
        object.__setattr__(self, "inverse_matrix", inverse)

    @property
    def q(self) -> int:
        return len(self.velocities)


def _check(spec: SchemeSpec, values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 0 or values.shape[0] != spec.q:
        raise ValueError(f"{name} must have leading dimension {spec.q}, got shape {values.shape}")
    return values


def _apply(matrix: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.tensordot(matrix, values, axes=(1, 0))


def moments(spec: SchemeSpec, f: np.ndarray) -> np.ndarray:
    """Return ``M f``."""
    return _apply(spec.moment_matrix, _check(spec, f, "populations"))


def populations(spec: SchemeSpec, m: np.ndarray) -> np.ndarray:
    """Return ``M^-1 m`` using the inverse cached on the scheme."""
    return _apply(spec.inverse_matrix, _check(spec, m, "moments"))


def relax(spec: SchemeSpec, m: np.ndarray) -> np.ndarray:
    """Relax the non-conserved moments towards equilibrium.

    The conserved slots of the result are the input slots themselves, untouched.
    """
    m = _check(spec, m, "moments")
    qc = spec.conserved_count
    out = np.array(m, dtype=float, copy=True)
    if qc == spec.q:
        return out
    eq = np.asarray(spec.equilibrium(m[:qc]), dtype=float)
    s = np.asarray(spec.relaxation[qc:]).reshape((-1,) + (1,) * (m.ndim - 1))
    out[qc:] = (1.0 - s) * m[qc:] + s * eq[qc:]
    return out


def collide(spec: SchemeSpec, f: np.ndarray) -> np.ndarray:
    """Local collision: to moments, relax, back to populations."""
    return populations(spec, relax(spec, moments(spec, f)))


def equilibrium_populations(spec: SchemeSpec, conserved: Sequence[float] | np.ndarray) -> np.ndarray:
    conserved = np.asarray(conserved, dtype=float)
    if conserved.ndim == 0 or conserved.shape[0] != spec.conserved_count:
        raise ValueError(f"expected {spec.conserved_count} conserved moments")
    return populations(spec, spec.equilibrium(conserved))


def d1q3_wave_scheme(c: float, lattice_velocity: float = 1.0, p: float = 1.7) -> SchemeSpec:
    """D1Q3 scheme for the first-order wave system with speed ``c``.

    Conserved moments are ``u`` and ``v``; the third moment relaxes with rate
    ``p`` towards ``c**2 * u / 2``.
    """
    lam = float(lattice_velocity)
    if lam <= 0:
        raise ValueError("lattice velocity must be positive")
    if not 0 < c < lam:
        raise ValueError(f"wave speed must satisfy 0 < c < lambda, got c={c}, lambda={lam}")
    if not 0 < p <= 2:
        raise ValueError(f"relaxation rate must lie in (0, 2], got {p}")
    matrix = np.array(
        [
            [1.0, 1.0, 1.0],
            [0.0, lam, -lam],
            [0.0, lam**2 / 2, lam**2 / 2],
        ]
    )
    half_c2 = c * c / 2

    def equilibrium(conserved: np.ndarray) -> np.ndarray:
        u, v = conserved[0], conserved[1]
        return np.stack([u, v, half_c2 * u])

    return SchemeSpec(
        velocities=(0, 1, -1),
        lattice_velocity=lam,
        moment_matrix=matrix,
        relaxation=(0.0, 0.0, float(p)),
        conserved_count=2,
        equilibrium=equilibrium,
    )
