"""Normalized L1 errors and differences on the finest grid, and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from .exact import WaveProblem, exact_u
from .mesh import MultiLevelGrid, cell_centers
from .multiresolution import reconstruct

METRIC_NAMES = ("E_ref", "E_coarse", "D_coarse", "E_jump", "D_jump", "D_jump_refl")


def l1_norm(values, dx: float) -> float:
    return dx * math.fsum(np.abs(np.asarray(values, dtype=float)))


def finest_centers(grid: MultiLevelGrid, level: int | None = None) -> np.ndarray:
    level = grid.l_max if level is None else level
    lo, hi = grid.domain_range(level)
    return cell_centers(level, np.arange(lo, hi))


def exact_norm(grid: MultiLevelGrid, t: float, problem: WaveProblem, level: int | None = None) -> float:
    level = grid.l_max if level is None else level
    return l1_norm(exact_u(t, finest_centers(grid, level), problem), math.ldexp(1.0, -level))


def _on_level(grid: MultiLevelGrid, field_values, level: int) -> np.ndarray:
    if isinstance(field_values, Mapping):
        return reconstruct(grid, field_values, level)
    values = np.asarray(field_values, dtype=float)
    lo, hi = grid.domain_range(level)
    if values.shape != (hi - lo,):
        raise ValueError(f"expected {hi - lo} values at level {level}, got shape {values.shape}")
    return values


def reference_level(grid: MultiLevelGrid, reference) -> int:
    """Level whose cell count matches ``reference``; raises if it is not a valid target."""
    n = np.asarray(reference).shape[-1]
    level = math.log2(n / (grid.x_hi - grid.x_lo))
    if level != int(level) or int(level) < grid.l_max:
        raise ValueError(f"reference with {n} cells does not match any level >= {grid.l_max}")
    return int(level)


def error_vs_exact(
    field_values,
    grid: MultiLevelGrid,
    t: float,
    problem: WaveProblem = WaveProblem(),
    level: int | None = None,
) -> float:
    """Normalized L1 distance between a solution and the exact ``u`` at time ``t``.

    ``field_values`` is either a ``{level: real-cell values}`` mapping, which
    is reconstructed to ``level`` (default: the grid's finest), or an array
    already given on that level.
    """
    level = grid.l_max if level is None else level
    u = _on_level(grid, field_values, level)
    exact = exact_u(t, finest_centers(grid, level), problem)
    dx = math.ldexp(1.0, -level)
    return l1_norm(u - exact, dx) / l1_norm(exact, dx)


def diff_vs_ref(
    field_values,
    grid: MultiLevelGrid,
    reference: np.ndarray,
    t: float,
    problem: WaveProblem = WaveProblem(),
) -> float:
    """Normalized L1 difference to a reference sampled on a uniform finest grid.

    The solution is reconstructed to the reference's level, which must not be
    coarser than the solution's finest level.
    """
    level = reference_level(grid, reference)
    u = _on_level(grid, field_values, level)
    dx = math.ldexp(1.0, -level)
    return l1_norm(u - np.asarray(reference, dtype=float), dx) / exact_norm(grid, t, problem, level)


def reflected_diff(
    field_values: Mapping[int, np.ndarray],
    grid: MultiLevelGrid,
    reference: np.ndarray,
    t: float,
    problem: WaveProblem = WaveProblem(),
) -> float:
    """Normalized L1 difference restricted to the finest leaves left of the interface."""
    a, b, leaf = grid.regions[0]
    if leaf != grid.l_max:
        raise ValueError("the left subdomain must be meshed at the finest level")
    if reference_level(grid, reference) != grid.l_max:
        raise ValueError("reference must be at the jump mesh's finest level")
    lo, _ = grid.domain_range(grid.l_max)
    k_a, k_b = grid.levels[leaf].real
    left = np.asarray(field_values[leaf], dtype=float)
    reference = np.asarray(reference, dtype=float)[k_a - lo : k_b - lo]
    return l1_norm(left - reference, grid.dx) / exact_norm(grid, t, problem)


def convergence_rates(values: Sequence[float]) -> list[float]:
    """``log2(v[i-1] / v[i])`` for consecutive entries (one fewer than the input)."""
    values = [float(v) for v in values]
    if len(values) < 2:
        raise ValueError("need at least two values")
    if any(not v > 0 for v in values):
        raise ValueError("rates need strictly positive values")
    return [math.log2(a / b) for a, b in zip(values, values[1:])]


@dataclass
class ErrorReport:
    l_max: int
    l_jump: int
    E_ref: float
    E_coarse: float
    D_coarse: float
    E_jump: float
    D_jump: float
    D_jump_refl: float
    rates: dict[str, float | None] = field(default_factory=lambda: dict.fromkeys(METRIC_NAMES))

    def __post_init__(self):
        for name in METRIC_NAMES:
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def attach_rates(rows: Sequence[ErrorReport]) -> None:
    """Fill ``rates`` of each row from the row with ``l_max - 1`` in the same ``l_jump`` block.

    A rate is left empty when either value is zero.
    """
    by_key = {(r.l_jump, r.l_max): r for r in rows}
    for r in rows:
        prev = by_key.get((r.l_jump, r.l_max - 1))
        for name in METRIC_NAMES:
            rate = None
            if prev is not None:
                a, b = getattr(prev, name), getattr(r, name)
                if a > 0 and b > 0:
                    rate = math.log2(a / b)
            r.rates[name] = rate
