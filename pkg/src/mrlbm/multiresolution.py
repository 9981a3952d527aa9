"""Prediction/projection operators, transport weights, ghost filling and reconstruction."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .mesh import MultiLevelGrid

# Maps the weights at level gap dl - 1 to those at dl (rows/cols are m = -2..2).
RECURSION_MATRIX = np.array(
    [
        [0.0, -1 / 8, 0.0, 0.0, 0.0],
        [2.0, 9 / 8, 0.0, -1 / 8, 0.0],
        [0.0, 9 / 8, 2.0, 9 / 8, 0.0],
        [0.0, -1 / 8, 0.0, 9 / 8, 2.0],
        [0.0, 0.0, 0.0, -1 / 8, 0.0],
    ]
)
RECURSION_MATRIX.setflags(write=False)


@lru_cache(maxsize=None)
def _weights(c: int, dl: int) -> tuple[float, ...]:
    w = np.zeros(5)
    if c != 0:
        w[2 - c] = 1.0
        w[2] = -1.0
    for _ in range(dl):
        w = RECURSION_MATRIX @ w
    return tuple(w)


def compute_weights(c: int, dl: int) -> np.ndarray:
    """Five transport weights ``C[m]``, ``m = -2..2``, for velocity ``c`` at level gap ``dl``."""
    if c not in (-1, 0, 1):
        raise ValueError(f"velocity {c} leaves the five-point stencil")
    if dl < 0:
        raise ValueError("level gap must be non-negative")
    return np.array(_weights(int(c), int(dl)))


def flux_weights(c: int, dl: int) -> np.ndarray:
    """Weights ``g[m]``, ``m = -2..1``, with ``sum_m C[m] f[k+m] = G(k) - G(k+1)``.

    ``G(k) = sum_m g[m] f[k+m]`` is the signed finest-level value crossing the
    left face of cell ``k`` during one step; it exists because the weights sum
    to zero.
    """
    g = np.cumsum(compute_weights(c, dl))
    return g[:4]


def predict(left, mid, right):
    """Children (even, odd) of ``mid`` from three consecutive same-level values."""
    d = (np.asarray(left) - np.asarray(right)) * 0.125
    return mid + d, mid - d


def project(even, odd):
    return 0.5 * (np.asarray(even) + np.asarray(odd))


def average_leaves(values: np.ndarray, positions: np.ndarray, depth: int) -> np.ndarray:
    """Average blocks of ``2**depth`` consecutive cells starting at ``positions``.

    The reduction is pairwise, one level at a time, exactly as repeated
    projection would compute it.
    """
    block = values[..., positions[:, None] + np.arange(1 << depth)]
    for _ in range(depth):
        block = project(block[..., 0::2], block[..., 1::2])
    return block[..., 0]


def update_ghosts(grid: MultiLevelGrid, fields: dict[int, np.ndarray]) -> None:
    """Fill every ghost cell of ``fields`` in place.

    ``fields[l]`` has its cell index on the last axis, laid out as
    ``grid.levels[l]``. Domain-end copies and averages of finer leaves only
    read real cells and go first; interpolation then runs from the coarsest
    level up so every parent is ready before its children.
    """
    levels = grid.levels
    for l, lay in levels.items():
        if lay.copy_targets.size:
            fields[l][..., lay.pos(lay.copy_targets)] = fields[l][..., lay.pos(lay.copy_sources)]
        for src, ks in lay.project:
            depth = src - l
            start = levels[src].pos(ks << depth)
            fields[l][..., lay.pos(ks)] = average_leaves(fields[src], start, depth)
    for l in sorted(levels):
        lay = levels[l]
        if lay.predict.size:
            parent = levels[l - 1]
            src = fields[l - 1]
            ks = lay.predict
            p = parent.pos(ks // 2)
            even, odd = predict(src[..., p - 1], src[..., p], src[..., p + 1])
            fields[l][..., lay.pos(ks)] = np.where(ks % 2 == 0, even, odd)


def _predict_level(parent: np.ndarray) -> np.ndarray:
    padded = np.concatenate([parent[..., :1], parent, parent[..., -1:]], axis=-1)
    even, odd = predict(padded[..., :-2], parent, padded[..., 2:])
    out = np.empty(parent.shape[:-1] + (2 * parent.shape[-1],))
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return out


def reconstruct(grid: MultiLevelGrid, values: dict[int, np.ndarray], level: int | None = None) -> np.ndarray:
    """Values on every cell of ``level`` (default: the grid's finest) from real-cell values.

    Uses the ghost-filling rules on whole levels: on the coarsest level,
    cells under finer leaves average those leaves; every finer level is
    interpolated from the one below and then overwritten by its own leaves
    and, where it holds leaves, by averages of finer leaves. Domain ends use
    constant extrapolation.
    """
    top = grid.l_max if level is None else level
    if top < grid.l_max:
        raise ValueError(f"cannot reconstruct below the finest level {grid.l_max}")
    leaves = {l: grid.levels[l].real for l in grid.real_levels}

    def fill_from_leaves(l: int, arr: np.ndarray) -> None:
        d_lo, _ = grid.domain_range(l)
        for lv, (a, b) in leaves.items():
            vals = np.asarray(values[lv], dtype=float)
            if lv == l:
                arr[a - d_lo : b - d_lo] = vals
            elif lv > l and l in leaves:
                depth = lv - l
                n = (b - a) >> depth
                arr[(a >> depth) - d_lo : (a >> depth) + n - d_lo] = average_leaves(
                    vals, np.arange(n) << depth, depth
                )

    d_lo, d_hi = grid.domain_range(grid.l_min)
    current = np.full(d_hi - d_lo, np.nan)
    fill_from_leaves(grid.l_min, current)
    for l in range(grid.l_min + 1, top + 1):
        current = _predict_level(current)
        fill_from_leaves(l, current)
    return current
