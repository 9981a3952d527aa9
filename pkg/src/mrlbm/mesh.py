"""Dyadic 1D meshes: per-level real-cell ranges plus the ghost cells they need.

Cell ``k`` at level ``l`` is ``[k 2^-l, (k + 1) 2^-l]``. A mesh is a list of
regions, each tiled by real cells of a single level. Every other cell touched
by the transport stencil (directly or through the interpolation chain that
fills it) is a ghost cell, classified as

* ``copy``: outside the domain, copied from the nearest real cell;
* ``project``: on a level that holds leaves, lying under finer leaves; the
  average of those leaves (pairwise, level by level);
* ``predict``: every other ghost inside the domain; interpolated from its
  parent and the parent's two neighbours one level down.

Ghosts on levels without leaves are therefore always predicted, even under
the fine region, so a fine ghost above a coarse region is an iterated
interpolation of the coarse level alone (including the coarse ghosts that
average the fine leaves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

STENCIL_WIDTH = 2


def cell_center(level: int, k: int) -> float:
    """Center of cell ``k`` at ``level``, exact in binary floating point."""
    return math.ldexp(2 * k + 1, -level - 1)


def cell_centers(level: int, ks: np.ndarray) -> np.ndarray:
    return np.ldexp(2.0 * np.asarray(ks) + 1.0, -level - 1)


def _scaled(x: float, level: int, what: str) -> int:
    s = math.ldexp(x, level)
    if s != math.floor(s):
        raise ValueError(f"{what}={x} is not a multiple of 2^-{level}")
    return int(s)


@dataclass(frozen=True)
class MeshConfig:
    l_min: int
    l_max: int
    x_lo: float = 0.0
    x_hi: float = 3.0
    jump_x: float = 2.0
    mode: Literal["uniform", "jump"] = "jump"

    def __post_init__(self):
        if self.l_min > self.l_max:
            raise ValueError("l_min must not exceed l_max")
        if self.l_min < 0:
            raise ValueError("levels must be non-negative")
        if not self.x_lo < self.jump_x < self.x_hi:
            raise ValueError("interface must lie strictly inside the domain")
        for name in ("x_lo", "x_hi", "jump_x"):
            _scaled(getattr(self, name), self.l_min, name)

    @property
    def l_jump(self) -> int:
        return self.l_max - self.l_min


@dataclass(frozen=True, eq=False)
class LevelLayout:
    """Index bookkeeping for one level.

    ``real`` is the half-open range of leaf indices, ``lo`` the index stored
    at position 0 of the level's arrays and ``size`` their length.
    """

    level: int
    real: tuple[int, int]
    lo: int
    size: int
    copy_targets: np.ndarray
    copy_sources: np.ndarray
    project: tuple[tuple[int, np.ndarray], ...]  # (leaf level averaged from, indices)
    predict: np.ndarray

    @property
    def n_real(self) -> int:
        return self.real[1] - self.real[0]

    @property
    def ghosts(self) -> np.ndarray:
        parts = [self.copy_targets, self.predict] + [ks for _, ks in self.project]
        return np.sort(np.concatenate(parts))

    def pos(self, k):
        """Array position of index ``k`` (int or array)."""
        return k - self.lo

    @property
    def real_slice(self) -> slice:
        return slice(self.real[0] - self.lo, self.real[1] - self.lo)


@dataclass(frozen=True, eq=False)
class Interface:
    """A face shared by real cells of two different levels."""

    fine_level: int
    coarse_level: int
    x: float
    fine_side: Literal["left", "right"]


@dataclass(frozen=True, eq=False)
class MultiLevelGrid:
    x_lo: float
    x_hi: float
    l_min: int
    l_max: int
    regions: tuple[tuple[float, float, int], ...]
    levels: dict[int, LevelLayout]
    interfaces: tuple[Interface, ...] = field(default=())

    @property
    def dx(self) -> float:
        return math.ldexp(1.0, -self.l_max)

    @property
    def real_levels(self) -> list[int]:
        return [l for l in sorted(self.levels) if self.levels[l].n_real > 0]

    @property
    def is_uniform(self) -> bool:
        return len(self.real_levels) == 1

    def real_centers(self, level: int) -> np.ndarray:
        a, b = self.levels[level].real
        return cell_centers(level, np.arange(a, b))

    def real_length(self) -> float:
        return sum(math.ldexp(self.levels[l].n_real, -l) for l in self.levels)

    def domain_range(self, level: int) -> tuple[int, int]:
        return _scaled(self.x_lo, level, "x_lo"), _scaled(self.x_hi, level, "x_hi")

    def leaf_level_of(self, level: int, k: int) -> int | None:
        """Level of the real cells covering cell ``(level, k)``; None outside the domain."""
        for a, b, leaf in self.regions:
            if _scaled(a, level, "a") <= k < _scaled(b, level, "b"):
                return leaf
        return None


def _resolve(regions, levels_real, l_lo, l_hi):
    """Close the ghost dependency graph starting from the stencil needs."""
    kinds: dict[tuple[int, int], tuple] = {}

    def region_leaf(level, k):
        for a, b, leaf in regions:
            if _scaled(a, level, "a") <= k < _scaled(b, level, "b"):
                return leaf
        return None

    def is_real(level, k):
        a, b = levels_real.get(level, (0, 0))
        return a <= k < b

    def need(level, k):
        if is_real(level, k) or (level, k) in kinds:
            return
        if not l_lo <= level <= l_hi:
            raise ValueError(f"ghost ({level}, {k}) needs a level outside [{l_lo}, {l_hi}]")
        leaf = region_leaf(level, k)
        if leaf is None:
            a, b = levels_real.get(level, (0, 0))
            if a == b:
                raise ValueError(f"domain-end ghost ({level}, {k}) has no real cell to copy")
            src = a if k < a else b - 1
            d_lo = _scaled(regions[0][0], level, "x_lo")
            d_hi = _scaled(regions[-1][1], level, "x_hi")
            if d_lo <= k < d_hi:
                raise ValueError(f"cell ({level}, {k}) is inside the domain but unclassified")
            kinds[(level, k)] = ("copy", src)
        elif leaf > level and level in levels_real:
            d = leaf - level
            a, b = levels_real[leaf]
            if not (a <= k << d and (k + 1) << d <= b):
                raise ValueError(f"ghost ({level}, {k}) is not covered by leaves of level {leaf}")
            kinds[(level, k)] = ("project", leaf)
        elif leaf != level:
            kinds[(level, k)] = ("predict",)
            p = k // 2
            for j in (p - 1, p, p + 1):
                need(level - 1, j)
        else:
            raise ValueError(f"cell ({level}, {k}) should be real")

    for level, (a, b) in levels_real.items():
        if a == b:
            continue
        for j in range(1, STENCIL_WIDTH + 1):
            need(level, a - j)
            need(level, b - 1 + j)
    return kinds


def _build(x_lo: float, x_hi: float, regions: list[tuple[float, float, int]], l_max: int) -> MultiLevelGrid:
    merged: list[list] = []
    for a, b, leaf in regions:
        if merged and merged[-1][2] == leaf and merged[-1][1] == a:
            merged[-1][1] = b
        else:
            merged.append([a, b, leaf])
    regions_t = tuple((float(a), float(b), int(leaf)) for a, b, leaf in merged)
    leaf_levels = [r[2] for r in regions_t]
    if len(set(leaf_levels)) != len(leaf_levels):
        raise ValueError("each level may tile at most one contiguous region")
    l_lo, l_hi = min(leaf_levels), max(leaf_levels)
    if l_max < l_hi:
        raise ValueError(f"time-step level {l_max} is coarser than the finest leaves {l_hi}")

    levels_real = {}
    for a, b, leaf in regions_t:
        levels_real[leaf] = (_scaled(a, leaf, "region start"), _scaled(b, leaf, "region end"))
    kinds = _resolve(regions_t, levels_real, l_lo, l_hi)

    levels = {}
    for level in range(l_lo, l_hi + 1):
        real = levels_real.get(level, (0, 0))
        mine = sorted((k, kind) for (l, k), kind in kinds.items() if l == level)
        ks = [k for k, _ in mine] + ([real[0], real[1] - 1] if real[1] > real[0] else [])
        lo, hi = (min(ks), max(ks) + 1) if ks else (0, 0)
        copies = [(k, kind[1]) for k, kind in mine if kind[0] == "copy"]
        as_array = lambda xs: np.array(xs, dtype=np.int64)
        levels[level] = LevelLayout(
            level=level,
            real=real if real[1] > real[0] else (lo, lo),
            lo=lo,
            size=hi - lo,
            copy_targets=as_array([k for k, _ in copies]),
            copy_sources=as_array([s for _, s in copies]),
            project=tuple(
                (src, as_array([k for k, kind in mine if kind[0] == "project" and kind[1] == src]))
                for src in sorted({kind[1] for _, kind in mine if kind[0] == "project"})
            ),
            predict=as_array([k for k, kind in mine if kind[0] == "predict"]),
        )

    interfaces = []
    for (a0, b0, l0), (a1, b1, l1) in zip(regions_t, regions_t[1:]):
        fine_left = l0 > l1
        interfaces.append(
            Interface(
                fine_level=max(l0, l1),
                coarse_level=min(l0, l1),
                x=b0,
                fine_side="left" if fine_left else "right",
            )
        )
    return MultiLevelGrid(
        x_lo=float(x_lo),
        x_hi=float(x_hi),
        l_min=l_lo,
        l_max=l_max,
        regions=regions_t,
        levels=levels,
        interfaces=tuple(interfaces),
    )


def build_uniform_mesh(config: MeshConfig, level: int) -> MultiLevelGrid:
    """Single-level mesh at ``level`` over the configured domain.

    The time step stays tied to ``config.l_max``: a run at ``level < l_max``
    streams with the multilevel weights of gap ``l_max - level``.
    """
    if level > config.l_max:
        raise ValueError(f"level {level} is finer than l_max={config.l_max}")
    _scaled(config.x_lo, level, "x_lo")
    _scaled(config.x_hi, level, "x_hi")
    return _build(config.x_lo, config.x_hi, [(config.x_lo, config.x_hi, level)], config.l_max)


def build_jump_mesh(config: MeshConfig) -> MultiLevelGrid:
    """Fine cells at ``l_max`` left of ``jump_x``, coarse cells at ``l_min`` right of it.

    With ``l_min == l_max`` this is the uniform mesh at that level.
    """
    return _build(
        config.x_lo,
        config.x_hi,
        [(config.x_lo, config.jump_x, config.l_max), (config.jump_x, config.x_hi, config.l_min)],
        config.l_max,
    )


def build_mesh(config: MeshConfig) -> MultiLevelGrid:
    if config.mode == "uniform":
        return build_uniform_mesh(config, config.l_max)
    return build_jump_mesh(config)
