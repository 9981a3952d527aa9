"""Experiment runner: error table sweeps and solution snapshots.

Usage::

    mrlbm table --lmax-range 7:11 --ljump 1,2,3 --out table.csv
    mrlbm snapshot --lmax 10 --ljump 3 --times 0,1.5625

Settings may also come from a ``key = value`` file passed with ``--config``;
command-line flags win. ``MRLBM_OUTPUT_DIR`` redirects relative output paths.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exact import WaveProblem, gaussian_u0
from .mesh import MeshConfig, MultiLevelGrid, build_jump_mesh, build_uniform_mesh
from .metrics import METRIC_NAMES, ErrorReport, attach_rates, diff_vs_ref, error_vs_exact, reflected_diff
from .scheme import d1q3_wave_scheme
from .solver import FieldState, InstabilityError, init_at_equilibrium, run, step, steps_to

log = logging.getLogger("mrlbm")

OUTPUT_DIR_ENV = "MRLBM_OUTPUT_DIR"
CSV_HEADER = ["l_max", "l_jump", *METRIC_NAMES, *(f"rate_{n}" for n in METRIC_NAMES)]


@dataclass
class ExperimentConfig:
    l_max_range: tuple[int, int] = (7, 13)
    l_jumps: tuple[int, ...] = (1, 2, 3, 4, 5)
    lattice_velocity: float = 1.0
    p: float = 1.7
    c: float = 0.5
    T: float = 1.5625
    x_lo: float = 0.0
    x_hi: float = 3.0
    jump_x: float = 2.0
    out: str = "table.csv"
    snapshot_dir: str = "snapshots"
    snapshot_times: tuple[float, ...] = (0.0, 1.5625)
    snapshot_l_max: int = 10
    snapshot_l_jump: int = 3
    conservative_interface: bool = False
    jobs: int = 1

    def __post_init__(self):
        lo, hi = self.l_max_range
        if lo > hi:
            raise ValueError("empty l_max range")
        if any(j < 0 for j in self.l_jumps):
            raise ValueError("level jumps must be non-negative")
        if lo - max(self.l_jumps) < 1:
            raise ValueError("l_max - l_jump must be at least 1")
        if self.snapshot_l_max - self.snapshot_l_jump < 1:
            raise ValueError("snapshot l_max - l_jump must be at least 1")
        if self.T < 0:
            raise ValueError("final time must be non-negative")
        d1q3_wave_scheme(self.c, self.lattice_velocity, self.p)

    @property
    def l_max_values(self) -> list[int]:
        return list(range(self.l_max_range[0], self.l_max_range[1] + 1))

    def mesh(self, l_max: int, l_jump: int) -> MeshConfig:
        return MeshConfig(l_min=l_max - l_jump, l_max=l_max, x_lo=self.x_lo, x_hi=self.x_hi, jump_x=self.jump_x)

    @property
    def problem(self) -> WaveProblem:
        return WaveProblem(c=self.c, u0=gaussian_u0, T=self.T)


def _parse_range(text: str) -> tuple[int, int]:
    for sep in (":", "..", "-"):
        if sep in text:
            a, b = text.split(sep, 1)
            return int(a), int(b)
    return int(text), int(text)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(" ", "").split(",") if t)


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key in the config file -> (field name, parser)
_KEYS = {
    "lmax_range": ("l_max_range", _parse_range),
    "ljump": ("l_jumps", _parse_ints),
    "lambda": ("lattice_velocity", float),
    "p": ("p", float),
    "c": ("c", float),
    "T": ("T", float),
    "x_lo": ("x_lo", float),
    "x_hi": ("x_hi", float),
    "jump_x": ("jump_x", float),
    "out": ("out", str),
    "snapshot_dir": ("snapshot_dir", str),
    "snapshot_times": ("snapshot_times", _parse_floats),
    "snapshot_lmax": ("snapshot_l_max", int),
    "snapshot_ljump": ("snapshot_l_jump", int),
    "conservative_interface": ("conservative_interface", _parse_bool),
    "jobs": ("jobs", int),
}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        name, parse = _KEYS[key]
        values[name] = parse(value)
    return values


def _output_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _simulate(config: ExperimentConfig, kind: str, l_max: int, l_jump: int) -> dict[int, np.ndarray]:
    grid = _grid(config, kind, l_max, l_jump)
    state = _initial_state(config, grid)
    run(state, config.T)
    return state.moment(0)


def _grid(config: ExperimentConfig, kind: str, l_max: int, l_jump: int) -> MultiLevelGrid:
    mesh = config.mesh(l_max, l_jump)
    if kind == "ref":
        return build_uniform_mesh(mesh, l_max)
    if kind == "coarse":
        return build_uniform_mesh(mesh, l_max - l_jump)
    if kind == "jump":
        return build_jump_mesh(mesh)
    raise ValueError(f"unknown run kind {kind!r}")


def _initial_state(config: ExperimentConfig, grid: MultiLevelGrid) -> FieldState:
    scheme = d1q3_wave_scheme(config.c, config.lattice_velocity, config.p)
    return init_at_equilibrium(
        grid, scheme, gaussian_u0, np.zeros_like, conservative_interface=config.conservative_interface
    )


def _run_task(args):
    config, kind, l_max, l_jump = args
    return (kind, l_max, l_jump), _simulate(config, kind, l_max, l_jump)


def run_table(config: ExperimentConfig, write: bool = True) -> list[ErrorReport]:
    """Run reference, coarse and jump simulations for every (l_max, l_jump) and tabulate.

    Rows are ordered by (l_jump, l_max) whatever the completion order. The
    CSV goes to ``config.out`` unless ``write`` is false.
    """
    tasks = [(config, "ref", l, 0) for l in config.l_max_values]
    for j in config.l_jumps:
        for l in config.l_max_values:
            tasks += [(config, "coarse", l, j), (config, "jump", l, j)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = dict(pool.map(_run_task, tasks))
    else:
        results = dict(map(_run_task, tasks))

    T, problem = config.T, config.problem
    rows = []
    for j in config.l_jumps:
        for l in config.l_max_values:
            ref_grid = _grid(config, "ref", l, j)
            u_ref = results[("ref", l, 0)][l]
            coarse_grid = _grid(config, "coarse", l, j)
            jump_grid = _grid(config, "jump", l, j)
            coarse_u = results[("coarse", l, j)]
            jump_u = results[("jump", l, j)]
            rows.append(
                ErrorReport(
                    l_max=l,
                    l_jump=j,
                    E_ref=error_vs_exact(u_ref, ref_grid, T, problem),
                    E_coarse=error_vs_exact(coarse_u, coarse_grid, T, problem),
                    D_coarse=diff_vs_ref(coarse_u, coarse_grid, u_ref, T, problem),
                    E_jump=error_vs_exact(jump_u, jump_grid, T, problem),
                    D_jump=diff_vs_ref(jump_u, jump_grid, u_ref, T, problem),
                    D_jump_refl=reflected_diff(jump_u, jump_grid, u_ref, T, problem),
                )
            )
    attach_rates(rows)
    if write:
        path = _output_path(config.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_csv(rows))
        log.info("wrote %s", path)
    return rows


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.5e}"


def format_csv(rows: list[ErrorReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(
            [r.l_max, r.l_jump]
            + [_fmt(getattr(r, n)) for n in METRIC_NAMES]
            + [_fmt(r.rates.get(n)) for n in METRIC_NAMES]
        )
    return buf.getvalue()


def _profile(state: FieldState) -> list[tuple[float, float, int]]:
    out = []
    for l, u in state.moment(0).items():
        for x, value in zip(state.grid.real_centers(l), u):
            out.append((float(x), float(value), l))
    out.sort()
    return out


def run_snapshot(
    config: ExperimentConfig,
    l_max: int | None = None,
    l_jump: int | None = None,
    times: tuple[float, ...] | None = None,
) -> dict[str, Path]:
    """Write ``x u level`` profiles of the jump and reference runs at each requested time.

    One file per run, one ``# t=<time>`` block per time. Times must be whole
    numbers of steps.
    """
    l_max = config.snapshot_l_max if l_max is None else l_max
    l_jump = config.snapshot_l_jump if l_jump is None else l_jump
    times = tuple(sorted(config.snapshot_times if times is None else times))
    out_dir = _output_path(config.snapshot_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for kind in ("jump", "ref"):
        state = _initial_state(config, _grid(config, kind, l_max, l_jump))
        lines = []
        for t in times:
            n = steps_to(state, t) - state.steps
            if n < 0:
                raise ValueError("snapshot times must be non-negative")
            for _ in range(n):
                step(state)
            lines.append(f"# t={t:.17g}")
            lines += [f"{x:.17g} {u:.17g} {lv}" for x, u, lv in _profile(state)]
        name = f"{kind}_lmax{l_max}_ljump{l_jump}.txt" if kind == "jump" else f"ref_lmax{l_max}.txt"
        path = out_dir / name
        path.write_text("\n".join(lines) + "\n")
        paths[kind] = path
        log.info("wrote %s", path)
    return paths


def read_snapshot(path: Path | str) -> dict[float, np.ndarray]:
    """Read a snapshot file back into ``{t: array of (x, u, level) rows}``."""
    blocks: dict[float, list] = {}
    current = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# t="):
            current = float(line[4:])
            blocks[current] = []
        elif line.strip():
            x, u, lv = line.split()
            blocks[current].append((float(x), float(u), int(lv)))
    return {t: np.array(rows) for t, rows in blocks.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrlbm", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--p", type=float, help="relaxation rate of the third moment")
        p.add_argument("--c", type=float, help="wave speed")
        p.add_argument("--T", type=float, help="final time")
        p.add_argument("--lambda", dest="lattice_velocity", type=float, help="lattice velocity")
        p.add_argument(
            "--conservative-interface",
            action="store_const",
            const=True,
            default=None,
            help="use the fine-side face value at the level jump",
        )

    table = sub.add_parser("table", help="error table over (l_max, l_jump)")
    common(table)
    table.add_argument("--lmax-range", help="e.g. 7:13")
    table.add_argument("--ljump", help="comma-separated list, e.g. 1,2,3")
    table.add_argument("--out", help="CSV path")
    table.add_argument("--jobs", type=int, help="parallel worker processes")

    snap = sub.add_parser("snapshot", help="solution profiles of a jump run and its reference")
    common(snap)
    snap.add_argument("--lmax", type=int)
    snap.add_argument("--ljump", type=int)
    snap.add_argument("--times", help="comma-separated times")
    snap.add_argument("--out", help="output directory")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    for name in ("p", "c", "T", "lattice_velocity", "conservative_interface"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    if args.command == "table":
        if args.lmax_range:
            values["l_max_range"] = _parse_range(args.lmax_range)
        if args.ljump:
            values["l_jumps"] = _parse_ints(args.ljump)
        if args.out:
            values["out"] = args.out
        if args.jobs:
            values["jobs"] = args.jobs
    else:
        if args.lmax is not None:
            values["snapshot_l_max"] = args.lmax
        if args.ljump is not None:
            values["snapshot_l_jump"] = args.ljump
        if args.times:
            values["snapshot_times"] = _parse_floats(args.times)
        if args.out:
            values["snapshot_dir"] = args.out
    return ExperimentConfig(**values)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"mrlbm: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "table":
            rows = run_table(config)
            print(format_csv(rows), end="")
        else:
            for path in run_snapshot(config).values():
                print(path)
    except InstabilityError as exc:
        print(f"mrlbm: simulation diverged: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mrlbm: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
