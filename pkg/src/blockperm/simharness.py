"""Monte Carlo harness: Gaussian mean-shift power studies and variance sweeps.

Reproduces the reference simulation grid at desk scale: two Gaussian groups
of n points each, one optionally mean-shifted, tested with the restricted and
full schemes over a grid of n, with rejection rates and binomial standard
errors written to a plot-ready CSV.  All randomness flows from one master
seed through spawned substreams, so a run is reproducible byte-for-byte.
"""

from __future__ import annotations

import configparser
import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics, permtest
from .core import LABEL_A, LABEL_B, LabelState, PooledSample
from .errors import BlockPermError, DesignError
from .rng import as_generator, as_seed_sequence

SCHEME_SHORT = {
    permtest.RESTRICTED_MATCHING: "block",
    permtest.RESTRICTED_SINGLE_SWAP: "single",
    permtest.FULL_RELABEL: "full",
}
SCHEME_LONG = {v: k for k, v in SCHEME_SHORT.items()}

STATISTIC_SHORT = {permtest.MEAN_DIFF: "mean", permtest.MMD2: "mmd"}
STATISTIC_LONG = {v: k for k, v in STATISTIC_SHORT.items()}

RESULTS_COLUMNS = [
    "stat", "d", "n", "scheme", "scenario", "rejection_rate", "stderr",
    "n_sim", "blocks", "rho", "alpha", "seed", "design_errors",
]
VARIANCE_COLUMNS = ["n", "h", "var_rest", "var_full", "ratio", "var_full_formula"]

# Reference-grid block counts per group size.
TABLE1_BLOCKS_MMD = {32: 2, 64: 3, 128: 4, 256: 5}
TABLE1_BLOCKS_MEAN = {32: 3, 64: 4, 128: 5, 256: 6}
TABLE1_SHIFT = 0.4
TABLE1_N_GRID = (32, 64, 128, 256)


@dataclass
class ExperimentSpec:
    """One simulation cell grid: statistic, dimension, shift, sizes, schemes."""

    statistic: str = permtest.MEAN_DIFF
    d: int = 1
    n_grid: tuple = (32, 64)
    shift: tuple = (0.0,)
    n_sim: int = 100
    scenario: str = "alternative"
    schemes: tuple = (permtest.RESTRICTED_MATCHING, permtest.FULL_RELABEL)
    blocks_by_n: dict = field(default_factory=dict)
    n_perms: int = 100
    alpha: float = 0.05
    rho: float = 0.2
    bandwidth: float | str = "median"
    sided: str = "two"
    seed: int = 0
    variance_sweep: bool = False
    sweep_replicates: int = 1000

    def __post_init__(self) -> None:
        if self.scenario not in ("null", "alternative"):
            raise ValueError(f"scenario must be 'null' or 'alternative', got {self.scenario!r}")
        if not self.n_grid:
            raise ValueError("n_grid must be nonempty")
        if self.n_sim < 1:
            raise ValueError("n_sim must be >= 1")
        shift = np.zeros(self.d)
        given = np.atleast_1d(np.asarray(self.shift, dtype=float))
        if given.size > self.d:
            raise ValueError(f"shift has {given.size} entries but d={self.d}")
        shift[: given.size] = given
        self.shift = tuple(float(x) for x in shift)

    def shift_vector(self, scenario: str | None = None) -> np.ndarray:
        scenario = self.scenario if scenario is None else scenario
        if scenario == "null":
            return np.zeros(self.d)
        return np.asarray(self.shift, dtype=float)

    def blocks_for(self, n: int) -> int:
        try:
            return self.blocks_by_n[n]
        except KeyError:
            raise ValueError(f"no block count configured for n={n}") from None


@dataclass(frozen=True)
class CellResult:
    stat: str
    d: int
    n: int
    scheme: str
    scenario: str
    rejection_rate: float
    stderr: float
    n_sim: int
    blocks: int
    rho: float
    alpha: float
    seed: int
    design_errors: int
    rejects: int
    mean_runtime: float


@dataclass(frozen=True)
class SweepRow:
    n: int
    h: float
    var_rest: float
    var_full: float
    ratio: float
    var_full_formula: float | None


def generate_gaussian_pair(n: int, d: int, shift, seed) -> tuple[PooledSample, LabelState]:
    """n group-A points from N(0, I_d) and n group-B points from N(shift, I_d).

    Variates come from the stream's `standard_normal` (ziggurat transform):
    first the A block row-by-row, then the B block, so a given stream always
    produces the same dataset.
    """
    rng = as_generator(seed)
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.size != d:
        raise ValueError(f"shift has {shift.size} entries, expected d={d}")
    x = rng.standard_normal((n, d))
    y = shift + rng.standard_normal((n, d))
    data = np.vstack([x, y])
    codes = np.concatenate([
        np.full(n, LABEL_A, dtype=np.uint8),
        np.full(n, LABEL_B, dtype=np.uint8),
    ])
    return PooledSample(data, n, n), LabelState(codes)


def _cell_config(spec: ExperimentSpec, scheme: str, n: int, seed) -> permtest.TestConfig:
    return permtest.TestConfig(
        statistic=spec.statistic,
        scheme=scheme,
        n_perms=spec.n_perms,
        alpha=spec.alpha,
        rho=spec.rho,
        blocks=spec.blocks_for(n),
        bandwidth=spec.bandwidth,
        seed=seed,
        sided=spec.sided,
    )


def run_power_study(spec: ExperimentSpec) -> list[CellResult]:
    """Rejection rate per (n, scheme) cell over n_sim fresh-data replicates.

    Design failures (empty swap set after retries) are counted per cell and
    never silently dropped; the rejection rate stays rejections / n_sim.
    """
    root = as_seed_sequence(spec.seed)
    cells = [(n, scheme) for n in spec.n_grid for scheme in spec.schemes]
    cell_seeds = root.spawn(len(cells))
    results = []
    for (n, scheme), cell_seed in zip(cells, cell_seeds):
        rejects = 0
        design_errors = 0
        elapsed = 0.0
        for rep_seed in cell_seed.spawn(spec.n_sim):
            data_seed, test_seed = rep_seed.spawn(2)
            sample, labels = generate_gaussian_pair(
                n, spec.d, spec.shift_vector(), data_seed
            )
            cfg = _cell_config(spec, scheme, n, test_seed)
            start = time.perf_counter()
            try:
                result = permtest.run_test(sample, labels, cfg)
            except DesignError:
                design_errors += 1
            else:
                rejects += int(result.reject)
            elapsed += time.perf_counter() - start
        rate = rejects / spec.n_sim
        results.append(CellResult(
            stat=STATISTIC_SHORT[spec.statistic],
            d=spec.d,
            n=n,
            scheme=SCHEME_SHORT[scheme],
            scenario=spec.scenario,
            rejection_rate=rate,
            stderr=float(np.sqrt(rate * (1.0 - rate) / spec.n_sim)),
            n_sim=spec.n_sim,
            blocks=spec.blocks_for(n),
            rho=spec.rho,
            alpha=spec.alpha,
            seed=spec.seed,
            design_errors=design_errors,
            rejects=rejects,
            mean_runtime=elapsed / spec.n_sim,
        ))
    return results


def run_variance_sweep(spec: ExperimentSpec) -> list[SweepRow]:
    """Per n: Monte Carlo variance of the reference statistic under the
    restricted scheme and under full relabeling, plus their ratio."""
    restricted = [s for s in spec.schemes if s != permtest.FULL_RELABEL]
    scheme = restricted[0] if restricted else permtest.RESTRICTED_SINGLE_SWAP
    root = as_seed_sequence(spec.seed)
    rows = []
    for n, n_seed in zip(spec.n_grid, root.spawn(len(spec.n_grid))):
        data_seed, cmp_seed = n_seed.spawn(2)
        sample, labels = generate_gaussian_pair(n, spec.d, spec.shift_vector(), data_seed)
        cfg = _cell_config(spec, scheme, n, cmp_seed)
        comparison = diagnostics.variance_comparison(
            sample, labels, cfg, replicates=spec.sweep_replicates
        )
        rows.append(SweepRow(
            n=n,
            h=sample.h,
            var_rest=comparison.var_rest,
            var_full=comparison.var_full,
            ratio=comparison.ratio,
            var_full_formula=comparison.var_full_formula,
        ))
    return rows


def _format_value(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(rows: list[CellResult], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(getattr(row, col)) for col in RESULTS_COLUMNS])
    return path


def write_variance_csv(rows: list[SweepRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VARIANCE_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(getattr(row, col)) for col in VARIANCE_COLUMNS])
    return path


def table1_specs(n_sim: int = 200, seed: int = 20240601, n_grid=TABLE1_N_GRID) -> list[ExperimentSpec]:
    """The built-in reproduction profile: MMD in d=10 and mean difference in
    d=2, each under the null and a 0.4 first-coordinate shift."""
    specs = []
    for scenario in ("alternative", "null"):
        specs.append(ExperimentSpec(
            statistic=permtest.MMD2,
            d=10,
            n_grid=tuple(n_grid),
            shift=(TABLE1_SHIFT,),
            n_sim=n_sim,
            scenario=scenario,
            blocks_by_n=dict(TABLE1_BLOCKS_MMD),
            seed=seed,
        ))
        specs.append(ExperimentSpec(
            statistic=permtest.MEAN_DIFF,
            d=2,
            n_grid=tuple(n_grid),
            shift=(TABLE1_SHIFT,),
            n_sim=n_sim,
            scenario=scenario,
            blocks_by_n=dict(TABLE1_BLOCKS_MEAN),
            seed=seed,
        ))
    return specs


def run_table1(output_dir, n_sim: int = 200, seed: int = 20240601, n_grid=TABLE1_N_GRID) -> Path:
    """Run the reproduction profile and write results.csv in output_dir."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    rows: list[CellResult] = []
    for index, spec in enumerate(table1_specs(n_sim=n_sim, seed=seed, n_grid=n_grid)):
        # Distinct derived streams per sub-study; the CSV records the master seed.
        spec_rows = run_power_study(_with_derived_seed(spec, seed, index))
        rows.extend(replace(r, seed=seed) for r in spec_rows)
    return write_results_csv(rows, output_dir / "results.csv")


def _with_derived_seed(spec: ExperimentSpec, master: int, index: int) -> ExperimentSpec:
    derived = np.random.SeedSequence(master, spawn_key=(index,))
    out = replace(spec)
    out.seed = derived  # type: ignore[assignment]
    return out


def load_spec(path) -> ExperimentSpec:
    """Parse a key=value sections file (configparser syntax) into an ExperimentSpec.

    Sections: [experiment] statistic/d/n_grid/shift/n_sim/scenario/schemes,
    [test] perms/alpha/rho/bandwidth/sided/seed, [blocks] n = b lines, and an
    optional [variance_sweep] enabled/replicates.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read spec file {path}")
    exp = parser["experiment"]
    statistic = exp.get("statistic", "mean")
    statistic = STATISTIC_LONG.get(statistic, statistic)
    schemes_raw = [s.strip() for s in exp.get("schemes", "block, full").split(",")]
    schemes = tuple(SCHEME_LONG.get(s, s) for s in schemes_raw)
    test = parser["test"] if parser.has_section("test") else {}
    blocks = {}
    if parser.has_section("blocks"):
        blocks = {int(k): int(v) for k, v in parser["blocks"].items()}
    bandwidth_raw = test.get("bandwidth", "median") if test else "median"
    bandwidth = bandwidth_raw if bandwidth_raw == "median" else float(bandwidth_raw)
    sweep_enabled = False
    sweep_replicates = 1000
    if parser.has_section("variance_sweep"):
        sweep = parser["variance_sweep"]
        sweep_enabled = sweep.getboolean("enabled", fallback=False)
        sweep_replicates = sweep.getint("replicates", fallback=1000)
    return ExperimentSpec(
        statistic=statistic,
        d=exp.getint("d", 1),
        n_grid=tuple(int(v) for v in exp.get("n_grid", "32").split(",")),
        shift=tuple(float(v) for v in exp.get("shift", "0").split(",")),
        n_sim=exp.getint("n_sim", 100),
        scenario=exp.get("scenario", "alternative"),
        schemes=schemes,
        blocks_by_n=blocks,
        n_perms=int(test.get("perms", 100)) if test else 100,
        alpha=float(test.get("alpha", 0.05)) if test else 0.05,
        rho=float(test.get("rho", 0.2)) if test else 0.2,
        bandwidth=bandwidth,
        sided=test.get("sided", "two") if test else "two",
        seed=int(test.get("seed", 0)) if test else 0,
        variance_sweep=sweep_enabled,
        sweep_replicates=sweep_replicates,
    )


def run_simulation(spec: ExperimentSpec, output_dir) -> list[Path]:
    """Power study (and optional variance sweep) with CSV outputs."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_results_csv(run_power_study(spec), output_dir / "results.csv")]
    if spec.variance_sweep:
        paths.append(write_variance_csv(run_variance_sweep(spec), output_dir / "variance.csv"))
    return paths
