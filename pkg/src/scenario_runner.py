"""
Scenario orchestration: dispatch, parallel sweeps, artifacts and the run manifest
"""

import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src import __version__
from src.blocks import block_row, plus_minus_specs, plus_plus_specs, summarize_block_rows
from src.dispersion import verify_resonance_bound
from src.duhamel import contraction_factor, linear_constant, picard_iterate
from src.exceptions import ConfigError, KawaharaLabError
from src.models import (
    CutoffSpec,
    EstimateKind,
    ExperimentConfig,
    NormSpec,
    RunManifest,
    ScenarioKind,
    SpectralField,
)
from src.propagator import invariants, solve, traveling_wave_petviashvili
from src.report_generator import ReportGenerator
from src.results_storage import ResultsStorage
from src.seeding import keyed_rng
from src.spectral_core import from_function, hs_norm, make_grid, random_band_limited, translate
from src.wellposedness import probe_point, probe_points, summarize_probe
from src.xsb import SCAN_COLUMNS, loglog_slope, ratio_scaling_scan, summarize_ratio_table, verify_linear_estimates

logger = logging.getLogger(__name__)

# (summary, tables, extra JSON documents) produced by a scenario
Outcome = Tuple[Dict[str, Any], Dict[str, pd.DataFrame], Dict[str, Dict[str, Any]]]


class ScenarioRunner:
    """Runs one validated experiment and writes its artifacts"""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize scenario runner

        Args:
            config: Validated experiment configuration
        """
        self.config = config
        self.output_dir = Path(config.output_dir) / config.scenario.value
        self.grid = make_grid(config.grid["n"], config.grid["box_length"])
        self._trajectories: List[Tuple[str, Any, Any]] = []
        self._dispatch: Dict[ScenarioKind, Callable[[], Any]] = {
            ScenarioKind.SOLVE: self._run_solve,
            ScenarioKind.RESONANCE_SCAN: self._run_resonance_scan,
            ScenarioKind.BLOCK_NORM: self._run_block_norm,
            ScenarioKind.BILINEAR_SCAN: self._run_ratio_scan,
            ScenarioKind.TRILINEAR_SCAN: self._run_ratio_scan,
            ScenarioKind.LINEAR_SCAN: self._run_linear_scan,
            ScenarioKind.CONTRACTION: self._run_contraction,
            ScenarioKind.WELLPOSED_PROBE: self._run_wellposed_probe,
        }

    async def run(self) -> RunManifest:
        """
        Run the scenario, write artifacts, report.md and manifest.json

        Raises:
            ConfigError: Scenario options are inconsistent
            NumericalError: A computation failed; the message names the scenario
        """
        scenario = self.config.scenario.value
        logger.info("=" * 60)
        logger.info(f"Scenario: {scenario} (seed {self.config.seed}, {self.config.threads} threads)")
        logger.info("=" * 60)

        started = time.perf_counter()
        try:
            summary, tables, documents = await self._dispatch[self.config.scenario]()
        except (KawaharaLabError, ValueError) as e:
            e.args = (f"{scenario}: {e}",)
            raise
        computed = time.perf_counter()

        storage = ResultsStorage(str(self.output_dir))
        self._clear_previous_run()
        for name, table in sorted(tables.items()):
            storage.save_table(name, table)
        for name, document in sorted(documents.items()):
            storage.save_json(name, document)
        for name, traj, log in self._trajectories:
            storage.save_trajectory(name, traj, float(self.config.options.get("dt", 0.0)), log)
        storage.save_json("summary.json", summary)
        storage.save_json("config.json", self.config.to_dict())
        storage.save_text("report.md", ReportGenerator(self.config.options.get("report")).render(
            self.config, summary, tables))
        written = time.perf_counter()

        manifest = RunManifest(self.config.to_dict(), storage.artifacts,
                               {"compute_seconds": computed - started, "write_seconds": written - computed},
                               __version__)
        storage.write_manifest(manifest)
        logger.info(f"Scenario {scenario} finished in {written - started:.2f}s, "
                    f"{len(storage.artifacts)} artifacts in {self.output_dir}")
        return manifest

    def _clear_previous_run(self):
        """Delete artifacts listed by an earlier manifest in the same directory"""
        previous = self.output_dir / "manifest.json"
        if not previous.exists():
            return
        try:
            with open(previous, "r", encoding="utf-8") as f:
                listed = json.load(f).get("artifacts", {})
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Could not read previous manifest {previous}: {e}")
            return
        for name in listed:
            path = self.output_dir / name
            if path.is_file():
                path.unlink()

    async def _sweep(self, fn: Callable[[Any], Any], points: Sequence[Any]) -> List[Any]:
        """Run fn over points in worker threads, at most config.threads at a time, results in order"""
        semaphore = asyncio.Semaphore(self.config.threads)

        async def run_point(index: int, point: Any):
            async with semaphore:
                result = await asyncio.to_thread(fn, point)
                logger.debug(f"[{index + 1}/{len(points)}] sweep point done")
                return result

        return await asyncio.gather(*(run_point(i, p) for i, p in enumerate(points)))

    def _option(self, key: str) -> Any:
        return self.config.options[key]

    # ------------------------------------------------------------------ scenarios

    def _initial_datum(self, index: int, amplitude: float) -> SpectralField:
        kind = self._option("initial")
        if kind == "gaussian":
            L, width = self.grid.box_length, float(self._option("width"))
            return from_function(self.grid, lambda x: amplitude * np.exp(-((x - 0.5 * L) / width) ** 2))
        if kind == "random":
            rng = keyed_rng(self.config.seed, "solve", index)
            return random_band_limited(self.grid, int(self._option("k_max")), rng).scaled(amplitude)
        if kind == "traveling_wave":
            profile = traveling_wave_petviashvili(float(self._option("speed")), self.config.params, self.grid)
            return translate(profile, 0.5 * self.grid.box_length).scaled(amplitude)
        raise ConfigError("options.initial", f"must be gaussian, random or traveling_wave, got {kind!r}")

    async def _run_solve(self) -> Outcome:
        amplitudes = [float(a) for a in self.config.sweep["amplitude"]]
        T, dt = float(self._option("T")), float(self._option("dt"))
        sample_every = int(self._option("sample_every"))
        blowup = float(self._option("blowup_factor"))
        data = [self._initial_datum(i, a) for i, a in enumerate(amplitudes)]

        def integrate(datum: SpectralField):
            traj = solve(datum, T, dt, self.config.params, sample_every, blowup)
            return traj, invariants(traj)

        results = await self._sweep(integrate, data)

        rows, drift, documents = [], {}, {}
        for i, (amplitude, (traj, log)) in enumerate(zip(amplitudes, results)):
            for t, mass, l2, ham in zip(log.times, log.mass, log.l2, log.hamiltonian):
                rows.append({"run": i, "amplitude": amplitude, "t": t, "mass": mass, "l2": l2, "hamiltonian": ham})
            drift[f"run_{i}"] = {
                "amplitude": amplitude,
                "mass_drift": _relative_drift(log.mass),
                "l2_drift": _relative_drift(log.l2),
                "hamiltonian_drift": _relative_drift(log.hamiltonian),
            }
            self._trajectories.append((f"trajectory_{i}", traj, log))
        table = pd.DataFrame(rows, columns=["run", "amplitude", "t", "mass", "l2", "hamiltonian"])
        return drift, {"invariants.csv": table}, documents

    async def _run_resonance_scan(self) -> Outcome:
        samples = int(self._option("samples_per_block"))
        caps = [float(c) for c in self.config.sweep["n_cap"]]
        reports = await self._sweep(
            lambda cap: verify_resonance_bound(self.config.params, cap, samples, self.config.seed), caps)
        rows = []
        for report in reports:
            xi1, xi2, xi3 = report.argmin_triple
            rows.append({"n_cap": report.n_cap, "min_ratio": report.min_ratio, "samples": report.samples,
                         "xi1": xi1, "xi2": xi2, "xi3": xi3})
        summary = {"min_ratio": min(r.min_ratio for r in reports),
                   "positive": bool(all(r.min_ratio > 0 for r in reports))}
        return summary, {"resonance.csv": pd.DataFrame(rows)}, {
            "resonance.json": {"reports": [r.to_dict() for r in reports]}}

    async def _run_block_norm(self) -> Outcome:
        params = self.config.params
        N_list = [float(n) for n in self.config.sweep["N"]]
        L_med_list = [float(v) for v in self.config.sweep["L_med"]]
        pattern = self._option("pattern")
        specs = []
        if pattern in ("plus_plus", "both"):
            specs += plus_plus_specs(N_list, L_med_list, params, float(self._option("L_min")))
        if pattern in ("plus_minus", "both"):
            specs += plus_minus_specs(N_list, L_med_list, params, float(self._option("N_low")))
        if not specs:
            raise ConfigError("options.pattern", f"must be plus_plus, plus_minus or both, got {pattern!r}")

        cells, mod_cells = int(self._option("cells_per_dyad")), self._option("modulation_cells")
        mod_cells = None if mod_cells is None else int(mod_cells)
        restarts, max_iters = int(self._option("restarts")), int(self._option("max_iters"))
        rows = await self._sweep(
            lambda spec: block_row(spec, cells, restarts, self.config.seed, params, mod_cells, max_iters), specs)
        report = summarize_block_rows(rows)
        summary = {"exponents": report["exponents"], "C_scan": report["C_scan"], "C_disc": report["C_disc"],
                   "cells_per_dyad": cells}
        return summary, {"blocks.csv": report["table"]}, {"crossover.json": {"crossover": report["crossover"]}}

    async def _run_ratio_scan(self) -> Outcome:
        if self.config.scenario is ScenarioKind.TRILINEAR_SCAN:
            estimate = EstimateKind.TRILINEAR
        else:
            estimate = EstimateKind(self._option("estimate"))
            if estimate is EstimateKind.TRILINEAR:
                raise ConfigError("options.estimate", "use the trilinear-scan scenario for trilinear estimates")
        sweep = self.config.sweep
        N_list = [float(n) for n in sweep["N"]]
        if 2.0 * max(N_list) > self.grid.dxi * (self.grid.n // 2 - 1):
            raise ConfigError("grid", f"n={self.grid.n}, L={self.grid.box_length:g} cannot resolve "
                                      f"frequency {2 * max(N_list):g}; raise n or lower sweep.N")
        s_list = [float(s) for s in sweep["s"]]
        seeds = [int(s) for s in sweep["seeds"]]
        opts = self.config.options

        def scan(N: float) -> pd.DataFrame:
            return ratio_scaling_scan(estimate, opts["regime"], s_list, [N], seeds, self.config.params, self.grid,
                                      float(opts["time_window"]), float(opts["b"]), float(opts.get("eps", 0.05)),
                                      float(opts["modulation"])).table

        tables = await self._sweep(scan, N_list)
        result = summarize_ratio_table(pd.concat(tables, ignore_index=True)[SCAN_COLUMNS])
        return result.to_dict(), {"ratios.csv": result.table}, {}

    def _norms_above_half(self) -> List[NormSpec]:
        norms = [n for n in self.config.norms if n.b > 0.5]
        if not norms:
            raise ConfigError("norms", "this scenario needs at least one norm with b > 1/2")
        return norms

    def _band_limited_data(self, count: int, label: str) -> List[SpectralField]:
        k_max = int(self._option("k_max"))
        return [random_band_limited(self.grid, k_max, keyed_rng(self.config.seed, label, i)) for i in range(count)]

    async def _run_linear_scan(self) -> Outcome:
        deltas = [float(d) for d in self.config.sweep["delta"]]
        data = self._band_limited_data(int(self._option("data_count")), "linear_data")
        n_time, pad = int(self._option("n_time")), int(self._option("pad"))
        norms = self._norms_above_half()
        reports = await self._sweep(
            lambda norm: verify_linear_estimates(norm, deltas, data, self.config.params, n_time, pad), norms)

        tables, summary = [], {}
        for norm, report in zip(norms, reports):
            tables.append(report["table"].assign(s=norm.s, b=norm.b))
            summary[f"s={norm.s:g},b={norm.b:g}"] = {k: v for k, v in report.items() if k != "table"}
        return summary, {"linear.csv": pd.concat(tables, ignore_index=True)}, {}

    async def _run_contraction(self) -> Outcome:
        deltas = [float(d) for d in self.config.sweep["delta"]]
        opts = self.config.options
        norms = self._norms_above_half()
        base = self._band_limited_data(1, "contraction_data")[0]
        points = [(norm, delta) for norm in norms for delta in deltas]

        def measure(point: Tuple[NormSpec, float]) -> Dict[str, Any]:
            norm, delta = point
            u0 = base.scaled(float(opts["amplitude"]) / hs_norm(base, norm.s))
            cutoff = CutoffSpec(delta, int(opts["n_time"]))
            factor = contraction_factor(u0, cutoff, self.config.params, norm, int(opts["probes"]), self.config.seed)
            _, report = picard_iterate(u0, cutoff, self.config.params, norm, int(opts["picard_iters"]),
                                       float(opts["tol"]))
            return {"s": norm.s, "b": norm.b, "delta": delta,
                    "c0": linear_constant(u0, cutoff, self.config.params, norm),
                    "contraction_factor": factor, "picard_rate": report.contraction_factor,
                    "iterations": report.iterations, "converged": report.converged,
                    "residuals": report.residuals}

        rows = await self._sweep(measure, points)
        table = pd.DataFrame([{k: v for k, v in r.items() if k != "residuals"} for r in rows])
        summary = {}
        for (s, b), group in table.groupby(["s", "b"]):
            summary[f"s={s:g},b={b:g}"] = {
                "max_contraction_factor": float(group["contraction_factor"].max()),
                "slope_vs_delta": loglog_slope(group["delta"].to_numpy(), group["contraction_factor"].to_numpy()),
                "all_converged": bool(group["converged"].all()),
            }
        residuals = {"points": [{"s": r["s"], "b": r["b"], "delta": r["delta"],
                                 "residuals": [float(v) for v in r["residuals"]]} for r in rows]}
        return summary, {"contraction.csv": table}, {"picard.json": residuals}

    async def _run_wellposed_probe(self) -> Outcome:
        rows = await self._sweep(lambda point: probe_point(self.config, point), probe_points(self.config))
        result = summarize_probe(rows)
        return result["summary"], {"probe.csv": result["table"]}, {}


def _relative_drift(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    scale = abs(values[0])
    drift = float(np.max(np.abs(values - values[0])))
    return drift / scale if scale > 0 else drift


def run_scenario(config: ExperimentConfig) -> RunManifest:
    """Synchronous entry point: run one scenario to completion"""
    return asyncio.run(ScenarioRunner(config).run())
