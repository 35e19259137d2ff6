"""
Experiment runner behind the command-line subcommands
"""
import time
import logging
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .. import __version__
from ..core.baselines import DISTANCE_FLOOR, histogram_divergence, knn_kl, run_baselines
from ..core.counting import count
from ..core.densities import DensitySpec, ExperimentSetup, PiecewiseConstant, get_setup, parse_density
from ..core.divergence import augment_uniform, summarize, two_step_estimate
from ..core.oracle import mc_truths
from ..core.posterior import PosteriorModel
from ..core.sampler import chain_seed, run_chain, run_chains, shared_dimension
from ..models.chain_data import ChainConfig, Trace
from ..models.divergence_data import BoxPlotStats, PhiKind
from ..models.errors import ConfigError, InvalidDimensionError
from ..models.experiment_data import ExperimentConfig, ExperimentMode
from ..models.model_data import Hyperparams
from ..models.partition import Partition
from ..models.sample_data import Sample
from ..utils.file_processor import FileProcessor

logger = logging.getLogger(__name__)

SANITY_SETUPS = ("sanity-signed", "sanity-piecewise")
DEFAULT_SANITY_SIZE = 1000

BOXPLOT_COLUMNS = ["phi", "q1", "median", "q3", "whisker_low", "whisker_high", "n_outliers", "n_draws"]
DEPTH_COLUMNS = ["replica", "depth", "count"]
SWEEP_COLUMNS = ["size", "estimator", "phi", "replicate", "estimate"]
SWEEP_SUMMARY_COLUMNS = ["size", "estimator", "phi", "mean", "sd", "n"]
PARTITION_COLUMNS = ["region", "lo_1", "hi_1", "lo_2", "hi_2", "m1", "m2"]
POINT_COLUMNS = ["label", "x1", "x2"]

# stream tags for seeds derived from the master seed
_X_STREAM, _Y_STREAM, _CHAIN_STREAM, _AUGMENT_STREAM = 0, 1, 2, 3


def derive_seed(*keys: int) -> int:
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def version_string() -> str:
    """`git describe` of the source tree, or the package version outside a checkout"""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class ExperimentRunner:
    """Runs one configured experiment and writes its output directory"""

    def __init__(self, config: ExperimentConfig, file_processor: Optional[FileProcessor] = None):
        self.config = config
        self.settings = config.settings
        self.file_processor = file_processor or FileProcessor()
        self.out_dir = Path(self.settings.runtime.out)
        self.seed = self.settings.runtime.seed
        self.threads = self.settings.runtime.threads

    def run(self) -> Dict[str, Any]:
        commands = {
            ExperimentMode.ESTIMATE: self.cmd_estimate,
            ExperimentMode.ORACLE: self.cmd_oracle,
            ExperimentMode.BASELINE: self.cmd_baseline,
            ExperimentMode.SANITY: self.cmd_sanity,
            ExperimentMode.SWEEP: self.cmd_sweep,
        }
        started = time.perf_counter()
        logger.info(f"Starting {self.config.mode.value} (seed {self.seed}, {self.threads} threads, out {self.out_dir})")
        try:
            results = commands[self.config.mode]()
        except Exception as e:
            logger.error(f"Error running {self.config.mode.value}: {str(e)}")
            raise
        logger.info(f"Finished {self.config.mode.value} in {time.perf_counter() - started:.2f}s")
        return results

    # inputs

    def _setup(self) -> Optional[ExperimentSetup]:
        return get_setup(self.config.setup) if self.config.setup else None

    def _densities(self) -> Tuple[DensitySpec, DensitySpec]:
        setup = self._setup()
        if setup is not None:
            return setup.p, setup.q
        p = parse_density(self.config.p)
        q = parse_density(self.config.q)
        if p.dimension != q.dimension:
            raise InvalidDimensionError(f"--p has dimension {p.dimension}, --q has {q.dimension}")
        return p, q

    def _draw(self, p: DensitySpec, q: DensitySpec, size: int, replicate: int = 0) -> Tuple[Sample, Sample]:
        x_rng = np.random.default_rng(np.random.SeedSequence([self.seed, _X_STREAM, size, replicate]))
        y_rng = np.random.default_rng(np.random.SeedSequence([self.seed, _Y_STREAM, size, replicate]))
        x = Sample(p.sample(size, x_rng), label="X", source=p.describe())
        y = Sample(q.sample(size, y_rng), label="Y", source=q.describe())
        return x, y

    def _samples(self) -> Tuple[Sample, Sample]:
        if self.config.x_path:
            x, y = self.file_processor.load_pair(self.config.x_path, self.config.y_path, self.config.rescale)
        else:
            p, q = self._densities()
            x, y = self._draw(p, q, self.config.n)
        return self._augment(x, y, 0)

    def _augment(self, x: Sample, y: Sample, replicate: int) -> Tuple[Sample, Sample]:
        if self.config.augment == 0.0:
            return x, y
        return augment_uniform(x, y, self.config.augment,
                               seed=derive_seed(self.seed, _AUGMENT_STREAM, replicate))

    def _hyperparams(self, dimension: int) -> Hyperparams:
        model = self.settings.model
        setup = self._setup()
        sigma = model.sigma if model.sigma is not None else (setup.sigma if setup else None)
        return Hyperparams.for_dimension(
            dimension, sigma=sigma, delta=model.delta, p_up=model.p_up,
            max_depth=model.max_depth, sequence_prior=model.sequence_prior,
        )

    def _chain_config(self, dimension: int, seed: int) -> ChainConfig:
        return self.settings.sampler.chain_config(self._hyperparams(dimension), seed)

    def _manifest(self, extra: Optional[Dict[str, Any]] = None):
        manifest = {
            "command": self.config.mode.value,
            "version": version_string(),
            "seed": self.seed,
            "threads": self.threads,
            "oracle_workers": self.settings.oracle.workers,
            "config": self.config.to_dict(),
        }
        manifest.update(extra or {})
        self.file_processor.write_json(manifest, str(self.out_dir / "manifest.json"))

    # commands

    def cmd_estimate(self) -> Dict[str, Any]:
        """Replica chains on one pair of samples; summaries, box plots and depth histograms"""
        x, y = self._samples()
        dimension = shared_dimension(x, y)
        config = self._chain_config(dimension, self.seed)
        phis = self.settings.divergence.phis
        level = self.settings.divergence.level
        replicas = self.settings.sampler.chains

        logger.info(f"Step 1: running {replicas} chain(s) on n1={x.size}, n2={y.size}, d={dimension}")
        traces = run_chains(x, y, config, chains=replicas, threads=self.threads)

        logger.info("Step 2: summarising posterior draws")
        pooled: Dict[str, List[np.ndarray]] = {phi.label: [] for phi in phis}
        depth_rows = []
        replica_results = []
        for index, trace in enumerate(traces):
            summaries = [summarize(trace, phi, level) for phi in phis]
            for summary in summaries:
                pooled[summary.phi.label].append(summary.draws)
            payload = {
                "replica": index,
                "seed": trace.config.seed,
                "proposal": trace.proposal.value,
                "acceptance_rate": trace.acceptance_rate,
                "mean_depth": trace.mean_depth,
                "summaries": [s.to_dict() for s in summaries],
            }
            replica_results.append(payload)
            self.file_processor.write_json(payload, str(self.out_dir / f"summary_{index}.json"))
            if self.config.write_trace:
                self.file_processor.write_jsonl(
                    (r.to_dict() for r in trace.records), str(self.out_dir / f"trace_{index}.jsonl")
                )
            depth_rows.extend(
                {"replica": index, "depth": depth, "count": c} for depth, c in trace.depth_histogram().items()
            )

        logger.info("Step 3: writing box plots, depth histogram and manifest")
        box_rows = []
        for label, draws in pooled.items():
            stats = BoxPlotStats.from_draws(np.concatenate(draws))
            box_rows.append({"phi": label, **asdict(stats)})
        self.file_processor.write_csv(box_rows, str(self.out_dir / "boxplot.csv"), BOXPLOT_COLUMNS)
        self.file_processor.write_csv(depth_rows, str(self.out_dir / "depth_histogram.csv"), DEPTH_COLUMNS)
        self._manifest({
            "chain": config.to_dict(),
            "replica_seeds": [t.config.seed for t in traces],
            "samples": {"x": x.to_dict(), "y": y.to_dict()},
            "augment": {"fraction": self.config.augment, "bias_inducing": self.config.augment > 0},
        })
        return {"success": True, "replicas": replica_results, "output_dir": str(self.out_dir)}

    def cmd_oracle(self) -> Dict[str, Any]:
        """Monte Carlo reference values for every configured discrepancy"""
        p, q = self._densities()
        oracle = self.settings.oracle
        results = mc_truths(p, q, self.settings.divergence.phis, oracle.mc_draws, self.seed,
                            oracle.workers, oracle.chunk_size)
        setup = self._setup()
        if setup is not None:
            for result in results:
                reference = setup.truths.get(result.phi.label)
                if reference is not None:
                    logger.info(f"{result.phi.label}: oracle {result.estimate:.4f} vs published {reference:.4f}")
        self.file_processor.write_json([r.to_dict() for r in results], str(self.out_dir / "oracle.json"))
        self._manifest({"p": p.describe(), "q": q.describe()})
        return {"success": True, "results": [r.to_dict() for r in results]}

    def cmd_baseline(self) -> Dict[str, Any]:
        x, y = self._samples()
        baselines = self.settings.baselines
        results = run_baselines(x, y, self.settings.divergence.phis, ks=baselines.k, bins=baselines.bins,
                                delta=self.settings.model.delta)
        self.file_processor.write_json([r.to_dict() for r in results], str(self.out_dir / "baseline.json"))
        clamps = {f"pc{r.k}": r.clamped for r in results if r.method == "pc"}
        self._manifest({
            "samples": {"x": x.to_dict(), "y": y.to_dict()},
            "neighbour_distances": {"distance_clamp": DISTANCE_FLOOR, "clamped": clamps},
        })
        return {"success": True, "results": [r.to_dict() for r in results]}

    def cmd_sanity(self) -> Dict[str, Any]:
        """MAP partition of one chain on a built-in 2-d pair, as rectangles plus the scatter"""
        name = self.config.setup or "sanity-piecewise"
        if name not in SANITY_SETUPS:
            raise ConfigError(f"sanity runs one of {SANITY_SETUPS}, got '{name}'")
        setup = get_setup(name)
        if setup.dimension != 2:
            raise InvalidDimensionError(f"Sanity pairs are 2-dimensional, '{name}' has {setup.dimension}")
        x, y = self._draw(setup.p, setup.q, self.config.n or DEFAULT_SANITY_SIZE)
        trace = run_chain(x, y, self._chain_config(2, self.seed))
        partition, masses = map_partition(trace, x, y)

        partition_rows = [
            {
                "region": index + 1,
                "lo_1": region.lower[0], "hi_1": region.upper[0],
                "lo_2": region.lower[1], "hi_2": region.upper[1],
                "m1": float(masses.m1[index]), "m2": float(masses.m2[index]),
            }
            for index, region in enumerate(partition.regions)
        ]
        point_rows = [
            {"label": sample.label, "x1": float(point[0]), "x2": float(point[1])}
            for sample in (x, y) for point in sample.points
        ]
        self.file_processor.write_csv(partition_rows, str(self.out_dir / "sanity_partition.csv"), PARTITION_COLUMNS)
        self.file_processor.write_csv(point_rows, str(self.out_dir / "sanity_points.csv"), POINT_COLUMNS)

        result = {
            "success": True,
            "setup": name,
            "map_sequence": partition.to_sequence_string(),
            "depth": partition.depth,
            "mean_depth": trace.mean_depth,
        }
        if isinstance(setup.q, PiecewiseConstant):
            result["refines_truth"] = refines(partition, setup.q.partition)
        self._manifest({"chain": trace.config.to_dict(), "sanity": result})
        return result

    def cmd_sweep(self) -> Dict[str, Any]:
        """Estimators over a grid of sample sizes with replicated draws"""
        p, q = self._densities()
        phis = self.settings.divergence.phis
        cells = [(size, rep) for size in self.config.sizes for rep in range(self.config.replicas)]
        logger.info(f"Sweep: {len(cells)} cells, estimators {self.config.estimators}")

        def run_cell(cell: Tuple[int, int]) -> List[Dict[str, Any]]:
            size, replicate = cell
            x, y = self._augment(*self._draw(p, q, size, replicate), replicate)
            return self._sweep_cell(x, y, size, replicate, phis)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                chunks = list(pool.map(run_cell, cells))
        else:
            chunks = [run_cell(cell) for cell in cells]
        rows = [row for chunk in chunks for row in chunk]

        frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
        summary = (
            frame.groupby(["size", "estimator", "phi"], sort=False)["estimate"]
            .agg(mean="mean", sd="std", n="count").reset_index()
        )
        self.file_processor.write_csv(rows, str(self.out_dir / "sweep.csv"), SWEEP_COLUMNS)
        self.file_processor.write_csv(summary.to_dict("records"), str(self.out_dir / "sweep_summary.csv"),
                                      SWEEP_SUMMARY_COLUMNS)
        self._manifest({"p": p.describe(), "q": q.describe()})
        return {"success": True, "rows": len(rows), "summary": summary.to_dict("records")}

    def _sweep_cell(self, x: Sample, y: Sample, size: int, replicate: int, phis) -> List[Dict[str, Any]]:
        rows = []
        dimension = shared_dimension(x, y)
        seed = derive_seed(self.seed, _CHAIN_STREAM, size, replicate)

        def add(estimator: str, phi_label: str, value: float):
            rows.append({"size": size, "estimator": estimator, "phi": phi_label,
                         "replicate": replicate, "estimate": value})

        for estimator in self.config.estimators:
            if estimator == "cobpm":
                trace = run_chain(x, y, self._chain_config(dimension, seed))
                for phi in phis:
                    add("cobpm", phi.label, summarize(trace, phi).median)
            elif estimator in ("pc1", "pc10"):
                if any(phi.kind == PhiKind.KL for phi in phis):
                    add(estimator, "kl", knn_kl(x, y, int(estimator[2:])))
            elif estimator == "hist":
                for phi in phis:
                    add("hist", phi.label, histogram_divergence(
                        x, y, self.settings.baselines.bins, phi, self.settings.model.delta))
            elif estimator == "twostep":
                partition_x, m_x = single_sample_fit(x, self._chain_config(dimension, chain_seed(seed, 1)))
                partition_y, m_y = single_sample_fit(y, self._chain_config(dimension, chain_seed(seed, 2)))
                for phi in phis:
                    add("twostep", phi.label, two_step_estimate(phi, partition_x, m_x, partition_y, m_y))
        return rows


def map_partition(trace: Trace, x: Sample, y: Sample):
    """Highest log-marginal visited partition with posterior-mean masses"""
    record = trace.map_record()
    partition = Partition.from_sequence_string(record.sequence)
    masses = PosteriorModel(trace.config.hyperparams).posterior_mean_masses(count(x, y, partition))
    return partition, masses


def single_sample_fit(sample: Sample, config: ChainConfig):
    """Partition and masses fitted to one sample alone (the other side left empty)"""
    empty = Sample(np.empty((0, sample.dimension)), label="empty")
    trace = run_chain(sample, empty, config)
    partition, masses = map_partition(trace, sample, empty)
    return partition, masses.m1


def refines(fine: Partition, coarse: Partition) -> bool:
    """True when every region of `coarse` is a union of regions of `fine`"""
    return all(any(cell.is_subset_of(region) for region in coarse.regions) for cell in fine.regions)
