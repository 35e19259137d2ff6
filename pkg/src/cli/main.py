"""
Command-line interface: estimate, oracle, baseline, sanity and sweep subcommands
"""
import sys
import json
import argparse
import logging
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from ..models.errors import CoBPMError, ConfigError
from ..utils.config_loader import load_settings
from ..utils.logging_setup import setup_logging
from ..models.experiment_data import ExperimentConfig
from .commands import ExperimentRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _global_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("global")
    group.add_argument("--seed", type=int, help="Master seed")
    group.add_argument("--out", help="Output directory")
    group.add_argument("--config", help="YAML config file (default config/config.yaml)")
    group.add_argument("--threads", type=int, help="Worker threads for replicas and grid cells")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    group.add_argument("--env-file", help="dotenv file with COBPM_* overrides")
    return parser


def _data_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("data")
    group.add_argument("--x", dest="x_path", help="CSV with the first sample")
    group.add_argument("--y", dest="y_path", help="CSV with the second sample")
    group.add_argument("--p", help="Density of the first sample, e.g. beta:6,5")
    group.add_argument("--q", help="Density of the second sample, e.g. beta:5,6")
    group.add_argument("--setup", help="Named experiment setup, e.g. beta-1d")
    group.add_argument("--n", type=int, help="Points drawn from each density")
    group.add_argument("--rescale", action="store_true", help="Map file samples onto the unit cube")
    group.add_argument("--augment", type=float, default=0.0, help="Uniform augmentation fraction in [0, 1)")
    return parser


def _model_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("model and sampler")
    group.add_argument("--delta", type=float, help="Dirichlet pseudo-count")
    group.add_argument("--sigma", type=float, help="Depth penalty (default dimension + 1)")
    group.add_argument("--p-up", type=float, help="Extend-move probability")
    group.add_argument("--max-depth", type=int, help="Depth cap")
    group.add_argument("--sequence-prior", choices=["flat", "uniform"])
    group.add_argument("--iters", type=int)
    group.add_argument("--burnin", type=int)
    group.add_argument("--thin", type=int)
    group.add_argument("--proposal", choices=["guided", "uniform"])
    group.add_argument("--chains", type=int, help="Replica chains")
    group.add_argument("--progress-every", type=int)
    return parser


def _phi_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--phi", help="Comma list of tv, hellinger, kl, renyi:ALPHA")
    parser.add_argument("--level", type=float, help="Credible level")
    return parser


def _baseline_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--k", type=_int_list, help="Neighbour counts for PC-k, e.g. 1,10")
    parser.add_argument("--bins", type=int, help="Histogram bins per axis")
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cobpm",
        description="Bayesian estimation of f-divergences between two samples with coupled binary partitions",
    )
    subparsers = parser.add_subparsers(dest="mode", required=True)
    common = _global_options()
    data = _data_options()
    model = _model_options()
    phi = _phi_options()
    baselines = _baseline_options()

    estimate = subparsers.add_parser("estimate", parents=[common, data, model, phi],
                                     help="Posterior summaries of the divergences between two samples")
    estimate.add_argument("--no-trace", action="store_true", help="Skip the per-replica JSON-lines traces")

    oracle = subparsers.add_parser("oracle", parents=[common, data, phi],
                                   help="Monte Carlo ground truth between two densities")
    oracle.add_argument("--mc-draws", type=int)
    oracle.add_argument("--workers", type=int)

    subparsers.add_parser("baseline", parents=[common, data, phi, baselines],
                          help="PC-k and histogram estimates").add_argument("--delta", type=float)

    sanity = subparsers.add_parser("sanity", parents=[common, model],
                                   help="MAP partition on a built-in 2-d pair")
    sanity.add_argument("--setup", choices=["sanity-signed", "sanity-piecewise"], default="sanity-piecewise")
    sanity.add_argument("--n", type=int)

    sweep = subparsers.add_parser("sweep", parents=[common, data, model, phi, baselines],
                                  help="Estimators over a grid of sample sizes")
    sweep.add_argument("--sizes", type=_int_list, required=True, help="e.g. 50,150,450")
    sweep.add_argument("--estimators", type=_str_list, default=["cobpm", "pc1"],
                       help="Subset of cobpm,pc1,pc10,hist,twostep")
    sweep.add_argument("--replicas", type=int, default=10)
    return parser


def settings_flags(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    """Flags mapped onto config sections; absent flags stay None and do not override"""
    get = lambda name: getattr(args, name, None)
    return {
        "model": {"delta": get("delta"), "sigma": get("sigma"), "p_up": get("p_up"),
                  "max_depth": get("max_depth"), "sequence_prior": get("sequence_prior")},
        "sampler": {"iters": get("iters"), "burnin": get("burnin"), "thin": get("thin"),
                    "proposal": get("proposal"), "chains": get("chains"),
                    "progress_every": get("progress_every")},
        "divergence": {"phi": get("phi"), "level": get("level")},
        "oracle": {"mc_draws": get("mc_draws"), "workers": get("workers")},
        "baselines": {"k": get("k"), "bins": get("bins")},
        "runtime": {"seed": get("seed"), "threads": get("threads"), "out": get("out")},
        "logging": {"level": get("log_level")},
    }


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    settings = load_settings(args.config, settings_flags(args), env_file=args.env_file)
    get = lambda name, default=None: getattr(args, name, default)
    return ExperimentConfig.build(
        mode=args.mode,
        settings=settings,
        x_path=get("x_path"),
        y_path=get("y_path"),
        p=get("p"),
        q=get("q"),
        setup=get("setup"),
        n=get("n"),
        sizes=get("sizes") or [],
        estimators=get("estimators") or ["cobpm", "pc1"],
        replicas=get("replicas", 1),
        rescale=get("rescale", False),
        augment=get("augment", 0.0),
        write_trace=not get("no_trace", False),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args)
        setup_logging(config.settings.logging)
        results = ExperimentRunner(config).run()
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {str(e)}")
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except (CoBPMError, ValueError, OSError) as e:
        logger.error(f"Runtime error: {str(e)}")
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_RUNTIME

    print(json.dumps(results, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
