from .main import build_parser, check_network_gradients, main, run
from .runconfig import DataSection, EvalSection, RunConfig, build_run_config, load_run_config, parse_override

__all__ = [
    "build_parser",
    "check_network_gradients",
    "main",
    "run",
    "DataSection",
    "EvalSection",
    "RunConfig",
    "build_run_config",
    "load_run_config",
    "parse_override",
]
