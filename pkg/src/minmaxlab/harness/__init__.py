from .config import RunConfig, load_config, preset, preset_names
from .runner import RunResult, run, run_many
from .sweep import sweep_k
from .replicate import replicate, RECIPES

__all__ = [
    "RunConfig",
    "load_config",
    "preset",
    "preset_names",
    "RunResult",
    "run",
    "run_many",
    "sweep_k",
    "replicate",
    "RECIPES",
]
