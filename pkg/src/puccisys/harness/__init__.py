from .config import RunConfig, load_config, parse_config
from .pipeline import RunError, RunResult, run, sweep, sweep_summary
from .selfcheck import selfcheck

__all__ = [
    "RunConfig", "RunError", "RunResult", "load_config", "parse_config",
    "run", "selfcheck", "sweep", "sweep_summary",
]
