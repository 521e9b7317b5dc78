from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, parse_config
from .metrics import HEADER, MetricsWriter, read_metrics
from .plot import emit_plot

__all__ = [
    "CheckpointError", "ConfigError", "HEADER", "MetricsWriter", "RunConfig",
    "emit_plot", "load_checkpoint", "parse_config", "read_metrics",
    "save_checkpoint",
]
