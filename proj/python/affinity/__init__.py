"""Sports fandom and political affinity analysis."""

import json as _json

from ._affinity import (
    IdSet,
    IdsFormatError,
    IngestError,
    MetricError,
    PipelineError,
    RegistryError,
    Snapshot,
    SynthConfigError,
    cds_contribution,
    congressional_weight,
    devotedness,
    exclusive_fans,
    load_dataset,
    ratio_table,
    run_cdr,
    senator_breakdown_table,
    unite_all,
    write_report,
)
from . import _affinity


def _config_text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def generate(config, seed=None, threads=1):
    """Build a synthetic snapshot in memory from a config dict or JSON text."""
    return _affinity.generate(_config_text(config), seed, threads)


def write_dataset(config, out_dir, seed=None):
    """Write a synthetic dataset (manifest, follower files, ground truth); returns the manifest path."""
    return _affinity.write_dataset(_config_text(config), out_dir, seed)


__all__ = [
    "IdSet",
    "IdsFormatError",
    "IngestError",
    "MetricError",
    "PipelineError",
    "RegistryError",
    "Snapshot",
    "SynthConfigError",
    "cds_contribution",
    "congressional_weight",
    "devotedness",
    "exclusive_fans",
    "generate",
    "load_dataset",
    "ratio_table",
    "run_cdr",
    "senator_breakdown_table",
    "unite_all",
    "write_dataset",
    "write_report",
]
