"""Power line noise synthesis, GAN training and cyclostationary metrics."""

from ._core import (
    ConfigError,
    NgganError,
    TraceSet,
    cyclic_coherence,
    exceedance,
    feature_names,
    features,
    fid,
    fid_features,
    generate,
    load_traceset,
    presets,
    run_cli,
    save_traceset,
    synthesize,
)

__all__ = [
    "ConfigError",
    "NgganError",
    "TraceSet",
    "cyclic_coherence",
    "exceedance",
    "feature_names",
    "features",
    "fid",
    "fid_features",
    "generate",
    "load_traceset",
    "presets",
    "run_cli",
    "save_traceset",
    "synthesize",
]
