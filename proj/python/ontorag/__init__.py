"""Python bindings for the ontorag pipeline."""

import os as _os

_packaged_templates = _os.path.join(_os.path.dirname(__file__), "templates")
if _os.path.isdir(_packaged_templates):
    _os.environ.setdefault("ONTORAG_TEMPLATES", _packaged_templates)

from ._ontorag import (  # noqa: E402
    ConfigError,
    IntegrityError,
    OntoragError,
    ParseError,
    Pipeline,
    ProviderError,
    cluster_claims,
    count_tokens,
    hybrid_chunk,
    leiden,
    modularity,
    pad_region,
    rouge_l_distance,
    stage_names,
    tokens,
    transform_coords,
    validate_artifacts,
    win_rates,
)

__all__ = [
    "ConfigError",
    "IntegrityError",
    "OntoragError",
    "ParseError",
    "Pipeline",
    "ProviderError",
    "cluster_claims",
    "count_tokens",
    "hybrid_chunk",
    "leiden",
    "modularity",
    "pad_region",
    "rouge_l_distance",
    "stage_names",
    "tokens",
    "transform_coords",
    "validate_artifacts",
    "win_rates",
]
