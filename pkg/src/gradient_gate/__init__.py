"""
gradient-gate: cosine-similarity gating of auxiliary-task gradients.

The gating primitives live in :mod:`gradient_gate.core`; the experiment
substrates are :mod:`~gradient_gate.landscapes`, :mod:`~gradient_gate.gridworld`
and :mod:`~gradient_gate.densenet`, driven by :mod:`~gradient_gate.harness`.
"""

from __future__ import annotations

import json
from importlib.metadata import PackageNotFoundError, distribution

_DIST_NAME = "gradient-gate"


def _resolve_version() -> str:
    try:
        dist = distribution(_DIST_NAME)
    except PackageNotFoundError:
        # Mounted src directory without an installed package
        return "0.0.0-dev"

    direct_url = dist.read_text("direct_url.json")
    editable = bool(direct_url) and json.loads(direct_url).get("dir_info", {}).get("editable", False) is True
    if editable:
        try:
            # setuptools_scm is a dev dependency only; needs git
            from setuptools_scm import get_version

            return get_version(root="../..", relative_to=__file__)
        except (ImportError, LookupError, UserWarning):
            pass
    return dist.version


__version__ = _resolve_version()

from .core import (  # noqa: E402
    CosineTracker,
    GateConfig,
    GateDecision,
    GateMode,
    ParamVector,
    combine,
    cosine,
    gate_decision,
    gate_weight,
)

__all__ = (
    "CosineTracker",
    "GateConfig",
    "GateDecision",
    "GateMode",
    "ParamVector",
    "__version__",
    "combine",
    "cosine",
    "gate_decision",
    "gate_weight",
)
