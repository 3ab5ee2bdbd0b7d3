"""WKB spectral networks on the punctured plane.

``curve`` holds the spectral-curve data, ``trace`` integrates trajectories,
``network`` grows the network joint by joint, ``export`` writes SVG and JSON,
and ``diagnostics`` holds the numerical sanity checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from camnet.errors import InputError
from camnet.wkb.curve import INF, HitchinPoint, branch_points, condition_R, hitchin_from_config, residue, truncation_disc
from camnet.wkb.network import Network, build_network, census, classify_ends, condition_R_blockers, is_acyclic, joint_order
from camnet.wkb.trace import Tolerances

__all__ = [
    "INF",
    "HitchinPoint",
    "Network",
    "Tolerances",
    "TraceConfig",
    "branch_points",
    "build_network",
    "census",
    "classify_ends",
    "condition_R",
    "condition_R_blockers",
    "hitchin_from_config",
    "is_acyclic",
    "joint_order",
    "residue",
    "trace_config",
    "truncation_disc",
]


@dataclass
class TraceConfig:
    hitchin: HitchinPoint
    tolerances: Tolerances
    max_iterations: int = 6


def trace_config(cfg: Mapping, overrides: Mapping | None = None) -> TraceConfig:
    """Parse a full tracing config; ``overrides`` replaces individual tolerances."""
    if not isinstance(cfg, Mapping):
        raise InputError("config must be a JSON object")
    h = hitchin_from_config(cfg)
    merged = dict(cfg.get("tolerances") or {})
    merged.update(overrides or {})
    try:
        tol = Tolerances.from_mapping(merged)
        iters = int(cfg.get("max_iterations", 6))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    if iters < 1:
        raise InputError("max_iterations must be at least 1")
    return TraceConfig(h, tol, iters)
