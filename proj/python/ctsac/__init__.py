"""Curriculum transformer SAC exploration core.

Thin Python surface over the C++ engine: deterministic world generation,
direction-weighted lidar scans, reward shaping terms, a steppable
environment, full training runs, and checkpoint evaluation.
"""

from ._ctsac import (
    Env,
    World,
    config_text,
    evaluate_checkpoint,
    generate_world,
    load_world,
    reward_terms,
    save_world,
    scan,
    segment_spans,
    train,
    world_from_text,
)

__all__ = [
    "Env",
    "World",
    "config_text",
    "evaluate_checkpoint",
    "generate_world",
    "load_world",
    "reward_terms",
    "save_world",
    "scan",
    "segment_spans",
    "train",
    "world_from_text",
]
