"""GUI transition graphs from app exploration videos."""

import json

from . import _core
from ._core import (
    XploreError,
    compute_ydiff,
    extract_keyframes,
    load_frames,
    normalized_luma_difference,
    parse_choice,
    segment_actions,
    simplify_vh,
)

__all__ = [
    "XploreError",
    "compute_ydiff",
    "explore",
    "export_dot",
    "extract_keyframes",
    "extract_triples",
    "load_frames",
    "normalized_luma_difference",
    "parse_choice",
    "prompt_context",
    "random_app_model",
    "reachability",
    "run_pipeline",
    "score_mc",
    "segment_actions",
    "simplify_vh",
    "simulate_corpus",
    "usage_path",
    "vh_similarity",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def vh_similarity(a, b):
    return _core.vh_similarity(_text(a), _text(b))


def random_app_model(seed, screens):
    return json.loads(_core.random_app_model(seed, screens))


def explore(model, policy="dfs", seed=0, max_steps=200):
    return json.loads(_core.explore(_text(model), policy, seed, max_steps))


def simulate_corpus(out_dir, model, policy="dfs", seed=0, max_steps=200, qa_per_task=2):
    return _core.simulate_corpus(str(out_dir), _text(model), policy, seed, max_steps, qa_per_task)


def run_pipeline(config_path):
    return json.loads(_core.run_pipeline(str(config_path)))


def reachability(graph):
    return _core.reachability(_text(graph))


def extract_triples(graph, limit=None):
    if limit is None:
        return _core.extract_triples(_text(graph))
    return _core.extract_triples(_text(graph), limit)


def usage_path(graph, target):
    return _core.usage_path(_text(graph), target)


def prompt_context(graph, budget):
    return _core.prompt_context(_text(graph), budget)


def export_dot(graph):
    return _core.export_dot(_text(graph))


def score_mc(predictions):
    if not isinstance(predictions, str):
        predictions = "".join(json.dumps(p) + "\n" for p in predictions)
    return json.loads(_core.score_mc(predictions))
