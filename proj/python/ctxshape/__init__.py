"""Context selection toolkit: ECS utility, divergence scoring and benchmarks."""

import json

from . import _core
from ._core import (
    Backend,
    BackendError,
    ContextOverflowError,
    Error,
    InvalidArgument,
    JudgeError,
    ParseError,
    ProtocolError,
    SchemaError,
    dense_score,
    ecs_utility,
    f1_at_gold_size,
    filter_stream,
    kl_divergence,
    mock_backend,
    random_score,
    select_top_k,
    tfidf_score,
    trajectory_divergence,
)


def make_backend(config):
    """Build a backend from a dict of backend settings."""
    return _core._make_backend(json.dumps(config))


def generate_synthetic(seed=0, questions=20, insight=1, duplicate=3, redherring=12,
                       counterfactual=4, style="lexical", insight_padding=0, name="synthetic"):
    return json.loads(_core._generate_synthetic(seed, questions, insight, duplicate, redherring,
                                                counterfactual, style, insight_padding, name))


def load_corpus(corpus, format="normalized"):
    """Validate a corpus given as a dict, JSON text or path; returns the normalized dict."""
    if isinstance(corpus, dict):
        text = json.dumps(corpus)
    elif isinstance(corpus, str) and corpus.lstrip().startswith(("{", "[")):
        text = corpus
    else:
        with open(corpus, encoding="utf-8") as f:
            text = f.read()
    return json.loads(_core._validate_corpus(text, format))


def run_benchmark(config, corpus=None):
    """Run a benchmark. Without `corpus`, config["corpus_path"] is loaded and
    the report is also written to config["output_path"]."""
    corpus_json = None if corpus is None else json.dumps(corpus)
    return json.loads(_core._run_benchmark(json.dumps(config), corpus_json))

