"""
Multi-run experiment harnesses: order/node ablations and window-size sweeps.

Every configuration is trained once per seed; dev EM/F1 are summarized as
max, mean and standard deviation across the runs.
"""

import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from corpus_data import Corpus, build_vocabularies
from evaluation import EvalResult, evaluate
from sest_config import MAX_WINDOW, Metric, ModelConfig, OrderMode
from sest_errors import ArgumentError
from sest_model import SestModel, train


def summarize_runs(values: Sequence[float]) -> Dict[str, float]:
    """max / mean / sample SD (0 for a single run)."""
    if not values:
        raise ArgumentError("no runs to summarize")
    data = np.asarray(values, dtype=np.float64)
    return {
        "runs": len(data),
        "max": float(data.max()),
        "mean": float(data.mean()),
        "sd": float(data.std(ddof=1)) if len(data) > 1 else 0.0,
    }


def train_and_score(config: ModelConfig, train_corpus: Corpus, dev_corpus: Corpus, metric: Metric = Metric.CHAR,
                    threads: int = 1, progress: bool = False) -> EvalResult:
    vocabs = build_vocabularies(train_corpus, config.strip_dep_subcategories)
    model = SestModel(config, vocabs)
    train(model, train_corpus, progress=progress)
    return evaluate(model, dev_corpus, metric=metric, threads=threads)


def _runs(config: ModelConfig, seeds: Sequence[int], train_corpus: Corpus, dev_corpus: Corpus,
          metric: Metric, threads: int, progress: bool) -> dict:
    runs: List[dict] = []
    for seed in seeds:
        result = train_and_score(config.model_copy(update={"seed": seed}), train_corpus, dev_corpus,
                                 metric, threads, progress)
        runs.append({"seed": seed, "em": result.em, "f1": result.f1})
    return {
        "runs": runs,
        "em": summarize_runs([run["em"] for run in runs]),
        "f1": summarize_runs([run["f1"] for run in runs]),
    }


def run_ablation(config: ModelConfig, train_corpus: Corpus, dev_corpus: Corpus, seeds: Sequence[int],
                 metric: Metric = Metric.CHAR, threads: int = 1, progress: bool = False) -> Dict[str, dict]:
    """Secuencias originales, en orden aleatorio y con nodos aleatorios para el modo sintáctico configurado."""
    if not seeds:
        raise ArgumentError("ablation needs at least one seed")
    table = {}
    for order_mode in OrderMode:
        logging.info(f"[ABLATE] {config.syn_mode.value}/{config.syn_encoder.value} {order_mode.value}: {len(seeds)} runs")
        table[order_mode.value] = _runs(config.model_copy(update={"order_mode": order_mode}), seeds,
                                        train_corpus, dev_corpus, metric, threads, progress)
    return table


def window_label(window: int) -> str:
    return "max" if window >= MAX_WINDOW else str(window)


def run_window_sweep(config: ModelConfig, train_corpus: Corpus, dev_corpus: Corpus, seeds: Sequence[int],
                     windows: Optional[Sequence[Union[int, str]]] = None, metric: Metric = Metric.CHAR,
                     threads: int = 1, progress: bool = False) -> Dict[str, dict]:
    if not seeds:
        raise ArgumentError("window sweep needs at least one seed")
    sizes = [MAX_WINDOW if str(w) == "max" else int(w) for w in (windows or (1, 5, 10, "max"))]
    if any(size < 1 for size in sizes):
        raise ArgumentError(f"window sizes must be >= 1, got {sizes}")
    table = {}
    for size in sizes:
        logging.info(f"[SWEEP] window {window_label(size)}: {len(seeds)} runs")
        table[window_label(size)] = _runs(config.model_copy(update={"window": size}), seeds,
                                          train_corpus, dev_corpus, metric, threads, progress)
    return table
