"""
Answer metrics, corpus evaluation, ensembling and overlap analysis.

Exact match compares whitespace-normalized strings. F1 is computed over
character multisets (default) or whitespace tokens. With squad_normalize
both strings are lowercased and stripped of punctuation and articles first.
"""

import hashlib
import itertools
import json
import logging
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from corpus_data import QaExample
from sest_config import Metric
from sest_errors import DataError
from treebank import span_label


# ============================================================================
# MÉTRICAS
# ============================================================================

def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def squad_normalize_text(text: str) -> str:
    text = text.lower()
    text = "".join(ch for ch in text if ch not in set(string.punctuation))
    text = re.sub(r"\b(a|an|the)\b", " ", text)
    return normalize_whitespace(text)


def _prepare(text: str, squad_normalize: bool) -> str:
    return squad_normalize_text(text) if squad_normalize else normalize_whitespace(text)


def exact_match(pred: str, gold: str, squad_normalize: bool = False) -> int:
    return int(_prepare(pred, squad_normalize) == _prepare(gold, squad_normalize))


def _multiset_f1(pred_items: List[str], gold_items: List[str]) -> float:
    if not pred_items and not gold_items:
        return 1.0
    if not pred_items or not gold_items:
        return 0.0
    common = sum((Counter(pred_items) & Counter(gold_items)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_items)
    recall = common / len(gold_items)
    return 2 * precision * recall / (precision + recall)


def f1_char(pred: str, gold: str, squad_normalize: bool = False) -> float:
    pred, gold = _prepare(pred, squad_normalize), _prepare(gold, squad_normalize)
    return _multiset_f1([ch for ch in pred if not ch.isspace()], [ch for ch in gold if not ch.isspace()])


def f1_token(pred: str, gold: str, squad_normalize: bool = False) -> float:
    return _multiset_f1(_prepare(pred, squad_normalize).split(), _prepare(gold, squad_normalize).split())


METRICS = {Metric.CHAR: f1_char, Metric.TOKEN: f1_token}


# ============================================================================
# RESULTS
# ============================================================================

@dataclass
class QuestionResult:
    id: str
    predicted_text: str
    gold_text: str
    em_hit: bool
    f1: float
    confidence: float
    begin: int
    end: int
    predicted_phrase: Optional[str] = None
    gold_phrase: Optional[str] = None


@dataclass
class EvalResult:
    metric: Metric
    em: float
    f1: float
    per_question: List[QuestionResult] = field(default_factory=list)
    config_digest: Optional[str] = None

    def hits(self) -> Dict[str, bool]:
        return {q.id: q.em_hit for q in self.per_question}


def config_digest(config: BaseModel) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _phrase(example: QaExample, begin: int, end: int) -> Optional[str]:
    first, local_begin = example.locate(begin)
    last, local_end = example.locate(end)
    if first != last:
        return None
    return span_label(example.context[first].ctree, local_begin, local_end)


def score_predictions(examples: Sequence[QaExample], predictions: Dict[str, "Prediction"],
                      metric: Metric = Metric.CHAR, squad_normalize: bool = False) -> EvalResult:
    """Scores span predictions keyed by question id against the gold spans."""
    metric = Metric(metric)
    score_f1 = METRICS[metric]
    per_question = []
    for example in examples:
        prediction = predictions.get(example.id)
        if prediction is None:
            raise DataError(f"no prediction for question {example.id}")
        predicted_text = example.span_text(prediction.begin, prediction.end)
        gold_text = example.answer_text
        per_question.append(QuestionResult(
            id=example.id,
            predicted_text=predicted_text,
            gold_text=gold_text,
            em_hit=bool(exact_match(predicted_text, gold_text, squad_normalize)),
            f1=score_f1(predicted_text, gold_text, squad_normalize),
            confidence=prediction.confidence,
            begin=prediction.begin,
            end=prediction.end,
            predicted_phrase=_phrase(example, prediction.begin, prediction.end),
            gold_phrase=_phrase(example, *example.answer),
        ))
    n = len(per_question)
    em = sum(q.em_hit for q in per_question) / n if n else 0.0
    f1 = sum(q.f1 for q in per_question) / n if n else 0.0
    return EvalResult(metric, em, f1, per_question)


def predict_all(model, examples: Sequence[QaExample], threads: int = 1) -> Dict[str, "Prediction"]:
    """Predicciones por id; los resultados quedan en el orden del corpus sin importar el número de hilos."""
    from sest_model import predict

    # annotate up front so worker threads only read the example caches
    for example in examples:
        model.annotate(example)
    if threads <= 1:
        predictions = [predict(model, example) for example in examples]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(lambda example: predict(model, example), examples))
    return {example.id: prediction for example, prediction in zip(examples, predictions)}


def evaluate(model, corpus: Iterable[QaExample], metric: Metric = Metric.CHAR, threads: int = 1,
             squad_normalize: bool = False) -> EvalResult:
    examples = list(corpus)
    result = score_predictions(examples, predict_all(model, examples, threads), metric, squad_normalize)
    result.config_digest = config_digest(model.config)
    logging.info(f"[EVAL] {len(examples)} questions: em={result.em:.4f} f1={result.f1:.4f} ({Metric(metric).value})")
    return result


# ============================================================================
# ENSAMBLE Y SOLAPAMIENTO
# ============================================================================

def _check_aligned(id_sets: List[set], what: str) -> None:
    if any(ids != id_sets[0] for ids in id_sets[1:]):
        raise DataError(f"{what}: question ids differ between inputs")


def ensemble(inputs: Sequence[Dict[str, "Prediction"]]) -> Dict[str, "Prediction"]:
    """Por pregunta, el span con la mayor suma de confianzas entre los modelos."""
    from sest_model import Prediction

    if not inputs:
        raise DataError("ensemble needs at least one model")
    _check_aligned([set(predictions) for predictions in inputs], "ensemble")
    combined = {}
    for question_id in inputs[0]:
        scores: Dict[Tuple[int, int], float] = {}
        texts: Dict[Tuple[int, int], str] = {}
        for predictions in inputs:
            p = predictions[question_id]
            scores[(p.begin, p.end)] = scores.get((p.begin, p.end), 0.0) + p.confidence
            texts.setdefault((p.begin, p.end), p.answer_text)
        (begin, end), score = min(scores.items(), key=lambda item: (-item[1], item[0][0], item[0][1]))
        combined[question_id] = Prediction(begin, end, score, texts[(begin, end)])
    return combined


def overlap_sets(results: Sequence[EvalResult]) -> Dict[Tuple[bool, ...], int]:
    """Question counts per membership pattern: key[i] is whether model i answered exactly."""
    if not results:
        raise DataError("overlap needs at least one result")
    hits = [result.hits() for result in results]
    _check_aligned([set(h) for h in hits], "overlap")
    regions = {pattern: 0 for pattern in itertools.product((True, False), repeat=len(results))}
    for question_id in hits[0]:
        regions[tuple(h[question_id] for h in hits)] += 1
    return regions


def format_regions(regions: Dict[Tuple[bool, ...], int], names: Sequence[str]) -> List[dict]:
    rows = []
    for pattern, count in regions.items():
        members = [name for name, inside in zip(names, pattern) if inside]
        rows.append({"in": members, "count": count})
    return rows


def phrase_breakdown(result: EvalResult) -> Dict[str, Dict[str, float]]:
    """Predictions grouped by the constituent label of the predicted span."""
    groups: Dict[str, List[QuestionResult]] = {}
    for q in result.per_question:
        groups.setdefault(q.predicted_phrase or "-", []).append(q)
    return {
        label: {"count": len(items), "em": sum(q.em_hit for q in items) / len(items)}
        for label, items in sorted(groups.items())
    }


# ============================================================================
# REPORTES
# ============================================================================

def write_report(result: EvalResult, path: str) -> None:
    document = {
        "config_digest": result.config_digest,
        "metric": Metric(result.metric).value,
        "em": result.em,
        "f1": result.f1,
        "per_question": [asdict(q) for q in result.per_question],
    }
    Path(path).write_text(json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    logging.info(f"[EVAL] report written to {path}")


def read_report(path: str) -> EvalResult:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        return EvalResult(
            metric=Metric(document["metric"]),
            em=float(document["em"]),
            f1=float(document["f1"]),
            per_question=[QuestionResult(**q) for q in document["per_question"]],
            config_digest=document.get("config_digest"),
        )
    except OSError as e:
        raise DataError(f"cannot read report {path}: {e.strerror or e}")
    except (ValueError, KeyError, TypeError) as e:
        raise DataError(f"malformed report {path}: {e}")
