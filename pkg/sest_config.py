"""
Central SEST configuration: pydantic schemas, environment defaults and
logging setup.

Precedence for a run: CLI flags > JSON config file > environment (.env) > schema defaults.
"""

import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator, model_validator

from sest_errors import UsageError

# Larger than any sentence: the "Max" window.
MAX_WINDOW = 1_000_000

DEFAULT_PUNCTUATION = frozenset({"$", ":", "#", ".", "''", "``", ","})

DEFAULT_WINDOWS = {"sect": 10, "sedt": 20, "pos": 1, "none": 1}


# ============================================================================
# ENUMERACIONES
# ============================================================================

class SynMode(str, Enum):
    NONE = "none"
    POS = "pos"
    SECT = "sect"
    SEDT = "sedt"


class SynEncoder(str, Enum):
    LSTM = "lstm"
    CNN = "cnn"


class OrderMode(str, Enum):
    ORIGINAL = "original"
    RANDOM_ORDER = "random-order"
    RANDOM_NODES = "random-nodes"


class Metric(str, Enum):
    CHAR = "char"
    TOKEN = "token"


# ============================================================================
# ESQUEMAS DE CONFIGURACIÓN (PYDANTIC)
# ============================================================================

class ExtractionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    window: int = Field(10, ge=1, description="Maximum number of syntactic nodes per sequence")
    order_mode: OrderMode = Field(OrderMode.ORIGINAL, description="Ablation applied after extraction")
    seed: int = Field(0, ge=0, lt=2**64, description="Seed for the ablation generators")
    punctuation_set: FrozenSet[str] = Field(DEFAULT_PUNCTUATION, description="Labels that empty a SECT/POS sequence when first")
    strip_dep_subcategories: bool = Field(True, description="nmod:poss -> nmod")

    @field_serializer("punctuation_set")
    def _sorted_punctuation(self, value: FrozenSet[str]) -> list:
        return sorted(value)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    syn_mode: SynMode = Field(SynMode.SECT, description="Syntactic input: none, pos, sect, sedt")
    syn_encoder: SynEncoder = Field(SynEncoder.LSTM, description="Encoder for syntactic sequences")
    window: Optional[int] = Field(None, ge=1, description="Window size; default 10 for sect, 20 for sedt")
    order_mode: OrderMode = Field(OrderMode.ORIGINAL, description="Ablation of syntactic sequences")
    use_word_char: bool = Field(True, description="False keeps only the structural embedding (syntax-only models)")
    word_dim: int = Field(100, ge=1)
    char_dim: int = Field(8, ge=1)
    char_filters: int = Field(100, ge=1)
    char_width: int = Field(5, ge=1)
    max_word_chars: int = Field(16, ge=1)
    node_dim: int = Field(8, ge=1)
    syn_hidden: int = Field(30, ge=1, description="LSTM hidden per direction, or CNN filter count")
    syn_filter_len: int = Field(3, ge=1, description="CNN filter length for syntactic sequences")
    contextual_dim: int = Field(20, ge=2, description="d: feature dim of H, U and M (even)")
    contextual_layers: int = Field(1, ge=1)
    max_span_len: int = Field(15, ge=1)
    lr: float = Field(0.002, ge=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    epochs: int = Field(10, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    strip_dep_subcategories: bool = True
    punctuation_set: FrozenSet[str] = DEFAULT_PUNCTUATION
    freeze_word_vectors: bool = Field(False, description="Keep GloVe vectors fixed")
    glove_path: Optional[str] = None

    @field_serializer("punctuation_set")
    def _sorted_punctuation(self, value: FrozenSet[str]) -> list:
        return sorted(value)

    @field_validator("contextual_dim")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("contextual_dim must be even (two directions of d/2)")
        return value

    @model_validator(mode="after")
    def _has_input(self) -> "ModelConfig":
        if not self.use_word_char and self.syn_mode == SynMode.NONE:
            raise ValueError("use_word_char=false needs a syntactic mode")
        return self

    @property
    def effective_window(self) -> int:
        if self.window is not None:
            return self.window
        return DEFAULT_WINDOWS[self.syn_mode.value]

    def extraction_config(self) -> ExtractionConfig:
        return ExtractionConfig(
            window=self.effective_window,
            order_mode=self.order_mode,
            seed=self.seed,
            punctuation_set=self.punctuation_set,
            strip_dep_subcategories=self.strip_dep_subcategories,
        )


class ToyGrammarConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_examples: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    n_nouns: int = Field(12, ge=4, le=40, description="Nouns drawn from the lexicon")
    n_verbs: int = Field(6, ge=1, le=20)
    n_adjectives: int = Field(4, ge=0, le=12)
    distractors: int = Field(1, ge=0, le=2, description="Prepositional NPs sharing words with the answer")
    modifiers: int = Field(2, ge=0, le=4, description="Prepositional phrases with fresh nouns")
    extra_sentences: int = Field(0, ge=0, description="Additional context sentences with other verbs")

    @model_validator(mode="after")
    def _enough_verbs(self) -> "ToyGrammarConfig":
        if self.extra_sentences >= self.n_verbs:
            raise ValueError("each context sentence needs its own verb: extra_sentences < n_verbs")
        return self


class RunConfig(ModelConfig):
    """Flat run document: ModelConfig plus paths and command options."""

    corpus: Optional[str] = None
    eval_corpus: Optional[str] = None
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    report: Optional[str] = None
    log: Optional[str] = None
    metric: Metric = Metric.CHAR
    squad_normalize: bool = False
    threads: int = Field(1, ge=1)
    eps: float = Field(1e-5, gt=0.0)
    tolerance: float = Field(1e-4, gt=0.0)
    progress: bool = False

    def model_settings(self) -> ModelConfig:
        fields = set(ModelConfig.model_fields)
        return ModelConfig(**{k: v for k, v in self.model_dump().items() if k in fields})


# ============================================================================
# CARGA DE CONFIGURACIÓN (CLI > JSON > ENTORNO > DEFAULTS)
# ============================================================================

def env_defaults() -> Dict[str, Any]:
    """Valores por defecto leídos del entorno (primero se carga el .env)."""
    load_dotenv()
    defaults: Dict[str, Any] = {}
    if os.environ.get("SEST_THREADS"):
        defaults["threads"] = int(os.environ["SEST_THREADS"])
    if os.environ.get("SEST_PROGRESS"):
        defaults["progress"] = os.environ["SEST_PROGRESS"].lower() in ("1", "true", "yes")
    return defaults


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Construye un RunConfig: los flags ganan sobre el archivo y el archivo sobre el entorno."""
    document: Dict[str, Any] = env_defaults()
    if path:
        try:
            document.update(json.loads(Path(path).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}")
    for key, value in (overrides or {}).items():
        if value is not None:
            document[key] = value
    try:
        return RunConfig(**document)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise UsageError(f"invalid configuration '{where}': {first['msg']}")


def setup_logging(level: Optional[str] = None) -> None:
    load_dotenv()
    level = (level or os.environ.get("SEST_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", force=True)
    # numpy/pydantic stay quiet; only SEST lines reach the console
    logging.getLogger("numpy").setLevel(logging.ERROR)
