"""
SEST command line.

  python sest_cli.py gen-toy   --out toy.jsonl --n 200 --seed 1
  python sest_cli.py extract   --corpus toy.jsonl --mode sect --out seqs.jsonl
  python sest_cli.py train     --corpus toy.jsonl --config run.json --out model.json [--eval dev.jsonl]
  python sest_cli.py eval      --model model.json --corpus dev.jsonl --report report.json
  python sest_cli.py gradcheck [--config run.json] --eps 1e-5
  python sest_cli.py ensemble  --models a.json b.json --corpus dev.jsonl --report ens.json
  python sest_cli.py overlap   --reports a.json b.json
  python sest_cli.py ablate    --corpus train.jsonl --eval dev.jsonl --seeds 1 2 3
  python sest_cli.py sweep     --corpus train.jsonl --eval dev.jsonl --windows 1 5 10 max

Exit codes: 0 success, 1 data/runtime error, 2 usage error.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from pydantic import ValidationError

from corpus_data import build_vocabularies, load_corpus, save_corpus
from evaluation import (
    config_digest,
    ensemble,
    evaluate,
    format_regions,
    overlap_sets,
    phrase_breakdown,
    predict_all,
    read_report,
    score_predictions,
    write_report,
)
from experiments import run_ablation, run_window_sweep
from extraction import describe, extract_pos, extract_sect, extract_sedt
from sest_config import (
    DEFAULT_WINDOWS,
    MAX_WINDOW,
    ExtractionConfig,
    Metric,
    OrderMode,
    SynEncoder,
    SynMode,
    ToyGrammarConfig,
    load_run_config,
    setup_logging,
)
from sest_errors import SestError, UsageError
from sest_model import GRADCHECK_FLOOR, GRADCHECK_MODES, SestModel, gradcheck_config, gradcheck_model, load, save, train
from toy_grammar.generator import gen_toy_corpus


def window_arg(value: str) -> int:
    if value.lower() == "max":
        return MAX_WINDOW
    try:
        window = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be a positive integer or 'max', got {value!r}")
    if window < 1:
        raise argparse.ArgumentTypeError(f"window must be >= 1, got {window}")
    return window


def _write_json(path: Optional[str], document: Any) -> None:
    text = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# ============================================================================
# COMANDOS
# ============================================================================

def cmd_gen_toy(args: argparse.Namespace) -> int:
    cfg = ToyGrammarConfig(n_examples=args.n, seed=args.seed, n_nouns=args.nouns, n_verbs=args.verbs,
                           n_adjectives=args.adjectives, distractors=args.distractors, modifiers=args.modifiers,
                           extra_sentences=args.extra_sentences)
    corpus = gen_toy_corpus(cfg)
    save_corpus(corpus, args.out)
    stats = corpus.statistics()
    print(f"✅ {stats['examples']} examples written to {args.out} "
          f"({stats['context_tokens']} context tokens, {stats['question_tokens']} question tokens)")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    mode = SynMode(args.mode)
    cfg = ExtractionConfig(window=args.window or DEFAULT_WINDOWS[mode.value], order_mode=args.order, seed=args.seed)
    vocabs = build_vocabularies(corpus, cfg.strip_dep_subcategories)
    lines = []
    for example in corpus:
        sentences = [("context", n, s) for n, s in enumerate(example.context)] + [("question", 0, example.question)]
        for part, number, sentence in sentences:
            for token in sentence.tokens:
                if mode == SynMode.SECT:
                    seq, labels = extract_sect(sentence.ctree, token.index, cfg, vocabs.const), vocabs.const
                elif mode == SynMode.SEDT:
                    seq, labels = extract_sedt(sentence.dtree, token.index, cfg, vocabs.dep, vocabs.word), vocabs.dep
                else:
                    seq, labels = extract_pos(token, vocabs.pos), vocabs.pos
                shown = describe(seq, labels, vocabs.word if mode == SynMode.SEDT else None)
                lines.append(json.dumps({"sentence_id": f"{example.id}/{part}/{number}", "token_index": token.index,
                                         "kind": seq.kind.value, "id": example.id, "part": part,
                                         "text": token.text, **shown}, sort_keys=True, ensure_ascii=False))
    output = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
        print(f"✅ {len(lines)} sequences written to {args.out}")
    else:
        sys.stdout.write(output)
    return 0


def _run_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        "syn_mode": getattr(args, "mode", None),
        "syn_encoder": getattr(args, "encoder", None),
        "window": getattr(args, "window", None),
        "order_mode": getattr(args, "order", None),
        "epochs": getattr(args, "epochs", None),
        "lr": getattr(args, "lr", None),
        "seed": getattr(args, "seed", None),
        "contextual_dim": getattr(args, "contextual_dim", None),
        "threads": getattr(args, "threads", None),
        "metric": getattr(args, "metric", None),
    }
    if getattr(args, "syntax_only", False):
        overrides["use_word_char"] = False
    if getattr(args, "progress", False):
        overrides["progress"] = True
    return overrides


def cmd_train(args: argparse.Namespace) -> int:
    run = load_run_config(args.config, _run_overrides(args))
    corpus = load_corpus(args.corpus)
    eval_corpus = load_corpus(args.eval) if args.eval else None
    settings = run.model_settings()
    model = SestModel(settings, build_vocabularies(corpus, settings.strip_dep_subcategories))
    train(model, corpus, eval_corpus, log_path=args.log, progress=run.progress, metric=run.metric, threads=run.threads,
          stop_at_em=args.stop_at_em)
    save(model, args.out)
    print(f"✅ model saved to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load(args.model)
    corpus = load_corpus(args.corpus)
    result = evaluate(model, corpus, metric=args.metric, threads=args.threads, squad_normalize=args.squad_normalize)
    if args.report:
        write_report(result, args.report)
    print(f"em={result.em:.4f} f1={result.f1:.4f} ({Metric(args.metric).value}, {len(corpus)} questions)")
    if args.phrases:
        _write_json(None, phrase_breakdown(result))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    base: Dict[str, Any] = {}
    if args.config:
        run = load_run_config(args.config)
        settings = run.model_settings()
        base = {name: getattr(settings, name) for name in run.model_fields_set if name in type(settings).model_fields}
    pairs = GRADCHECK_MODES
    if args.mode:
        pairs = [(SynMode(args.mode), SynEncoder(args.encoder))]
    elif "syn_mode" in base:
        pairs = [(base["syn_mode"], base.get("syn_encoder", SynEncoder.LSTM))]
    base.pop("syn_mode", None)
    base.pop("syn_encoder", None)

    worst = 0.0
    for mode, encoder in pairs:
        config = gradcheck_config(mode, encoder, **base)
        error = gradcheck_model(config, eps=args.eps)
        print(f"{mode.value}/{encoder.value}: max relative error {error:.3e}")
        worst = max(worst, error)
    print(f"max relative error {worst:.3e} (tolerance {args.tolerance:g}, denominator floor {GRADCHECK_FLOOR:g})")
    if worst >= args.tolerance:
        logging.error(f"[GRADCHECK] relative error {worst:.3e} exceeds tolerance {args.tolerance:g}")
        return 1
    return 0


def cmd_ensemble(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    examples = list(corpus)
    models = [load(path) for path in args.models]
    combined = ensemble([predict_all(model, examples, args.threads) for model in models])
    result = score_predictions(examples, combined, metric=args.metric, squad_normalize=args.squad_normalize)
    digests = sorted(config_digest(model.config) for model in models)
    result.config_digest = hashlib.sha256("\n".join(digests).encode("utf-8")).hexdigest()
    if args.report:
        write_report(result, args.report)
    print(f"ensemble of {len(models)}: em={result.em:.4f} f1={result.f1:.4f}")
    return 0


def cmd_overlap(args: argparse.Namespace) -> int:
    results = [read_report(path) for path in args.reports]
    regions = overlap_sets(results)
    _write_json(args.out, {"reports": args.reports, "regions": format_regions(regions, args.reports)})
    return 0


def _experiment_inputs(args: argparse.Namespace):
    run = load_run_config(args.config, _run_overrides(args))
    return run, load_corpus(args.corpus), load_corpus(args.eval)


def cmd_ablate(args: argparse.Namespace) -> int:
    run, train_corpus, dev_corpus = _experiment_inputs(args)
    settings = run.model_settings()
    if settings.syn_mode == SynMode.NONE:
        raise UsageError("ablation needs a syntactic mode (--mode pos|sect|sedt)")
    table = run_ablation(settings, train_corpus, dev_corpus, args.seeds, run.metric, run.threads, run.progress)
    _write_json(args.out, table)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    run, train_corpus, dev_corpus = _experiment_inputs(args)
    table = run_window_sweep(run.model_settings(), train_corpus, dev_corpus, args.seeds, args.windows,
                             run.metric, run.threads, run.progress)
    _write_json(args.out, table)
    return 0


# ============================================================================
# PARSER DE ARGUMENTOS
# ============================================================================

def _model_flags(parser: argparse.ArgumentParser) -> None:
    """Flags that override a config file; unset flags leave the file (or schema default) in place."""
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--mode", choices=[m.value for m in SynMode], help="syntactic input (schema default: sect)")
    parser.add_argument("--encoder", choices=[e.value for e in SynEncoder], help="syntactic encoder (schema default: lstm)")
    parser.add_argument("--window", type=window_arg, help="window size or 'max' (schema default: 10 sect, 20 sedt)")
    parser.add_argument("--order", choices=[o.value for o in OrderMode], help="sequence ablation (schema default: original)")
    parser.add_argument("--epochs", type=int, help="training epochs (schema default: 10)")
    parser.add_argument("--lr", type=float, help="Adam learning rate (schema default: 0.002)")
    parser.add_argument("--seed", type=int, help="master seed (schema default: 0)")
    parser.add_argument("--contextual-dim", type=int, help="d, feature size of H/U/M (schema default: 20)")
    parser.add_argument("--syntax-only", action="store_true", help="drop word and char embeddings")
    parser.add_argument("--metric", choices=[m.value for m in Metric], help="F1 metric (schema default: char)")
    parser.add_argument("--threads", type=int, help="evaluation threads (default: SEST_THREADS or 1)")
    parser.add_argument("--progress", action="store_true", help="show a progress bar per epoch")


def build_parser() -> argparse.ArgumentParser:
    formatter = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="sest", description="Structural embedding of syntactic trees for span QA",
                                     formatter_class=formatter)
    parser.add_argument("--log-level", default=None, help="logging level (default: SEST_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate a synthetic corpus", formatter_class=formatter)
    p.add_argument("--out", required=True, help="output corpus (JSONL)")
    p.add_argument("--n", type=int, default=100, help="number of examples")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--distractors", type=int, default=1, help="prepositional NPs sharing the answer's nouns (0-2)")
    p.add_argument("--modifiers", type=int, default=2, help="prepositional phrases with fresh nouns at random attachment sites (0-4)")
    p.add_argument("--extra-sentences", type=int, default=0, help="additional context sentences")
    p.add_argument("--nouns", type=int, default=12, help="nouns drawn from the lexicon")
    p.add_argument("--verbs", type=int, default=6, help="verbs drawn from the lexicon")
    p.add_argument("--adjectives", type=int, default=4, help="adjectives drawn from the lexicon")
    p.set_defaults(handler=cmd_gen_toy)

    p = sub.add_parser("extract", help="dump syntactic sequences", formatter_class=formatter)
    p.add_argument("--corpus", required=True, help="input corpus (JSONL)")
    p.add_argument("--mode", choices=["sect", "sedt", "pos"], default="sect", help="sequence kind")
    p.add_argument("--window", type=window_arg, default=None, help="window size or 'max' (default per mode: 10 sect, 20 sedt)")
    p.add_argument("--order", choices=[o.value for o in OrderMode], default="original", help="ablation")
    p.add_argument("--seed", type=int, default=0, help="ablation seed")
    p.add_argument("--out", default=None, help="output JSONL (default: stdout)")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="train a model", formatter_class=formatter)
    p.add_argument("--corpus", required=True, help="training corpus (JSONL)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--eval", default=None, help="dev corpus evaluated after every epoch")
    p.add_argument("--log", default=None, help="JSONL training log")
    p.add_argument("--stop-at-em", type=float, default=None, help="stop once dev EM reaches this value (needs --eval)")
    _model_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint", formatter_class=formatter)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--corpus", required=True, help="evaluation corpus (JSONL)")
    p.add_argument("--metric", choices=[m.value for m in Metric], default="char", help="F1 metric")
    p.add_argument("--report", default=None, help="evaluation report (JSON)")
    p.add_argument("--squad-normalize", action="store_true", help="lowercase, strip punctuation and articles")
    p.add_argument("--phrases", action="store_true", help="print predictions by constituent label")
    p.add_argument("--threads", type=int, default=1, help="evaluation threads")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model", formatter_class=formatter)
    p.add_argument("--config", default=None, help="JSON run configuration (dims override the toy sizes)")
    p.add_argument("--eps", type=float, default=1e-5, help="finite-difference step")
    p.add_argument("--tolerance", type=float, default=1e-4, help="maximum accepted relative error")
    p.add_argument("--mode", choices=[m.value for m in SynMode], default=None, help="single mode (default: all six)")
    p.add_argument("--encoder", choices=[e.value for e in SynEncoder], default="lstm", help="encoder with --mode")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("ensemble", help="sum-of-confidence ensemble", formatter_class=formatter)
    p.add_argument("--models", nargs="+", required=True, help="checkpoint paths")
    p.add_argument("--corpus", required=True, help="evaluation corpus (JSONL)")
    p.add_argument("--metric", choices=[m.value for m in Metric], default="char", help="F1 metric")
    p.add_argument("--report", default=None, help="evaluation report (JSON)")
    p.add_argument("--squad-normalize", action="store_true", help="lowercase, strip punctuation and articles")
    p.add_argument("--threads", type=int, default=1, help="evaluation threads")
    p.set_defaults(handler=cmd_ensemble)

    p = sub.add_parser("overlap", help="exact-match overlap between reports", formatter_class=formatter)
    p.add_argument("--reports", nargs="+", required=True, help="evaluation reports (JSON)")
    p.add_argument("--out", default=None, help="output JSON (default: stdout)")
    p.set_defaults(handler=cmd_overlap)

    for name, handler, text in (("ablate", cmd_ablate, "original / random-order / random-nodes runs"),
                                ("sweep", cmd_sweep, "window-size sweep")):
        p = sub.add_parser(name, help=text, formatter_class=formatter)
        p.add_argument("--corpus", required=True, help="training corpus (JSONL)")
        p.add_argument("--eval", required=True, help="dev corpus (JSONL)")
        p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5], help="one run per seed")
        p.add_argument("--out", default=None, help="summary JSON (default: stdout)")
        if name == "sweep":
            p.add_argument("--windows", nargs="+", default=["1", "5", "10", "max"], help="window sizes ('max' allowed)")
        _model_flags(p)
        p.set_defaults(handler=handler)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except SestError as e:
        logging.error(f"[CLI] {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        first = e.errors()[0]
        print(f"error: invalid option {first['loc']}: {first['msg']}", file=sys.stderr)
        return UsageError.exit_code
    except OSError as e:
        logging.error(f"[CLI] {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(run())
