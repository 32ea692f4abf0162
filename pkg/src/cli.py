# File: src/cli.py

"""
Command-line entry point: `ier <subcommand> ...`.

Results go to stdout (or the file given with -o); diagnostics go to the
log on stderr. Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import json
import logging
import os
import sys

from src.analysis.agreement import RatingsMatrix, krippendorff_alpha
from src.analysis.evaluation import top_confusions
from src.annotation.bio import DEFAULT_MAX_DEPTH, ENCODING_INNERMOST, ENCODING_NESTED, encode
from src.annotation.bracket_io import (
    FORMAT_BRACKET, corpus_statistics, filter_executable, load_corpus, write_corpus,
)
from src.config_loader import config_section
from src.corpus.synth import SynthConfig, generate
from src.exceptions import EmptyAfterFilterError, IerError
from src.features.featurizer import load_word_vectors
from src.modeling import train as pipeline
from src.modeling.predictor import load_action_model, load_crf_model, predict_batch
from src.modeling.preprocess import MODE_ACTION, MODE_ENTITY, SplitSpec, action_examples, entity_examples, preprocess

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Reports usage errors through UsageError so run() can return 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


# --- Output Helpers ---

def _open_output(path):
    if path in (None, "-"):
        return sys.stdout, False
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _emit(text, path=None):
    stream, close = _open_output(path)
    try:
        stream.write(text)
        if text and not text.endswith("\n"):
            stream.write("\n")
    finally:
        if close:
            stream.close()


def _load(args):
    corpus, errors = load_corpus(args.corpus, args.format)
    return corpus, errors


def _too_many_errors(args, errors):
    """True (and logged) when the rejected lines exceed --max-errors; 0 disables the check."""
    if args.max_errors > 0 and len(errors) > args.max_errors:
        log.error(f"{len(errors)} parse errors exceed --max-errors {args.max_errors}")
        return True
    return False


def _embeddings(args):
    return load_word_vectors(args.embeddings) if getattr(args, "embeddings", None) else None


def _write_report(metrics_dict, path):
    if path:
        pipeline.write_json(metrics_dict, path)


# --- Subcommands ---

def cmd_parse(args):
    corpus, errors = _load(args)
    for err in errors:
        sys.stderr.write(f"{err}\n")
    lines = [f"parsed {len(corpus)} utterances, {len(errors)} errors"]
    if args.stats:
        lines.append(json.dumps(corpus_statistics(corpus), indent=1, sort_keys=True))
    _emit("\n".join(lines), args.output)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    return EXIT_OK


def cmd_encode(args):
    corpus, errors = _load(args)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    lines = []
    for utt in corpus:
        tags = encode(utt, args.mode, args.max_depth)
        lines.append(" ".join(f"{tok.text}\t{tag}" for tok, tag in zip(utt.tokens, tags)))
    _emit("\n".join(lines), args.output)
    return EXIT_OK


def _examples_for(args, corpus, mode):
    """The evaluation examples: the held-out test split, or every executable utterance."""
    if args.split == "all":
        utterances = filter_executable(corpus).utterances
        if not utterances:
            raise EmptyAfterFilterError("No executable utterances to evaluate")
    else:
        utterances = preprocess(corpus, SplitSpec.from_config(mode, args.seed))["test"].utterances
    if mode == MODE_ACTION:
        return action_examples(utterances)
    return entity_examples(utterances, args.mode, args.max_depth)


def cmd_train_action(args):
    corpus, errors = _load(args)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    splits = preprocess(corpus, SplitSpec.from_config(MODE_ACTION, args.seed))
    model = pipeline.train_action_level(splits["train"].examples, _embeddings(args), l2=args.l2,
                                        class_weighting=args.class_weighting or None)
    pipeline.write_json(model.to_json_dict(), args.output)
    metrics = pipeline.evaluate_action_level(model, splits["test"].examples)
    _emit(metrics.to_table())
    _write_report(metrics.to_dict(), args.json)
    return EXIT_OK


def cmd_eval_action(args):
    corpus, errors = _load(args)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    model = load_action_model(args.model, _embeddings(args))
    metrics = pipeline.evaluate_action_level(model, _examples_for(args, corpus, MODE_ACTION))
    report = metrics.to_table()
    confusions = top_confusions(metrics, 5)
    if confusions:
        report += "\ntop confusions (gold -> predicted):\n" + "\n".join(
            f"  {g} -> {p}: {c}" for g, p, c in confusions)
    _emit(report, args.output)
    _write_report(metrics.to_dict(), args.json)
    if args.confusion:
        metrics.confusion_frame().to_csv(args.confusion)
    return EXIT_OK


def cmd_train_entities(args):
    corpus, errors = _load(args)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    splits = preprocess(corpus, SplitSpec.from_config(MODE_ENTITY, args.seed), args.mode, args.max_depth)
    model = pipeline.train_entity_level(
        splits["train"].examples, l2=args.l2,
        use_action_features=False if args.no_action_features else None,
        dev_examples=splits["dev"].examples, tune=args.tune)
    pipeline.write_json(model.to_json_dict(), args.output)
    scores = pipeline.evaluate_entity_level(model, splits["test"].examples)
    _emit(_entity_table(scores))
    _write_report({k: m.to_dict() for k, m in scores.items()}, args.json)
    return EXIT_OK


def _entity_table(scores):
    return ("span-level (exact match):\n" + scores["span"].to_table()
            + "\n\ntoken-level (BIO tags):\n" + scores["token"].to_table())


def cmd_eval_entities(args):
    corpus, errors = _load(args)
    if _too_many_errors(args, errors):
        return EXIT_DATA
    model = load_crf_model(args.model)
    action_model = None
    if args.actions == "pred":
        if not args.action_model:
            raise UsageError("--pred-actions needs --action-model")
        action_model = load_action_model(args.action_model, _embeddings(args))
    scores = pipeline.evaluate_entity_level(model, _examples_for(args, corpus, MODE_ENTITY), action_model)
    _emit(_entity_table(scores), args.output)
    _write_report({k: m.to_dict() for k, m in scores.items()}, args.json)
    return EXIT_OK


def cmd_predict(args):
    action_model = load_action_model(args.action_model, _embeddings(args))
    entity_model = load_crf_model(args.entity_model)
    if args.input in (None, "-"):
        raw = sys.stdin.read()
    else:
        with open(args.input, "r", encoding="utf-8") as f:
            raw = f.read()
    texts = [line for line in raw.splitlines() if line.strip()]
    results = predict_batch(action_model, entity_model, texts, tau=args.tau)
    _emit("\n".join(json.dumps(r.to_json_dict(), ensure_ascii=False) for r in results), args.output)
    return EXIT_OK


def cmd_synth(args):
    cfg = SynthConfig.from_config(hard_mode=args.hard or None, hard_share=args.hard_share, seed=args.seed)
    corpus = generate(cfg, args.n, args.seed)
    stream, close = _open_output(args.output)
    try:
        write_corpus(corpus, stream, args.format)
    finally:
        if close:
            stream.close()
    return EXIT_OK


def cmd_agreement(args):
    ratings = RatingsMatrix.from_csv(args.ratings)
    alpha = krippendorff_alpha(ratings)
    _emit(f"krippendorff_alpha\t{alpha:.6f}", args.output)
    _write_report({"krippendorff_alpha": alpha, "items": ratings.n_items,
                   "raters": list(ratings.raters)}, args.json)
    return EXIT_OK


# --- Argument Parsing ---

def build_parser():
    split_defaults = config_section("splits")
    entity_defaults = config_section("modeling", "entities")
    synth_defaults = config_section("synth")

    parser = _Parser(prog="ier", description="Parse natural-language image edit requests.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def corpus_args(p):
        p.add_argument("corpus", help="Annotated corpus file.")
        p.add_argument("--format", default=FORMAT_BRACKET, choices=["bracket", "bracket-lines", "jsonl"])
        p.add_argument("--max-errors", type=int, default=0, help="Exit 2 above this many rejected lines (0: never).")

    def seed_arg(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"Split seed (default {split_defaults.get('seed', 42)}).")

    def encoding_args(p):
        p.add_argument("--mode", default=ENCODING_INNERMOST, choices=[ENCODING_INNERMOST, ENCODING_NESTED])
        p.add_argument("--max-depth", type=int, default=entity_defaults.get("max_depth", DEFAULT_MAX_DEPTH))

    def report_args(p):
        p.add_argument("--json", default=None, help="Also write the metrics as JSON to this path.")

    def out_arg(p, **kw):
        p.add_argument("-o", "--output", **kw)

    p = sub.add_parser("parse", help="Validate a corpus and report malformed lines.")
    corpus_args(p)
    p.add_argument("--stats", action="store_true", help="Print corpus statistics as JSON.")
    out_arg(p, default=None)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("encode", help="Print BIO tags per token.")
    corpus_args(p)
    encoding_args(p)
    out_arg(p, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train-action", help="Train the level-1 action classifier.")
    corpus_args(p)
    seed_arg(p)
    p.add_argument("--embeddings", default=None, help="Word-vector text file.")
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--class-weighting", action="store_true")
    report_args(p)
    out_arg(p, default=os.path.join(pipeline.MODELS_DIR, pipeline.ACTION_MODEL_FILE))
    p.set_defaults(func=cmd_train_action)

    p = sub.add_parser("eval-action", help="Score a saved action model.")
    corpus_args(p)
    seed_arg(p)
    p.add_argument("--model", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--split", choices=["test", "all"], default="test")
    p.add_argument("--confusion", default=None, help="Write the confusion matrix as CSV.")
    report_args(p)
    out_arg(p, default=None)
    p.set_defaults(func=cmd_eval_action)

    p = sub.add_parser("train-entities", help="Train the level-2 CRF.")
    corpus_args(p)
    seed_arg(p)
    encoding_args(p)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--tune", action="store_true", help="Pick L2 on the dev split.")
    p.add_argument("--no-action-features", action="store_true")
    report_args(p)
    out_arg(p, default=os.path.join(pipeline.MODELS_DIR, pipeline.ENTITY_MODEL_FILE))
    p.set_defaults(func=cmd_train_entities)

    p = sub.add_parser("eval-entities", help="Score a saved CRF.")
    corpus_args(p)
    seed_arg(p)
    encoding_args(p)
    p.add_argument("--model", default=None)
    p.add_argument("--action-model", default=None)
    p.add_argument("--embeddings", default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--gold-actions", dest="actions", action="store_const", const="gold")
    group.add_argument("--pred-actions", dest="actions", action="store_const", const="pred")
    p.set_defaults(actions="gold")
    p.add_argument("--split", choices=["test", "all"], default="test")
    report_args(p)
    out_arg(p, default=None)
    p.set_defaults(func=cmd_eval_entities)

    p = sub.add_parser("predict", help="Raw text lines to EditCommand JSONL.")
    p.add_argument("input", nargs="?", default=None, help="Text file, one request per line (default stdin).")
    p.add_argument("--action-model", default=None)
    p.add_argument("--entity-model", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--tau", type=float, default=None)
    out_arg(p, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="Generate a synthetic annotated corpus.")
    p.add_argument("--n", type=int, default=synth_defaults.get("n", 2000))
    p.add_argument("--seed", type=int, default=synth_defaults.get("seed", 7))
    p.add_argument("--hard", action="store_true", help="Share verbs between action pairs.")
    p.add_argument("--hard-share", type=float, default=None)
    p.add_argument("--format", default=FORMAT_BRACKET, choices=["bracket", "bracket-lines", "jsonl"])
    out_arg(p, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("agreement", help="Krippendorff's alpha from a ratings CSV.")
    p.add_argument("ratings", help="CSV: header of rater names, one row per item, empty = missing.")
    report_args(p)
    out_arg(p, default=None)
    p.set_defaults(func=cmd_agreement)
    return parser


def run(argv=None):
    """Runs one subcommand and returns its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK

    if args.command == "synth" and args.n < 0:
        parser.print_usage(sys.stderr)
        sys.stderr.write("ier: error: --n must be >= 0\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"ier: error: {e}\n")
        return EXIT_USAGE
    except (IerError, FileNotFoundError, ValueError) as e:
        log.error(f"{args.command} failed: {e}")
        return EXIT_DATA
