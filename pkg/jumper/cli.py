from __future__ import annotations

# PYTHON_ARGCOMPLETE_OK

import argparse
import json
import logging
import sys
from collections.abc import Callable
from dataclasses import replace
from functools import wraps
from pathlib import Path

from jumper.exceptions import JumperError, UsageError
from jumper.utils import config_logger

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main():
    args = parse_args(sys.argv[1:])
    if not hasattr(args, "entry_func"):
        build_parser().print_help(sys.stderr)
        sys.exit(1)
    args.entry_func(args)


def emit_json(data):
    sys.stdout.write(json.dumps(data, indent=2, ensure_ascii=False) + "\n")
    sys.stdout.flush()


def handle_errors(logfile_name: str) -> Callable:
    """Configure logging, then turn package and I/O errors into exit codes"""

    def decorator(entry_func):
        @wraps(entry_func)
        def wrapper(args):
            config_logger(args.debug, logfile_name if args.debug else None)
            try:
                entry_func(args)
            except JumperError as e:
                logger.error(str(e))
                sys.exit(e.exit_code)
            except OSError as e:
                logger.error(f"{e.strerror or e}: {e.filename}" if e.filename else str(e))
                sys.exit(2)

        return wrapper

    return decorator


def _run_config(args):
    from jumper.config import load_config

    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed, train=replace(config.train, seed=args.seed))
    if getattr(args, "mode", None) is not None:
        mode = "cross_entropy" if args.mode == "xent" else "reinforce"
        config = replace(config, train=replace(config.train, mode=mode))
    if getattr(args, "embeddings", None) is not None:
        config = replace(config, data=replace(config.data, embeddings_path=args.embeddings))
    if getattr(args, "schema", None) is not None:
        config = replace(config, data=replace(config.data, schema_path=args.schema))
    return config


@handle_errors("train")
def train_entry(args):
    from jumper.cli_utils import fit, resolve_schema
    from jumper.config import default_config_json
    from jumper.corpus_parser import CorpusIO

    if args.print_default_config:
        sys.stdout.write(default_config_json() + "\n")
        return
    if args.train is None or args.out is None:
        raise UsageError("train needs --train and --out")

    config = _run_config(args)
    schema = resolve_schema(config, args.schema)
    train_examples = CorpusIO.parse_corpus(args.train, schema)
    dev_examples = CorpusIO.parse_corpus(args.dev, schema) if args.dev is not None else None

    result = fit(config, schema, train_examples, dev_examples)

    savepath = Path(args.out)
    savepath.parent.mkdir(parents=True, exist_ok=True)
    result.checkpoint(config).save(savepath)

    report_path = Path(f"{savepath}.report.jsonl")
    if args.report is not None:
        report_path = Path(args.report)
    with open(report_path, "w", encoding="utf-8") as f:
        for record in result.report.epochs:
            f.write(json.dumps(record.to_json()) + "\n")
    logger.info(f"Save training report to {report_path}")

    emit_json(
        {
            "checkpoint": str(savepath),
            "report": str(report_path),
            "epochs": len(result.report.epochs),
            "best_epoch": result.report.best_epoch,
            "best_dev_CA": result.report.best_dev_CA,
        }
    )


def _load_checkpoint(path: str):
    from jumper.checkpoint import Checkpoint

    if not Path(path).exists():
        raise UsageError(f"Model file not found: {path}")
    checkpoint = Checkpoint.load(path)
    return checkpoint, checkpoint.build_model()


@handle_errors("eval")
def eval_entry(args):
    from jumper.cli_utils import to_paragraphs
    from jumper.corpus_parser import CorpusIO
    from jumper.evaluation import evaluate
    from jumper.metrics import metrics_report
    from jumper.utils import get_num_threads

    checkpoint, model = _load_checkpoint(args.model)
    examples = CorpusIO.parse_corpus(args.data, checkpoint.schema)
    paragraphs = to_paragraphs(examples, checkpoint.vocab, checkpoint.config)
    gold_jumps = None
    if args.rationale_gold is not None:
        gold_jumps = CorpusIO.parse_rationale_gold(args.rationale_gold)

    records = evaluate(
        model, paragraphs, checkpoint.decoding, gold_jumps, max_workers=get_num_threads()
    )
    emit_json(metrics_report(records, tolerance=args.tolerance))


@handle_errors("explain")
def explain_entry(args):
    from jumper.cli_utils import load_input_text
    from jumper.rationale import RationaleConfig, explain_paragraph
    from jumper.text_data import make_paragraph

    checkpoint, model = _load_checkpoint(args.model)
    config = checkpoint.config
    text = load_input_text(args.input)
    paragraph = make_paragraph(
        text,
        checkpoint.vocab,
        max_tokens=config.data.max_tokens,
        max_sentences=config.data.max_sentences,
    )
    rationale_cfg = config.rationale if args.top_d is None else RationaleConfig(args.top_d)
    slots = [args.slot] if args.slot is not None else None
    emit_json(explain_paragraph(model, paragraph, rationale_cfg, slots, checkpoint.decoding))


@handle_errors("predict")
def predict_entry(args):
    from jumper.cli_utils import to_paragraphs
    from jumper.corpus_parser import CorpusIO
    from jumper.evaluation import decode_dataset
    from jumper.utils import get_num_threads

    checkpoint, model = _load_checkpoint(args.model)
    examples = CorpusIO.parse_corpus(args.data, checkpoint.schema)
    paragraphs = to_paragraphs(examples, checkpoint.vocab, checkpoint.config)
    decoded = decode_dataset(
        model, paragraphs, checkpoint.decoding, max_workers=get_num_threads(), show_progress=True
    )

    with open(args.out, "w", encoding="utf-8") as f:
        for result in decoded:
            record = {
                "id": result.example_id,
                "labels": {
                    slot: checkpoint.schema.class_name(slot, index)
                    for slot, index in result.predictions.items()
                },
                "jump_step": result.jump_steps,
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    logger.info(f"Save {len(decoded)} predictions to {args.out}")


@handle_errors("cv")
def cv_entry(args):
    import numpy as np

    from jumper.cli_utils import fit, resolve_schema, to_paragraphs
    from jumper.corpus_parser import CorpusIO
    from jumper.evaluation import evaluate
    from jumper.metrics import classification_accuracy, macro_f1
    from jumper.text_data import KFold, split_dataset
    from jumper.utils import get_num_threads

    config = _run_config(args)
    schema = resolve_schema(config, args.schema)
    examples = CorpusIO.parse_corpus(args.data, schema)
    num_folds = args.folds if args.folds is not None else config.data.kfold
    try:
        split = split_dataset(examples, KFold(num_folds), seed=config.train.seed)
    except ValueError as e:
        raise UsageError(str(e))

    folds = []
    for i in range(num_folds):
        train_examples, test_examples = split.fold(i)
        logger.info(
            f"Fold {i + 1}/{num_folds}: {len(train_examples)} train, {len(test_examples)} test"
        )
        result = fit(config, schema, train_examples)
        records = evaluate(
            result.model,
            to_paragraphs(test_examples, result.vocab, config),
            config.train.decoding,
            max_workers=get_num_threads(),
        )
        folds.append(
            {
                "fold": i,
                "num_test": len(test_examples),
                "CA": classification_accuracy(records),
                "macro_F1": macro_f1(records),
            }
        )

    emit_json(
        {
            "folds": folds,
            "mean_CA": float(np.mean([fold["CA"] for fold in folds])),
            "mean_macro_F1": float(np.mean([fold["macro_F1"] for fold in folds])),
        }
    )


@handle_errors("synth")
def synth_entry(args):
    from jumper.synthetic import PlantedCorpusConfig, generate_planted_corpus, write_planted_corpus

    try:
        cfg = PlantedCorpusConfig(
            num_paragraphs=args.num_paragraphs,
            num_classes=args.num_classes,
            min_sentences=args.min_sentences,
            max_sentences=args.max_sentences,
            seed=args.seed,
        )
    except ValueError as e:
        raise UsageError(str(e))
    paths = write_planted_corpus(generate_planted_corpus(cfg), args.output_dir)
    emit_json({name: str(path) for name, path in paths.items()})


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="jumper")
    subparser = parser.add_subparsers()

    train_subparser = subparser.add_parser(
        "train",
        parents=[get_config_parser(), get_train_parser(), get_common_parser()],
        help="Train a model and save the best checkpoint",
    )
    train_subparser.set_defaults(entry_func=train_entry)

    eval_subparser = subparser.add_parser(
        "eval",
        parents=[get_model_parser(), get_eval_parser(), get_common_parser()],
        help="Evaluate a checkpoint on a labelled corpus",
    )
    eval_subparser.set_defaults(entry_func=eval_entry)

    explain_subparser = subparser.add_parser(
        "explain",
        parents=[get_model_parser(), get_explain_parser(), get_common_parser()],
        help="Show decision distributions, jump steps and word rationales",
    )
    explain_subparser.set_defaults(entry_func=explain_entry)

    predict_subparser = subparser.add_parser(
        "predict",
        parents=[get_model_parser(), get_predict_parser(), get_common_parser()],
        help="Write predictions for a corpus",
    )
    predict_subparser.set_defaults(entry_func=predict_entry)

    cv_subparser = subparser.add_parser(
        "cv",
        parents=[get_config_parser(), get_cv_parser(), get_common_parser()],
        help="k-fold cross-validation",
    )
    cv_subparser.set_defaults(entry_func=cv_entry)

    synth_subparser = subparser.add_parser(
        "synth",
        parents=[get_synth_parser(), get_common_parser()],
        help="Generate a planted-evidence corpus",
    )
    synth_subparser.set_defaults(entry_func=synth_entry)

    return parser


def parse_args(args):
    return build_parser().parse_args(args)


def get_common_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Print debug information and write a log file",
    )
    return parser


def get_config_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        help="JSON config overriding the defaults (see --print_default_config)",
    )
    parser.add_argument(
        "--schema",
        default=None,
        help="Path to the slot schema (default: data.schema_path of the config)",
    )
    parser.add_argument(
        "--embeddings",
        default=None,
        help="Pretrained word vectors, one `token v1 ... vd` per line",
    )
    parser.add_argument(
        "--mode",
        choices=["reinforce", "xent"],
        default=None,
        help="Train the jumping policy or the cross-entropy classifier (default: reinforce)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Random seed for initialisation, shuffling and sampling (default: 0)",
    )
    return parser


def get_train_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--train",
        default=None,
        help="Training corpus (JSON lines)",
    )
    parser.add_argument(
        "--dev",
        default=None,
        help="Development corpus (default: a holdout of the training corpus)",
    )
    parser.add_argument(
        "-o",
        "--out",
        default=None,
        help="Checkpoint path",
    )
    parser.add_argument(
        "--report",
        default=None,
        help="Epoch report path (default: [OUT].report.jsonl)",
    )
    parser.add_argument(
        "--print_default_config",
        "--print-default-config",
        action="store_true",
        help="Print the default config as JSON and exit",
    )
    return parser


def get_model_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "-m",
        "--model",
        required=True,
        help="Checkpoint path",
    )
    return parser


def get_eval_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--data",
        required=True,
        help="Labelled corpus (JSON lines)",
    )
    parser.add_argument(
        "--rationale_gold",
        "--rationale-gold",
        default=None,
        help="Gold key sentences; enables jumping and overall accuracy",
    )
    parser.add_argument(
        "--tolerance",
        type=int,
        default=0,
        help="Count jumps up to this many sentences early as correct (default: 0)",
    )
    return parser


def get_explain_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "-i",
        "--input",
        required=True,
        help="Paragraph text, or a path to a text file",
    )
    parser.add_argument(
        "--slot",
        default=None,
        help="Only explain this slot (default: all slots)",
    )
    parser.add_argument(
        "--top_d",
        "--top-d",
        type=int,
        default=None,
        help="Number of features traced back to words (default: from the checkpoint, 10)",
    )
    return parser


def get_predict_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--data",
        required=True,
        help="Corpus (JSON lines); labels are optional",
    )
    parser.add_argument(
        "-o",
        "--out",
        required=True,
        help="Output path for JSON-lines predictions",
    )
    return parser


def get_cv_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "--data",
        required=True,
        help="Labelled corpus (JSON lines)",
    )
    parser.add_argument(
        "-k",
        "--folds",
        type=int,
        default=None,
        help="Number of folds (default: data.kfold of the config, 10)",
    )
    return parser


def get_synth_parser():
    parser = ArgumentParser(add_help=False)
    parser.add_argument(
        "-o",
        "--output_dir",
        "--output-dir",
        required=True,
        help="Directory for corpus.jsonl, schema.json and rationale_gold.jsonl",
    )
    parser.add_argument(
        "-n",
        "--num_paragraphs",
        type=int,
        default=2000,
        help="Number of paragraphs (default: 2000)",
    )
    parser.add_argument(
        "--num_classes",
        type=int,
        default=3,
        help="Number of classes (default: 3)",
    )
    parser.add_argument(
        "--min_sentences",
        type=int,
        default=4,
        help="Fewest sentences per paragraph (default: 4)",
    )
    parser.add_argument(
        "--max_sentences",
        type=int,
        default=6,
        help="Most sentences per paragraph (default: 6)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Random seed (default: 0)",
    )
    return parser


if __name__ == "__main__":
    main()
