"""Command-line front end.

Subcommands: gen, stats, ingest, pretrain, transfer-lm, parse, pos, probe,
report. Exit codes: 0 success, 1 usage error, 2 configuration/data error,
3 numerical failure. The environment variable TILTLAB_SEED overrides
config-file seeds for CI sweeps.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import corpstats, corpusio, langgen
from .errors import ConfigError, DataError, NumericalError, TiltLabError
from .neural import EncoderConfig, EncoderModel
from .rngstream import stream
from .tilt import (
    ParserConfig,
    TaggerConfig,
    TrainConfig,
    metric_rows,
    pretrain,
    read_manifests,
    train_parser,
    train_pos,
    transfer_lm,
    write_manifest,
)
from .tilt.runs import Metrics


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _seed_override(seed: int) -> int:
    env = os.environ.get("TILTLAB_SEED")
    return int(env) if env else seed


def _emit(payload, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    config = langgen.GenConfig.from_ini(Path(args.config).read_text())
    if args.seed is not None or os.environ.get("TILTLAB_SEED"):
        seed = _seed_override(args.seed if args.seed is not None else config.seed)
        config = langgen.with_seed(config, seed)
    sentences = langgen.generate_corpus(config, jobs=args.jobs)
    count = langgen.write_corpus(args.out, sentences, config.vocabulary,
                                 header_sha=config.sha256())
    print(f"wrote {count} sentences to {args.out}", file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    if args.config:
        gen_config = langgen.GenConfig.from_ini(Path(args.config).read_text())
        vocab = gen_config.vocabulary
        target = gen_config.length_dist.as_histogram()
    else:
        vocab = langgen.Vocabulary(args.vocab_size, rendering=args.rendering)
        target = None
    corpus = langgen.read_corpus(args.corpus, vocab)
    report = corpstats.corpus_report(corpus, vocab, target_lengths=target)
    _emit(report, args.out)
    if args.check == "nested" and report["nested_rate"] != 1.0:
        print(f"nested check failed: rate={report['nested_rate']}",
              file=sys.stderr)
        return 2
    return 0


def cmd_ingest(args) -> int:
    summary = {}
    if args.text:
        lines = corpusio.read_text(args.text)
        vocab = corpusio.build_vocab(lines, cap=args.cap)
        if args.out_vocab:
            vocab.save(args.out_vocab)
        dist = corpusio.fit_length_distribution(lines, args.min_length,
                                                args.max_length)
        summary["sentences"] = len(lines)
        summary["vocab_size"] = vocab.size
        summary["length_support"] = [int(dist.lengths.min()),
                                     int(dist.lengths.max())]
    if args.conllu:
        treebank = corpusio.read_conllu(args.conllu)
        summary["treebank_sentences"] = len(treebank)
        summary["labels"] = list(treebank.label_set())
    if not summary:
        raise ConfigError("ingest needs --text and/or --conllu")
    _emit(summary, args.out)
    return 0


def _read_pretrain_ini(path: str) -> dict:
    cp = configparser.ConfigParser()
    cp.read_string(Path(path).read_text())
    return {
        "preset": cp.get("language", "preset"),
        "vocab_size": cp.getint("language", "vocab_size", fallback=2000),
        "length_min": cp.getint("language", "length_min", fallback=6),
        "length_max": cp.getint("language", "length_max", fallback=60),
        "length_fit": cp.get("language", "length_fit", fallback=""),
        "sentences": cp.getint("language", "sentences", fallback=50_000),
        "architecture": cp.get("model", "architecture", fallback="transformer"),
        "layers": cp.getint("model", "layers", fallback=2),
        "embed": cp.getint("model", "embed", fallback=64),
        "lstm_hidden": cp.getint("model", "lstm_hidden", fallback=60),
        "ff": cp.getint("model", "ff", fallback=128),
        "heads": cp.getint("model", "heads", fallback=2),
        "dropout": cp.getfloat("model", "dropout", fallback=0.1),
        "objective": cp.get("train", "objective", fallback="clm"),
        "steps": cp.getint("train", "steps", fallback=2000),
        "batch": cp.getint("train", "batch", fallback=32),
        "warmup": cp.getint("train", "warmup", fallback=4000),
        "seeds": [int(s) for s in
                  cp.get("train", "seeds", fallback="101").split(",")],
    }


def _pretrain_one(payload) -> str:
    spec, seed, out_dir, deterministic = payload
    if spec["length_fit"]:
        lines = corpusio.read_text(spec["length_fit"])
        lengths = corpusio.fit_length_distribution(
            lines, spec["length_min"], spec["length_max"])
    else:
        lengths = langgen.LengthDistribution.uniform(
            spec["length_min"], spec["length_max"])
    gen_config = langgen.language_preset(
        spec["preset"], spec["vocab_size"], lengths,
        seed=seed, sentence_count=spec["sentences"])
    sentences = list(langgen.generate_corpus(gen_config))
    enc_config = EncoderConfig(
        architecture=spec["architecture"], n_layers=spec["layers"],
        embed_dim=spec["embed"], lstm_hidden=spec["lstm_hidden"],
        ff_dim=spec["ff"], n_heads=spec["heads"], dropout=spec["dropout"],
        max_len=max(128, spec["length_max"] + 8))
    model = EncoderModel(enc_config, gen_config.vocabulary.total_size,
                         stream(seed, f"{spec['preset']}-init"))
    train_config = TrainConfig(
        objective=spec["objective"], batch_size=spec["batch"],
        total_steps=spec["steps"], warmup=spec["warmup"], seed=seed,
        deterministic=deterministic)
    out_dir = Path(out_dir)
    run_dir = out_dir / f"pretrain_{spec['preset']}_s{seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    ckpt = run_dir / "encoder.ckpt"
    result = pretrain(model, sentences, gen_config.vocabulary, train_config,
                      checkpoint_path=ckpt,
                      extra_config={"language": spec["preset"]})
    write_manifest(run_dir, command="pretrain", language=spec["preset"],
                   architecture=spec["architecture"],
                   objective=spec["objective"], seed=seed,
                   config_hash=gen_config.sha256(),
                   checkpoints=[str(ckpt)],
                   metrics={"final_loss": result.final_loss})
    return str(ckpt)


def cmd_pretrain(args) -> int:
    spec = _read_pretrain_ini(args.config)
    seeds = [_seed_override(s) for s in spec["seeds"]]
    if args.seed is not None:
        seeds = [args.seed]
    payloads = [(spec, seed, args.out, args.deterministic) for seed in seeds]
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(_pretrain_one, payloads))
    else:
        paths = [_pretrain_one(p) for p in payloads]
    for path in paths:
        print(path)
    return 0


def cmd_transfer_lm(args) -> int:
    train_lines = corpusio.read_text(args.train)
    eval_lines = corpusio.read_text(args.eval)
    vocab = corpusio.build_vocab(train_lines, cap=args.cap)
    train_ids = corpusio.encode(train_lines, vocab)
    eval_ids = corpusio.encode(eval_lines, vocab)
    seed = _seed_override(args.seed)
    config = TrainConfig(objective="clm", batch_size=args.batch,
                         total_steps=args.steps, seed=seed,
                         deterministic=args.deterministic)
    result = transfer_lm(args.checkpoint, train_ids, eval_ids,
                         vocab.size + 3, vocab.size + 2, config)
    run_dir = Path(args.out)
    write_manifest(run_dir, command="transfer-lm", language=args.language,
                   architecture="", objective="clm", seed=seed,
                   checkpoints=[args.checkpoint],
                   metrics=Metrics(perplexity=result.perplexity).as_dict())
    _emit({"perplexity": result.perplexity}, None)
    return 0


def cmd_parse(args) -> int:
    tb_train = corpusio.read_conllu(args.train)
    tb_dev = corpusio.read_conllu(args.dev)
    seed = _seed_override(args.seed)
    config = ParserConfig(seed=seed, use_mst=args.mst,
                          deterministic=args.deterministic,
                          epochs=args.epochs)
    _, metrics = train_parser(args.checkpoint, tb_train, tb_dev, config)
    write_manifest(Path(args.out), command="parse", language=args.language,
                   architecture="", objective="mlm", seed=seed,
                   checkpoints=[args.checkpoint],
                   metrics=Metrics(uas=metrics.uas, las=metrics.las,
                                   tokens=metrics.tokens).as_dict())
    _emit({"uas": metrics.uas, "las": metrics.las}, None)
    return 0


def cmd_pos(args) -> int:
    tb_train = corpusio.read_conllu(args.train)
    tb_dev = corpusio.read_conllu(args.dev)
    seed = _seed_override(args.seed)
    config = TaggerConfig(seed=seed, deterministic=args.deterministic,
                          epochs=args.epochs)
    _, accuracy = train_pos(args.checkpoint, tb_train, tb_dev, config)
    write_manifest(Path(args.out), command="pos", language=args.language,
                   architecture="", objective="mlm", seed=seed,
                   checkpoints=[args.checkpoint],
                   metrics=Metrics(tagging_accuracy=accuracy).as_dict())
    _emit({"tagging_accuracy": accuracy}, None)
    return 0


def cmd_probe(args) -> int:
    from .probe import ProbeConfig, generate_probe_data, train_probes

    seed = _seed_override(args.seed)
    dataset = generate_probe_data(seed=args.data_seed)
    config = ProbeConfig(mode=args.mode, seed=seed,
                         deterministic=args.deterministic,
                         max_epochs=args.epochs)
    result = train_probes(args.checkpoint, dataset, config)
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    csv_path = run_dir / "probe.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["encoder_id", "mode",
                                                "relative_position",
                                                "test_accuracy"])
        writer.writeheader()
        writer.writerows(result.csv_rows())
    write_manifest(run_dir, command="probe", language=args.language,
                   architecture="", objective=args.mode, seed=seed,
                   checkpoints=[args.checkpoint],
                   metrics={f"acc@{p}": a
                            for p, a in result.test_accuracy.items()})
    _emit({str(p): a for p, a in result.test_accuracy.items()}, None)
    return 0


def cmd_report(args) -> int:
    manifests = read_manifests(args.runs)
    rows = metric_rows(manifests)
    if args.metric:
        rows = [r for r in rows if r["metric"] == args.metric]
        if not rows:
            raise DataError(f"no runs carry metric {args.metric!r}")
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        key = (r["language"], r["architecture"], r["metric"])
        groups.setdefault(key, []).append(float(r["value"]))
    summary = []
    for (language, architecture, metric), values in sorted(groups.items()):
        agg = corpstats.RunAggregate(tuple(values))
        summary.append({
            "language": language, "architecture": architecture,
            "metric": metric, "mean": agg.mean,
            "std": agg.std if agg.n >= 2 else None, "n": agg.n,
        })
    payload: dict = {"groups": summary}
    if args.compare:
        lang_a, lang_b = args.compare.split(":")
        if not args.metric:
            raise ConfigError("--compare needs --metric")
        a = [float(r["value"]) for r in rows if r["language"] == lang_a]
        b = [float(r["value"]) for r in rows if r["language"] == lang_b]
        if not a or not b:
            raise DataError(f"missing runs for comparison {args.compare!r}")
        welch = corpstats.welch_t_test(a, b)
        payload["welch"] = {"a": lang_a, "b": lang_b, "t": welch.t,
                            "df": welch.df, "p_value": welch.p_value}
    if args.csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["language", "architecture",
                                                 "metric", "mean", "std", "n"])
        writer.writeheader()
        writer.writerows(summary)
        Path(args.csv).write_text(buf.getvalue())
    if args.per_run_csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["run_id", "language",
                                                 "architecture", "objective",
                                                 "metric", "value", "seed"])
        writer.writeheader()
        writer.writerows(rows)
        Path(args.per_run_csv).write_text(buf.getvalue())
    _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# Wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="tiltlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an artificial corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="validate and characterize a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", help="generation config for vocabulary/lengths")
    p.add_argument("--vocab-size", type=int, default=2000)
    p.add_argument("--rendering", default="plain-integer",
                   choices=["plain-integer", "pair-bracketed"])
    p.add_argument("--check", choices=["nested"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ingest", help="build vocabularies and histograms")
    p.add_argument("--text")
    p.add_argument("--conllu")
    p.add_argument("--cap", type=int, default=32_000)
    p.add_argument("--min-length", type=int, default=6)
    p.add_argument("--max-length", type=int, default=60)
    p.add_argument("--out-vocab")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pretrain", help="pretrain encoders on an artificial language")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", default=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("transfer-lm", help="frozen-encoder language modeling")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=2000)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=201)
    p.add_argument("--language", default="english")
    p.add_argument("--deterministic", action="store_true", default=True)
    p.set_defaults(func=cmd_transfer_lm)

    p = sub.add_parser("parse", help="biaffine parsing over a frozen encoder")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=201)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--mst", action="store_true")
    p.add_argument("--language", default="english")
    p.add_argument("--deterministic", action="store_true", default=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("pos", help="PoS tagging over a frozen encoder")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=201)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--language", default="english")
    p.add_argument("--deterministic", action="store_true", default=True)
    p.set_defaults(func=cmd_pos)

    p = sub.add_parser("probe", help="context-recovery probing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=["clm", "mlm"], default="clm")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=201)
    p.add_argument("--data-seed", type=int, default=9100)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--language", default="")
    p.add_argument("--deterministic", action="store_true", default=True)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", help="aggregate run manifests")
    p.add_argument("--runs", required=True)
    p.add_argument("--metric")
    p.add_argument("--compare", help="langA:langB Welch comparison")
    p.add_argument("--csv", help="write the grouped table as CSV")
    p.add_argument("--per-run-csv", help="write one row per run/metric")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except TiltLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
