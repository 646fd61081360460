"""Desk-scale experiment profile and trend runners.

The profile shrinks the full-scale setup to CPU size while preserving the
relative comparisons: vocabulary 2,000, embeddings 64, 2 layers, 2 heads,
feedforward 128, batch 32, 2,000 pretraining steps, 50,000 generated
sentences. Checkpoints are cached under the working directory, so repeated
invocations (including the acceptance suite) reuse completed runs.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import sampledata
from ..corpusio import build_vocab, encode, fit_length_distribution
from ..langgen import LengthDistribution, language_preset
from ..neural import EncoderConfig, EncoderModel, save_checkpoint
from ..rngstream import stream
from .batching import TrainConfig
from .parsing import ParserConfig, train_parser
from .lm import pretrain
from .runs import write_manifest
from .transfer import transfer_lm

DESK_VOCAB = 2000
DESK_EMBED = 64
DESK_LAYERS = 2
DESK_HEADS = 2
DESK_FF = 128
DESK_LSTM_HIDDEN = 60
DESK_BATCH = 32
DESK_STEPS = 2000
DESK_SENTENCES = 50_000
# Table 5's warmup (4000) would swallow a 2000-step run whole; keep the
# full-scale ramp:decay ratio instead so desk pretraining leaves the ramp.
DESK_WARMUP = 800

TRANSFER_STEPS = 1000
ENGLISH_SEED = 20_240_501
ENGLISH_TRAIN = 18_000
ENGLISH_EVAL = 2_000
TREEBANK_TRAIN = 500
TREEBANK_DEV = 200

PRETRAIN_SEEDS = (101, 102, 103)
TRANSFER_SEEDS = (201, 202, 203)

RANDOM_BASELINE = "random_weights"


def desk_encoder_config(architecture: str = "transformer") -> EncoderConfig:
    return EncoderConfig(
        architecture=architecture,
        n_layers=DESK_LAYERS,
        embed_dim=DESK_EMBED,
        lstm_hidden=DESK_LSTM_HIDDEN,
        ff_dim=DESK_FF,
        n_heads=DESK_HEADS,
        dropout=0.1,
        max_len=128,
    )


def desk_train_config(objective: str, seed: int,
                      steps: int = DESK_STEPS) -> TrainConfig:
    return TrainConfig(objective=objective, batch_size=DESK_BATCH,
                       total_steps=steps, warmup=DESK_WARMUP, seed=seed)


def desk_parser_config(seed: int) -> ParserConfig:
    return ParserConfig(word_dim=48, char_dim=16, char_hidden=16,
                        arc_dim=64, label_dim=32, batch_size=16,
                        epochs=20, patience=3, seed=seed)


# ---------------------------------------------------------------------------
# Shared English resources
# ---------------------------------------------------------------------------

def english_resources(workdir) -> dict:
    """L2 corpus, vocabulary, length distribution, treebanks (cached)."""
    workdir = Path(workdir)
    data = workdir / "data"
    data.mkdir(parents=True, exist_ok=True)
    train_path = data / "english_train.txt"
    eval_path = data / "english_eval.txt"
    if not train_path.exists():
        train_lines = sampledata.english_sentences(ENGLISH_SEED, ENGLISH_TRAIN)
        train_path.write_text("\n".join(train_lines) + "\n")
    if not eval_path.exists():
        eval_lines = sampledata.english_sentences(
            ENGLISH_SEED, ENGLISH_EVAL, offset=ENGLISH_TRAIN)
        eval_path.write_text("\n".join(eval_lines) + "\n")
    train_lines = train_path.read_text().splitlines()
    eval_lines = eval_path.read_text().splitlines()
    vocab_map = build_vocab(train_lines, cap=DESK_VOCAB)
    lengths = fit_length_distribution(train_lines, 6, 60)
    tb_train = sampledata.english_treebank(
        ENGLISH_SEED + 1, TREEBANK_TRAIN)
    tb_dev = sampledata.english_treebank(
        ENGLISH_SEED + 1, TREEBANK_DEV, offset=TREEBANK_TRAIN)
    return {
        "train_lines": train_lines,
        "eval_lines": eval_lines,
        "vocab": vocab_map,
        "lengths": lengths,
        "treebank_train": tb_train,
        "treebank_dev": tb_dev,
    }


def _l2_vocab_total(vocab_map) -> int:
    # content forms + OOV + MASK + PAD, mirroring langgen's reserved layout
    return vocab_map.size + 3


def _l2_pad_id(vocab_map) -> int:
    return vocab_map.size + 2


# ---------------------------------------------------------------------------
# Pretraining runs (cached by checkpoint path)
# ---------------------------------------------------------------------------

def pretrain_checkpoint(workdir, language: str, seed: int,
                        architecture: str = "transformer",
                        objective: str = "clm",
                        steps: int = DESK_STEPS) -> Path:
    """Pretrain one encoder on one artificial language; reuse if cached."""
    workdir = Path(workdir)
    ckpt_dir = workdir / "ckpt"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    path = ckpt_dir / f"{objective}_{architecture}_{language}_s{seed}.ckpt"
    if path.exists():
        return path
    tmp = path.with_suffix(f".tmp{seed}")
    resources = english_resources(workdir)
    if language == RANDOM_BASELINE:
        model = EncoderModel(desk_encoder_config(architecture), DESK_VOCAB + 3,
                             stream(seed, "random-baseline-init"))
        save_checkpoint(tmp, model.state_dict(), {
            "encoder": model.config.to_dict(),
            "vocab_size": model.vocab_size,
            "objective": objective,
            "seed": seed,
        })
        tmp.replace(path)
        return path
    config = language_preset(language, DESK_VOCAB, resources["lengths"],
                             seed=seed, sentence_count=DESK_SENTENCES)
    from ..langgen import generate_corpus

    sentences = list(generate_corpus(config))
    model = EncoderModel(desk_encoder_config(architecture),
                         config.vocabulary.total_size,
                         stream(seed, f"{language}-init"))
    result = pretrain(model, sentences, config.vocabulary,
                      desk_train_config(objective, seed, steps),
                      checkpoint_path=tmp,
                      extra_config={"language": language})
    tmp.replace(path)
    write_manifest(workdir / "runs" / path.stem, command="pretrain",
                   language=language, architecture=architecture,
                   objective=objective, seed=seed,
                   config_hash=config.sha256(),
                   checkpoints=[str(path)],
                   metrics={"final_loss": result.final_loss})
    return path


def _pretrain_task(args) -> str:
    workdir, language, seed, architecture, objective = args
    return str(pretrain_checkpoint(Path(workdir), language, seed,
                                   architecture=architecture,
                                   objective=objective))


def ensure_checkpoints(workdir, languages, architecture: str,
                       objective: str, jobs: int) -> None:
    """Materialize every (language, seed) checkpoint before fan-out, so
    parallel downstream tasks never race on the same pretraining run."""
    tasks = [(str(workdir), language, seed, architecture, objective)
             for language in languages for seed in PRETRAIN_SEEDS
             if not (Path(workdir) / "ckpt" /
                     f"{objective}_{architecture}_{language}_s{seed}.ckpt").exists()]
    if tasks:
        list(_run_tasks(_pretrain_task, tasks, jobs))


def _transfer_task(args) -> tuple[str, float]:
    workdir, language, pretrain_seed, transfer_seed, architecture = args
    workdir = Path(workdir)
    ckpt = pretrain_checkpoint(workdir, language, pretrain_seed,
                               architecture=architecture, objective="clm")
    resources = english_resources(workdir)
    vocab_map = resources["vocab"]
    train_ids = encode(resources["train_lines"], vocab_map)
    eval_ids = encode(resources["eval_lines"], vocab_map)
    config = desk_train_config("clm", transfer_seed, steps=TRANSFER_STEPS)
    result = transfer_lm(ckpt, train_ids, eval_ids,
                         _l2_vocab_total(vocab_map), _l2_pad_id(vocab_map),
                         config)
    run_id = f"transfer_{architecture}_{language}_p{pretrain_seed}_t{transfer_seed}"
    write_manifest(workdir / "runs" / run_id, command="transfer-lm",
                   language=language, architecture=architecture,
                   objective="clm", seed=transfer_seed,
                   checkpoints=[str(ckpt)],
                   metrics={"perplexity": result.perplexity},
                   extra={"pretrain_seed": pretrain_seed})
    return language, result.perplexity


def clm_transfer_trend(workdir, languages=("nesting_dependency", "uniform"),
                       architecture: str = "transformer",
                       jobs: int = 2) -> dict[str, list[float]]:
    """3 pretrain x 3 transfer seeds per language plus the random baseline.

    Returns perplexity lists keyed by language. Results are also cached as
    JSON so reruns are free.
    """
    workdir = Path(workdir)
    cache = workdir / f"clm_trend_{architecture}.json"
    if cache.exists():
        return json.loads(cache.read_text())
    english_resources(workdir)   # materialize before forking
    ensure_checkpoints(workdir, (*languages, RANDOM_BASELINE), architecture,
                       "clm", jobs)
    tasks = []
    for language in (*languages, RANDOM_BASELINE):
        for p_seed in PRETRAIN_SEEDS:
            for t_seed in TRANSFER_SEEDS:
                tasks.append((str(workdir), language, p_seed, t_seed,
                              architecture))
    results: dict[str, list[float]] = {}
    for language, ppl in _run_tasks(_transfer_task, tasks, jobs):
        results.setdefault(language, []).append(ppl)
    cache.write_text(json.dumps(results, indent=2, sort_keys=True))
    return results


def _parser_task(args) -> tuple[str, float, float]:
    workdir, language, pretrain_seed, parser_seed = args
    workdir = Path(workdir)
    ckpt = pretrain_checkpoint(workdir, language, pretrain_seed,
                               architecture="transformer", objective="mlm")
    resources = english_resources(workdir)
    config = desk_parser_config(parser_seed)
    _, metrics = train_parser(ckpt, resources["treebank_train"],
                              resources["treebank_dev"], config)
    run_id = f"parse_{language}_p{pretrain_seed}_f{parser_seed}"
    write_manifest(workdir / "runs" / run_id, command="parse",
                   language=language, architecture="transformer",
                   objective="mlm", seed=parser_seed,
                   checkpoints=[str(ckpt)],
                   metrics={"uas": metrics.uas, "las": metrics.las},
                   extra={"pretrain_seed": pretrain_seed})
    return language, metrics.uas, metrics.las


def mlm_parsing_trend(workdir,
                      languages=("nesting_dependency", "flat_dependency",
                                 "uniform"),
                      jobs: int = 2) -> dict[str, dict[str, list[float]]]:
    """UAS/LAS over the 3x3 grid for each language (MLM pretraining)."""
    workdir = Path(workdir)
    cache = workdir / "mlm_parsing_trend.json"
    if cache.exists():
        return json.loads(cache.read_text())
    english_resources(workdir)
    ensure_checkpoints(workdir, languages, "transformer", "mlm", jobs)
    tasks = []
    for language in languages:
        for p_seed in PRETRAIN_SEEDS:
            for f_seed in TRANSFER_SEEDS:
                tasks.append((str(workdir), language, p_seed, f_seed))
    results: dict[str, dict[str, list[float]]] = {}
    for language, uas, las in _run_tasks(_parser_task, tasks, jobs):
        bucket = results.setdefault(language, {"uas": [], "las": []})
        bucket["uas"].append(uas)
        bucket["las"].append(las)
    cache.write_text(json.dumps(results, indent=2, sort_keys=True))
    return results


def _probe_task(args) -> tuple[str, str, dict]:
    workdir, language, pretrain_seed, mode = args
    from ..probe import ProbeConfig, generate_probe_data, train_probes

    workdir = Path(workdir)
    objective = "clm" if mode == "clm" else "mlm"
    ckpt = pretrain_checkpoint(workdir, language, pretrain_seed,
                               architecture="transformer",
                               objective=objective)
    dataset = generate_probe_data(seed=9100)
    config = ProbeConfig(mode=mode, seed=pretrain_seed)
    result = train_probes(ckpt, dataset, config,
                          encoder_id=f"{language}_s{pretrain_seed}")
    run_id = f"probe_{mode}_{language}_p{pretrain_seed}"
    write_manifest(workdir / "runs" / run_id, command="probe",
                   language=language, architecture="transformer",
                   objective=objective, seed=pretrain_seed,
                   checkpoints=[str(ckpt)],
                   metrics={f"acc@{p}": a
                            for p, a in result.test_accuracy.items()})
    return language, mode, {str(p): a for p, a in result.test_accuracy.items()}


def probing_trend(workdir, clm_languages=("uniform", RANDOM_BASELINE),
                  mlm_languages=("nesting_dependency",),
                  jobs: int = 2) -> dict:
    """Per-position probe accuracies.

    CLM probes run per pretraining seed for the compared languages; MLM
    probes fill in the bidirectional grid for one structured language.
    """
    workdir = Path(workdir)
    cache = workdir / "probing_trend.json"
    if cache.exists():
        return json.loads(cache.read_text())
    english_resources(workdir)
    ensure_checkpoints(workdir, clm_languages, "transformer", "clm", jobs)
    ensure_checkpoints(workdir, mlm_languages, "transformer", "mlm", jobs)
    tasks = []
    for language in clm_languages:
        for p_seed in PRETRAIN_SEEDS:
            tasks.append((str(workdir), language, p_seed, "clm"))
    for language in mlm_languages:
        tasks.append((str(workdir), language, PRETRAIN_SEEDS[0], "mlm"))
    results: dict = {"clm": {}, "mlm": {}}
    for language, mode, accs in _run_tasks(_probe_task, tasks, jobs):
        results[mode].setdefault(language, []).append(accs)
    cache.write_text(json.dumps(results, indent=2, sort_keys=True))
    return results


def _run_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) == 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(fn, tasks)
