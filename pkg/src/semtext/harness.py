"""Experiment harness: config loading, training, sweeps, benchmarks, traces.

One YAML file plus the master seed fully specifies an experiment; every
default is materialized into the manifest written next to the artifacts, so
a run can be reproduced from its output directory alone.  Sweep cells get
their channel seeds from sha256(master_seed, cell id), which keeps results
independent of execution order and worker count.
"""

from __future__ import annotations

import hashlib
import json
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import datagen
from .channel import ChannelConfig
from .coding import HuffmanCodebook, build_codebook, count_frequencies, \
    export_codebook, import_codebook
from .completion import CharModel, CharTrainingConfig, char_train, \
    load_char_model, save_char_model
from .corpus import Corpus, CorpusSplit, PreprocessConfig, Vocabulary, \
    build_ngram_dataset, build_vocabulary, load_corpus, split_corpus
from .predictors import MarkovPredictor, NeuralPredictor, NeuralSLM, \
    TrainingConfig, TransitionMatrix, load_mcm, load_slm, mcm_fit, save_mcm, \
    save_slm, slm_train
from .protocol import Metrics, PolicyConfig, compute_metrics, \
    flatten_corpus, run_session, trace_to_text
from .serialize import sha256_file, vocab_fingerprint
from .similarity import EmbeddingTable

CSV_COLUMNS = ("policy", "predictor", "codec", "epsilon", "param", "cbar",
               "sbar", "pct_wp", "pct_wc", "t_avg_ms")
CONTEXT_CSV_COLUMNS = ("l_context", "threshold", "cbar", "sbar")


class ConfigError(ValueError):
    """Raised with a field path when the experiment config is invalid."""


class StaleModelError(RuntimeError):
    """Raised when artifacts on disk do not match the manifest hashes."""


@dataclass(frozen=True)
class SweepLists:
    thresholds: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                     0.8, 0.9, 1.0)
    periods: tuple[int, ...] = (1, 2, 3, 5, 8)
    epsilons: tuple[float, ...] = (0.0,)
    codecs: tuple[str, ...] = ("none",)
    predictors: tuple[str, ...] = ("slm", "mcm")


@dataclass(frozen=True)
class ContextStudy:
    l_context_values: tuple[int, ...] = ()
    thresholds: tuple[float, ...] = (0.1, 0.3, 1.0)


@dataclass(frozen=True)
class TraceSpec:
    policy: str = "TP"
    param: float = 0.5
    predictor: str = "slm"
    codec: str = "none"
    epsilon: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: str
    out_dir: str
    master_seed: int = 0
    synthetic: datagen.SyntheticConfig | None = None
    preprocess: PreprocessConfig = PreprocessConfig()
    train_fraction: float = 0.95
    test_sentences: int = 100
    slm: TrainingConfig = TrainingConfig()
    char_model: CharTrainingConfig | None = CharTrainingConfig()
    l_context: int = 10
    seed_words: int | None = None
    bits_per_char: int = 8
    sweep: SweepLists = SweepLists()
    context_study: ContextStudy = ContextStudy()
    trace: TraceSpec = TraceSpec()
    workers: int = 1

    @property
    def effective_seed_words(self) -> int:
        return self.seed_words if self.seed_words is not None else self.l_context


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return mapping[key]


def _build(cls, mapping: dict, path: str):
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(mapping) - fields
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v
                      for k, v in mapping.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str, seed_override: int | None = None,
                out_override: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    corpus = raw.get("corpus", {})
    if not isinstance(corpus, dict):
        raise ConfigError("corpus: must be a mapping")
    corpus_path = _require(corpus, "path", "corpus")
    synthetic = None
    if "synthetic" in corpus:
        synthetic = _build(datagen.SyntheticConfig, corpus["synthetic"],
                           "corpus.synthetic")
    split = raw.get("split", {})
    char_raw = raw.get("char_model", {})
    char_enabled = char_raw.pop("enabled", True) if isinstance(char_raw, dict) \
        else True
    policy = raw.get("policy", {})
    cfg = ExperimentConfig(
        corpus_path=corpus_path,
        out_dir=out_override or _require(raw, "out_dir", "<root>"),
        master_seed=(seed_override if seed_override is not None
                     else raw.get("master_seed", 0)),
        synthetic=synthetic,
        preprocess=_build(PreprocessConfig, raw.get("preprocess", {}),
                          "preprocess"),
        train_fraction=split.get("train_fraction", 0.95),
        test_sentences=split.get("test_sentences", 100),
        slm=_build(TrainingConfig, raw.get("slm", {}), "slm"),
        char_model=(_build(CharTrainingConfig, char_raw, "char_model")
                    if char_enabled else None),
        l_context=policy.get("l_context", 10),
        seed_words=policy.get("seed_words"),
        bits_per_char=raw.get("bits_per_char", 8),
        sweep=_build(SweepLists, raw.get("sweep", {}), "sweep"),
        context_study=_build(ContextStudy, raw.get("context_study", {}),
                             "context_study"),
        trace=_build(TraceSpec, raw.get("trace", {}), "trace"),
        workers=raw.get("workers", 1),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not cfg.sweep.thresholds and not cfg.sweep.periods:
        raise ConfigError("sweep: thresholds and periods cannot both be empty")
    for t in cfg.sweep.thresholds:
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"sweep.thresholds: {t} outside [0, 1]")
    for p in cfg.sweep.periods:
        if p < 1:
            raise ConfigError(f"sweep.periods: {p} must be >= 1")
    for e in cfg.sweep.epsilons:
        if not 0.0 <= e <= 1.0:
            raise ConfigError(f"sweep.epsilons: {e} outside [0, 1]")
    for c in cfg.sweep.codecs:
        if c not in ("none", "huffman"):
            raise ConfigError(f"sweep.codecs: unknown codec {c!r}")
    for p in cfg.sweep.predictors:
        if p not in ("slm", "mcm"):
            raise ConfigError(f"sweep.predictors: unknown predictor {p!r}")
    if cfg.l_context < 1:
        raise ConfigError("policy.l_context: must be >= 1")
    if cfg.seed_words is not None and cfg.seed_words < cfg.l_context:
        raise ConfigError("policy.seed_words: must be >= policy.l_context")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")


def materialize(cfg: ExperimentConfig) -> dict:
    """Full config with every default made explicit, manifest-ready."""
    out = {
        "corpus": {"path": cfg.corpus_path},
        "out_dir": cfg.out_dir,
        "master_seed": cfg.master_seed,
        "preprocess": asdict(cfg.preprocess),
        "split": {"train_fraction": cfg.train_fraction,
                  "test_sentences": cfg.test_sentences},
        "slm": asdict(cfg.slm),
        "char_model": asdict(cfg.char_model) if cfg.char_model else None,
        "policy": {"l_context": cfg.l_context,
                   "seed_words": cfg.effective_seed_words},
        "bits_per_char": cfg.bits_per_char,
        "sweep": asdict(cfg.sweep),
        "context_study": asdict(cfg.context_study),
        "trace": asdict(cfg.trace),
        "workers": cfg.workers,
    }
    if cfg.synthetic is not None:
        out["corpus"]["synthetic"] = asdict(cfg.synthetic)
    return out


# ---------------------------------------------------------------------------
# Training


ARTIFACTS = ("slm.stxw", "mcm.stxw", "char.stxw", "codebook.txt")


def prepare_corpus(cfg: ExperimentConfig) -> CorpusSplit:
    if cfg.synthetic is not None:
        datagen.write_corpus(cfg.corpus_path, cfg.synthetic)
    if not os.path.exists(cfg.corpus_path):
        raise ConfigError(f"corpus.path: file not found: {cfg.corpus_path}")
    corpus = load_corpus(cfg.corpus_path, cfg.preprocess)
    return split_corpus(corpus, cfg.train_fraction, cfg.test_sentences)


def cmd_train(cfg: ExperimentConfig) -> dict:
    """Train all models, write artifacts plus manifest; idempotent per seed."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    split = prepare_corpus(cfg)
    train = split.train
    vocab = build_vocabulary(train)
    vhash = vocab_fingerprint(vocab.words_in_token_order())
    data = build_ngram_dataset(train, vocab)

    # Effective training seeds mix the master seed with the declared config
    # seed, so one YAML file reproduces bit-identical artifacts per master
    # seed while distinct master seeds give independent models.
    slm_cfg = TrainingConfig(**asdict(cfg.slm) | {
        "seed": _derive_seed(cfg.master_seed, f"slm|{cfg.slm.seed}")})
    model = slm_train(data, slm_cfg, vocab.size, vhash)
    save_slm(model, vocab, _path(cfg, "slm.stxw"))

    matrix = mcm_fit(train, vocab)
    save_mcm(matrix, vocab, _path(cfg, "mcm.stxw"))

    if cfg.char_model is not None:
        char_cfg = CharTrainingConfig(**asdict(cfg.char_model) | {
            "seed": _derive_seed(cfg.master_seed, f"char|{cfg.char_model.seed}")})
        cmodel = char_train(train, char_cfg)
        save_char_model(cmodel, _path(cfg, "char.stxw"))

    book = build_codebook(count_frequencies(train.raw_text))
    with open(_path(cfg, "codebook.txt"), "w", encoding="utf-8") as fh:
        fh.write(export_codebook(book))

    manifest = {
        "config": materialize(cfg),
        "corpus": {
            "sha256": sha256_file(cfg.corpus_path),
            "train_sentences": train.num_sentences,
            "test_sentences": split.test.num_sentences,
            "vocab_size": vocab.size,
            "vocab_hash": vhash,
        },
        "artifacts": {
            name: {"sha256": sha256_file(_path(cfg, name))}
            for name in ARTIFACTS if os.path.exists(_path(cfg, name))
        },
    }
    with open(_path(cfg, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _path(cfg: ExperimentConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}|{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class Artifacts:
    slm: NeuralSLM
    vocab: Vocabulary
    mcm: TransitionMatrix
    char: CharModel | None
    codebook: HuffmanCodebook
    manifest: dict


def load_artifacts(cfg: ExperimentConfig, check_hashes: bool = True) -> Artifacts:
    manifest_path = _path(cfg, "manifest.json")
    if not os.path.exists(manifest_path):
        raise StaleModelError(f"no manifest at {manifest_path}; run train first")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if check_hashes:
        for name, entry in manifest["artifacts"].items():
            actual = sha256_file(_path(cfg, name))
            if actual != entry["sha256"]:
                raise StaleModelError(
                    f"{name}: hash {actual[:12]} != manifest {entry['sha256'][:12]};"
                    " retrain before sweeping")
        corpus_sha = sha256_file(cfg.corpus_path)
        if corpus_sha != manifest["corpus"]["sha256"]:
            raise StaleModelError("corpus file changed since training")
    slm, vocab = load_slm(_path(cfg, "slm.stxw"))
    mcm, _ = load_mcm(_path(cfg, "mcm.stxw"))
    char = None
    if os.path.exists(_path(cfg, "char.stxw")):
        char = load_char_model(_path(cfg, "char.stxw"))
    with open(_path(cfg, "codebook.txt"), encoding="utf-8") as fh:
        codebook = import_codebook(fh.read())
    return Artifacts(slm, vocab, mcm, char, codebook, manifest)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepCell:
    policy: str
    predictor: str
    codec: str
    epsilon: float
    param: float

    @property
    def cell_id(self) -> str:
        return f"{self.policy}|{self.predictor}|{self.codec}|" \
               f"{self.epsilon:g}|{self.param:g}"


def enumerate_cells(sweep: SweepLists) -> list[SweepCell]:
    cells = []
    for policy, params in (("TP", sweep.thresholds), ("PP", sweep.periods)):
        for predictor in sweep.predictors:
            for codec in sweep.codecs:
                for eps in sweep.epsilons:
                    for param in params:
                        cells.append(SweepCell(policy, predictor, codec,
                                               float(eps), float(param)))
    return cells


def _make_predictor(cell_predictor: str, art: Artifacts, l_context: int):
    if cell_predictor == "slm":
        return NeuralPredictor(art.slm, art.vocab, l_context)
    return MarkovPredictor(art.mcm, art.vocab)


def run_cell(cell: SweepCell, art: Artifacts, test: Corpus,
             cfg: ExperimentConfig) -> Metrics:
    predictor = _make_predictor(cell.predictor, art, cfg.l_context)
    if cell.policy == "TP":
        policy = PolicyConfig("TP", threshold=cell.param,
                              seed_words=cfg.effective_seed_words)
    else:
        policy = PolicyConfig("PP", period=int(cell.param),
                              seed_words=cfg.effective_seed_words)
    kind = "erasure" if cell.epsilon > 0 else "noiseless"
    channel_cfg = ChannelConfig(kind, cell.epsilon,
                                _derive_seed(cfg.master_seed, cell.cell_id))
    codebook = art.codebook if cell.codec == "huffman" else None
    trace = run_session(test, predictor, art.char, codebook, channel_cfg,
                        policy, art.vocab, art.slm.embedding_table,
                        cfg.bits_per_char)
    return compute_metrics(trace)


def format_csv(rows: list[tuple[SweepCell, Metrics]]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for cell, m in rows:
        lines.append(",".join([
            cell.policy, cell.predictor, cell.codec,
            f"{cell.epsilon:g}", f"{cell.param:g}",
            f"{m.cbar:.6f}", f"{m.sbar:.6f}",
            f"{m.pct_wp:.3f}", f"{m.pct_wc:.3f}", f"{m.t_avg_ms:.4f}",
        ]))
    return "\n".join(lines) + "\n"


def cmd_sweep(cfg: ExperimentConfig) -> list[tuple[SweepCell, Metrics]]:
    art = load_artifacts(cfg)
    split = prepare_corpus(cfg)
    cells = enumerate_cells(cfg.sweep)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            metrics = list(pool.map(
                lambda c: run_cell(c, art, split.test, cfg), cells))
    else:
        metrics = [run_cell(c, art, split.test, cfg) for c in cells]
    rows = list(zip(cells, metrics))
    csv_text = format_csv(rows)
    _write_atomic(_path(cfg, "sweep.csv"), csv_text)
    for name, text in plot_data_from_csv(csv_text).items():
        _write_atomic(_path(cfg, name), text)

    if cfg.context_study.l_context_values:
        ctx_csv = _run_context_study(cfg, art, split.test)
        _write_atomic(_path(cfg, "context_study.csv"), ctx_csv)
        for name, text in context_plot_data_from_csv(ctx_csv).items():
            _write_atomic(_path(cfg, name), text)
    return rows


def _run_context_study(cfg: ExperimentConfig, art: Artifacts,
                       test: Corpus) -> str:
    """Cost versus context length under TP at fixed thresholds.  All runs
    share seed_words = max context so their transmitted seeds are equal and
    cost differences come from prediction quality alone."""
    seed_words = max(max(cfg.context_study.l_context_values),
                     cfg.effective_seed_words)
    lines = [",".join(CONTEXT_CSV_COLUMNS)]
    for l_context in cfg.context_study.l_context_values:
        for threshold in cfg.context_study.thresholds:
            predictor = NeuralPredictor(art.slm, art.vocab, l_context)
            policy = PolicyConfig("TP", threshold=threshold,
                                  seed_words=seed_words)
            channel_cfg = ChannelConfig("noiseless", 0.0, 0)
            trace = run_session(test, predictor, art.char, None, channel_cfg,
                                policy, art.vocab, art.slm.embedding_table,
                                cfg.bits_per_char)
            m = compute_metrics(trace)
            lines.append(f"{l_context},{threshold:g},{m.cbar:.6f},{m.sbar:.6f}")
    return "\n".join(lines) + "\n"


def plot_data_from_csv(csv_text: str) -> dict[str, str]:
    """Cost-similarity plot series, one file per swept curve; regenerating
    from the same CSV yields byte-identical files."""
    rows = _parse_csv(csv_text, CSV_COLUMNS)
    series: dict[str, list[tuple[float, float, float]]] = {}
    for r in rows:
        key = f"plot_cost_similarity_{r['policy']}_{r['predictor']}" \
              f"_{r['codec']}_eps{r['epsilon']}.dat"
        series.setdefault(key, []).append(
            (float(r["param"]), float(r["cbar"]), float(r["sbar"])))
    out = {}
    for key, pts in series.items():
        lines = ["# param cbar sbar"]
        for param, cbar, sbar in pts:
            lines.append(f"{param:g} {cbar:.6f} {sbar:.6f}")
        out[key] = "\n".join(lines) + "\n"
    return out


def context_plot_data_from_csv(csv_text: str) -> dict[str, str]:
    rows = _parse_csv(csv_text, CONTEXT_CSV_COLUMNS)
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        key = f"plot_context_cost_T{r['threshold']}.dat"
        series.setdefault(key, []).append(
            (float(r["l_context"]), float(r["cbar"])))
    out = {}
    for key, pts in series.items():
        lines = ["# l_context cbar"]
        for l_context, cbar in pts:
            lines.append(f"{l_context:g} {cbar:.6f}")
        out[key] = "\n".join(lines) + "\n"
    return out


def _parse_csv(text: str, expected: tuple[str, ...]) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln]
    header = tuple(lines[0].split(","))
    if header != expected:
        raise ValueError(f"unexpected CSV header: {header}")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Benchmarks and traces


def cmd_bench(cfg: ExperimentConfig, min_predictions: int = 1000) -> dict:
    """Per-word prediction latency of both predictors over the test stream."""
    art = load_artifacts(cfg)
    split = prepare_corpus(cfg)
    words, _ = flatten_corpus(split.test)
    report: dict = {"n": 0}
    for name in ("mcm", "slm"):
        predictor = _make_predictor(name, art, cfg.l_context)
        times: list[float] = []
        while len(times) < min_predictions:
            predictor.reset()
            for w in words:
                predictor.observe(w)
                t0 = time.perf_counter()
                predictor.predict()
                times.append(time.perf_counter() - t0)
                if len(times) >= min_predictions:
                    break
        report[name] = {
            "mean_ms": statistics.fmean(times) * 1e3,
            "median_ms": statistics.median(times) * 1e3,
            "n": len(times),
        }
        report["n"] = max(report["n"], len(times))
    report["slm_over_mcm_mean_ratio"] = (
        report["slm"]["mean_ms"] / report["mcm"]["mean_ms"])
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(_path(cfg, "bench.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def cmd_trace(cfg: ExperimentConfig) -> str:
    """Dump one session's per-word trace as tab-separated text."""
    art = load_artifacts(cfg)
    split = prepare_corpus(cfg)
    spec = cfg.trace
    cell = SweepCell(spec.policy, spec.predictor, spec.codec,
                     float(spec.epsilon), float(spec.param))
    predictor = _make_predictor(spec.predictor, art, cfg.l_context)
    if spec.policy == "TP":
        policy = PolicyConfig("TP", threshold=spec.param,
                              seed_words=cfg.effective_seed_words)
    else:
        policy = PolicyConfig("PP", period=int(spec.param),
                              seed_words=cfg.effective_seed_words)
    kind = "erasure" if spec.epsilon > 0 else "noiseless"
    channel_cfg = ChannelConfig(kind, spec.epsilon,
                                _derive_seed(cfg.master_seed, cell.cell_id))
    codebook = art.codebook if spec.codec == "huffman" else None
    trace = run_session(split.test, predictor, art.char, codebook,
                        channel_cfg, policy, art.vocab,
                        art.slm.embedding_table, cfg.bits_per_char)
    path = _path(cfg, "trace.tsv")
    _write_atomic(path, trace_to_text(trace))
    return path
