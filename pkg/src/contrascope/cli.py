"""Command-line surface: one JSON config, nine workflows.

Every command reads one config file (sections: paths, spaces, search, synth,
split, train, tune, clean, eval, bench, plus top-level seed and workers) and
writes its artifacts to the configured paths. Unknown config keys are
rejected, and relative paths resolve against the config file's directory, so
a config is a portable experiment manifest. The --seed and --workers flags
override their config counterparts.

Exit codes: 0 success, 2 for configuration or input validation problems, 1
for everything else (including a failed gradient check). Log verbosity comes
from the CONTRASCOPE_LOG environment variable (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cleaner import CleanConfig, clean
from .corpus import (
    PlantedConfig,
    QrelSet,
    QueryRecord,
    generate_planted,
    load_corpus_dir,
    load_queries,
    save_corpus,
    save_queries,
    split_by_group,
)
from .engine import SearchParams, batch_search, read_run, write_run
from .errors import ConfigError, ContrascopeError, IoError
from .evalkit import evaluate, tune_alpha
from .trainer import (
    Adapter,
    TrainConfig,
    TrainingTuple,
    apply_adapter,
    gradient_check,
    load_tuples,
    save_tuples,
    train,
)
from .vecmath import ScoreWeights, SparsityKind, combined_score

log = logging.getLogger("contrascope")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_SECTION_KEYS: dict[str, set[str]] = {
    "paths": {
        "corpus",
        "queries",
        "queries_out",
        "qrels",
        "tuples",
        "adapter",
        "run",
        "report",
        "out_dir",
        "removed",
    },
    "spaces": {"cos", "sparse", "source", "target"},
    "search": {"k_candidates", "top_n", "alpha", "sparsity"},
    "synth": {
        "groups",
        "dim_cos",
        "dim_sparse",
        "paraphrases_per_group",
        "contradictions_per_group",
        "sparse_support",
        "contradiction_magnitude",
        "paraphrase_noise",
        "distractor_count",
        "contrast_pool",
        "cos_paraphrase_sim",
        "cos_contradiction_sim",
    },
    "split": {"fractions", "seed"},
    "train": {
        "temperature",
        "batch_size",
        "epochs",
        "learning_rate",
        "subgradient_epsilon",
        "out_dim",
    },
    "tune": {"range", "stop_width"},
    "clean": {"removals_per_groundtruth"},
    "eval": {"k"},
    "bench": {"dim_cos", "dim_sparse", "docs", "queries", "scale_factor"},
}
_TOP_KEYS = set(_SECTION_KEYS) | {"seed", "workers"}


class JobConfig:
    """Validated view of the JSON config plus the flag overrides."""

    def __init__(self, raw: dict, base_dir: Path) -> None:
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        for key in raw:
            if key not in _TOP_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
        for section, allowed in _SECTION_KEYS.items():
            body = raw.get(section, {})
            if not isinstance(body, dict):
                raise ConfigError(f"config section {section!r} must be an object")
            for key in body:
                if key not in allowed:
                    raise ConfigError(f"unknown key {section}.{key}")
        self._raw = raw
        self._base = base_dir

    @classmethod
    def from_file(cls, path: str | Path | None) -> "JobConfig":
        if path is None:
            return cls({}, Path.cwd())
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read config {p}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
        return cls(raw, p.parent.resolve())

    def section(self, name: str) -> dict:
        return dict(self._raw.get(name, {}))

    def top(self, key: str, default):
        return self._raw.get(key, default)

    def path(self, key: str, required: bool = False) -> Path | None:
        value = self._raw.get("paths", {}).get(key)
        if value is None:
            if required:
                raise ConfigError(f"config is missing paths.{key}")
            return None
        p = Path(value)
        return p if p.is_absolute() else (self._base / p)


def _require_input(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"config is missing paths.{what}")
    if not path.exists():
        raise ConfigError(f"paths.{what} does not exist: {path}")
    return path


def _search_params(cfg: JobConfig) -> SearchParams:
    spaces = cfg.section("spaces")
    body = cfg.section("search")
    kind_name = body.get("sparsity", "hoyer")
    try:
        kind = SparsityKind(kind_name)
    except ValueError:
        names = ", ".join(k.value for k in SparsityKind)
        raise ConfigError(f"search.sparsity must be one of {names}") from None
    try:
        weights = ScoreWeights(alpha=float(body.get("alpha", 1.0)), kind=kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return SearchParams(
        weights=weights,
        cos_space=spaces.get("cos", "cosine"),
        sparse_space=spaces.get("sparse", "sparse"),
        k_candidates=int(body.get("k_candidates", 1000)),
        top_n=int(body.get("top_n", 10)),
    )


def _workers(cfg: JobConfig, args) -> int | None:
    if args.workers is not None:
        return args.workers or None
    w = cfg.top("workers", None)
    return int(w) if w else None


def _seed(cfg: JobConfig, args) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.top("seed", 0))


def cmd_synth(cfg: JobConfig, args) -> int:
    body = cfg.section("synth")
    if body.get("contrast_pool") is not None:
        body["contrast_pool"] = int(body["contrast_pool"])
    planted = PlantedConfig(seed=_seed(cfg, args), **body)
    bundle = generate_planted(planted)
    out = cfg.path("out_dir", required=True)
    save_corpus(bundle.corpus, out / "corpus")
    save_queries(bundle.queries, out / "queries")
    bundle.qrels.write(out / "qrels.tsv")
    if bundle.tuples:
        save_tuples(bundle.tuples, out / "tuples")
    parts_line = ""
    if cfg.section("split"):
        split_body = cfg.section("split")
        fractions = tuple(float(f) for f in split_body.get("fractions", (0.6, 0.2, 0.2)))
        split_seed = int(split_body.get("seed", 0))
        names = ("train", "valid", "test")
        parts = split_by_group(bundle, fractions, seed=split_seed)
        for name, part in zip(names, parts):
            save_queries(part.queries, out / f"queries_{name}")
            part.qrels.write(out / f"qrels_{name}.tsv")
            if part.tuples:
                save_tuples(part.tuples, out / f"tuples_{name}")
        parts_line = " | split " + "/".join(
            f"{name}:{len(part.queries)}q" for name, part in zip(names, parts)
        )
    print(
        f"synth: {len(bundle.corpus)} docs, {len(bundle.queries)} queries, "
        f"{len(bundle.tuples)} tuples -> {out}{parts_line}"
    )
    return 0


def cmd_search(cfg: JobConfig, args) -> int:
    corpus = load_corpus_dir(_require_input(cfg.path("corpus"), "corpus"))
    queries = load_queries(_require_input(cfg.path("queries"), "queries"))
    params = _search_params(cfg)
    t0 = time.perf_counter()
    runs = batch_search(queries, corpus, params, parallelism=_workers(cfg, args))
    dt = time.perf_counter() - t0
    out = cfg.path("run", required=True)
    write_run(out, runs)
    n_hits = sum(len(r.hits) for r in runs)
    print(
        f"search: {len(runs)} queries over {len(corpus)} docs "
        f"(alpha={params.weights.alpha:g}, {params.weights.kind.value}) "
        f"-> {n_hits} hits in {dt:.2f}s -> {out}"
    )
    return 0


def cmd_eval(cfg: JobConfig, args) -> int:
    runs = read_run(_require_input(cfg.path("run"), "run"))
    qrels = QrelSet.read(_require_input(cfg.path("qrels"), "qrels"))
    k = int(cfg.section("eval").get("k", 10))
    report = evaluate(runs, qrels, k=k)
    out = cfg.path("report")
    if out is not None:
        report.save(out)
    mean_ndcg = "n/a" if report.mean_ndcg is None else f"{report.mean_ndcg:.4f}"
    mean_recall = "n/a" if report.mean_recall is None else f"{report.mean_recall:.4f}"
    print(f"eval: {report.n_queries} queries | NDCG@{k} {mean_ndcg} | Recall@{k} {mean_recall}")
    return 0


def cmd_tune_alpha(cfg: JobConfig, args) -> int:
    corpus = load_corpus_dir(_require_input(cfg.path("corpus"), "corpus"))
    queries = load_queries(_require_input(cfg.path("queries"), "queries"))
    qrels = QrelSet.read(_require_input(cfg.path("qrels"), "qrels"))
    params = _search_params(cfg)
    tune = cfg.section("tune")
    rng_lo, rng_hi = tune.get("range", (0.0, 10.0))
    best, trace = tune_alpha(
        queries,
        corpus,
        qrels,
        params,
        alpha_range=(float(rng_lo), float(rng_hi)),
        stop_width=float(tune.get("stop_width", 0.01)),
        parallelism=_workers(cfg, args),
    )
    for i, rnd in enumerate(trace.rounds, start=1):
        width = rnd.hi - rnd.lo
        print(
            f"round {i}: [{rnd.lo:.4f}, {rnd.hi:.4f}] width {width:.4f} "
            f"-> alpha {rnd.midpoints[rnd.chosen]:.4f} "
            f"(NDCG@10 {rnd.scores[rnd.chosen]:.4f})"
        )
    print(
        f"tune-alpha: best alpha {best:.4f} | objective {trace.best_score:.4f} "
        f"| {trace.evaluations} evaluations"
    )
    out = cfg.path("report")
    if out is not None:
        try:
            Path(out).write_text(trace.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write trace {out}: {exc}") from exc
    return 0


def _train_config(cfg: JobConfig, args) -> TrainConfig:
    body = cfg.section("train")
    out_dim = body.get("out_dim")
    return TrainConfig(
        temperature=float(body.get("temperature", 0.02)),
        batch_size=int(body.get("batch_size", 64)),
        epochs=int(body.get("epochs", 3)),
        learning_rate=float(body.get("learning_rate", 1e-3)),
        subgradient_epsilon=float(body.get("subgradient_epsilon", 0.0)),
        out_dim=None if out_dim is None else int(out_dim),
        seed=_seed(cfg, args),
    )


def cmd_train(cfg: JobConfig, args) -> int:
    tuples = load_tuples(_require_input(cfg.path("tuples"), "tuples"))
    tc = _train_config(cfg, args)
    t0 = time.perf_counter()
    adapter, curve = train(tuples, tc)
    dt = time.perf_counter() - t0
    out = cfg.path("adapter", required=True)
    adapter.save(out)
    first = f"{curve[0]:.4f}" if curve else "n/a"
    last = f"{curve[-1]:.4f}" if curve else "n/a"
    print(
        f"train: {len(tuples)} tuples, {tc.epochs} epochs in {dt:.1f}s | "
        f"loss {first} -> {last} | adapter {adapter.out_dim}x{adapter.in_dim} -> {out}"
    )
    report = cfg.path("report")
    if report is not None:
        try:
            Path(report).write_text(
                json.dumps({"loss_curve": curve}, indent=2) + "\n", encoding="utf-8"
            )
        except OSError as exc:
            raise IoError(f"cannot write loss curve {report}: {exc}") from exc
    return 0


def cmd_apply_adapter(cfg: JobConfig, args) -> int:
    queries_in = cfg.path("queries")
    queries_out = cfg.path("queries_out")
    if queries_in is not None and queries_out is None:
        raise ConfigError("paths.queries_out is required when paths.queries is set")
    corpus = load_corpus_dir(_require_input(cfg.path("corpus"), "corpus"))
    adapter = Adapter.load(_require_input(cfg.path("adapter"), "adapter"))
    spaces = cfg.section("spaces")
    source = spaces.get("source", "base")
    target = spaces.get("target", "sparse_adapted")
    mapped = apply_adapter(adapter, corpus, source, target)
    out = cfg.path("out_dir", required=True)
    save_corpus(mapped, out)
    queries_line = ""
    if queries_in is not None:
        # Queries need the new space too, or searches against the mapped
        # corpus cannot score it. Written as a separate query set.
        queries = load_queries(_require_input(queries_in, "queries"))
        adapted_queries = []
        for q in queries:
            emb = dict(q.embeddings)
            emb[target] = adapter.apply(
                np.asarray(q.vector(source), dtype=np.float64)
            ).astype(np.float32)
            adapted_queries.append(
                QueryRecord(qid=q.qid, embeddings=emb, text=q.text, exclude_ids=q.exclude_ids)
            )
        save_queries(adapted_queries, queries_out)
        queries_line = f", {len(adapted_queries)} queries -> {queries_out}"
    print(f"apply-adapter: {source} -> {target} on {len(corpus)} docs -> {out}{queries_line}")
    return 0


def cmd_clean(cfg: JobConfig, args) -> int:
    corpus = load_corpus_dir(_require_input(cfg.path("corpus"), "corpus"))
    groundtruth = load_queries(_require_input(cfg.path("queries"), "queries"))
    body = cfg.section("clean")
    cc = CleanConfig(
        removals_per_groundtruth=int(body.get("removals_per_groundtruth", 3)),
        params=_search_params(cfg),
    )
    cleaned, report = clean(corpus, groundtruth, cc)
    out = cfg.path("out_dir", required=True)
    save_corpus(cleaned, out)
    report_path = cfg.path("report")
    if report_path is not None:
        report.save(report_path)
    removed_path = cfg.path("removed")
    if removed_path is not None:
        report.save_removed_ids(removed_path)
    print(
        f"clean: removed {len(report.removed)} of {len(corpus)} docs "
        f"({len(groundtruth)} ground truths x top {cc.removals_per_groundtruth}) -> {out}"
    )
    return 0


def cmd_bench(cfg: JobConfig, args) -> int:
    body = cfg.section("bench")
    corpus_path = cfg.path("corpus")
    rng = np.random.default_rng(_seed(cfg, args))
    n_queries = int(body.get("queries", 100))
    n_docs = int(body.get("docs", 100))
    if corpus_path is not None:
        corpus = load_corpus_dir(_require_input(cfg.path("corpus"), "corpus"))
        params = _search_params(cfg)
        cos_mat = corpus.f64(params.cos_space)[:n_docs]
        sparse_mat = corpus.f64(params.sparse_space)[:n_docs]
        n_docs = cos_mat.shape[0]
    else:
        d_cos = int(body.get("dim_cos", 768))
        d_sparse = int(body.get("dim_sparse", 768))
        cos_mat = rng.standard_normal((n_docs, d_cos))
        sparse_mat = rng.standard_normal((n_docs, d_sparse))
    if n_docs < 1:
        raise ConfigError("bench needs at least one document")
    if n_queries < 1:
        raise ConfigError("bench.queries must be >= 1")

    weights = ScoreWeights(alpha=float(cfg.section("search").get("alpha", 1.0)))

    def time_pass(cos_m: np.ndarray, sp_m: np.ndarray) -> tuple[float, float]:
        """Mean and stddev of one-query-vs-all-docs scoring, pair by pair."""
        times = []
        sink = 0.0
        for _ in range(n_queries):
            q_cos = rng.standard_normal(cos_m.shape[1])
            q_sp = rng.standard_normal(sp_m.shape[1])
            t0 = time.perf_counter()
            for i in range(cos_m.shape[0]):
                sink += combined_score(q_cos, cos_m[i], q_sp, sp_m[i], weights)
            times.append(time.perf_counter() - t0)
        log.debug("bench checksum %f", sink)
        arr = np.asarray(times)
        return float(arr.mean()), float(arr.std())

    mean_s, std_s = time_pass(cos_mat, sparse_mat)
    result = {
        "docs": int(n_docs),
        "queries": n_queries,
        "dim_cos": int(cos_mat.shape[1]),
        "dim_sparse": int(sparse_mat.shape[1]),
        "mean_s": mean_s,
        "std_s": std_s,
        "reference_bi_encoder_s": 0.0029,
        "reference_judge_baseline_s": 0.8832,
    }
    print(
        f"bench: 1 query x {n_docs} docs (d={cos_mat.shape[1]}) "
        f"mean {mean_s * 1e3:.3f} ms, std {std_s * 1e3:.3f} ms over {n_queries} queries"
    )
    scale = int(body.get("scale_factor", 0))
    if scale > 1:
        big_cos = np.tile(cos_mat, (scale, 1))
        big_sparse = np.tile(sparse_mat, (scale, 1))
        mean_big, _ = time_pass(big_cos, big_sparse)
        ratio = mean_big / mean_s
        result["scaled_docs"] = int(n_docs * scale)
        result["scaled_mean_s"] = mean_big
        result["scale_ratio"] = ratio
        print(
            f"bench: {scale}x docs -> mean {mean_big * 1e3:.3f} ms "
            f"(ratio {ratio:.2f} vs {scale}x ideal)"
        )
    print(
        "bench: reference points: bi-encoder 0.0029 s, judge baseline 0.8832 s "
        "(informational)"
    )
    out = cfg.path("report")
    if out is not None:
        try:
            Path(out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write bench report {out}: {exc}") from exc
    return 0


def cmd_gradcheck(cfg: JobConfig, args) -> int:
    body = cfg.section("train")
    temperature = float(body.get("temperature", 0.02))
    epsilon = float(body.get("subgradient_epsilon", 0.0))
    rng = np.random.default_rng(_seed(cfg, args))
    dim, n = 16, 4
    batch = [
        TrainingTuple(
            anchor=rng.standard_normal(dim),
            positive=rng.standard_normal(dim),
            hard_negative=rng.standard_normal(dim),
        )
        for _ in range(n)
    ]
    adapter = Adapter(np.eye(dim) + 0.05 * rng.standard_normal((dim, dim)))
    worst, checked = gradient_check(
        batch, temperature, adapter, step=1e-5, samples=24, seed=_seed(cfg, args),
        epsilon=epsilon,
    )
    ok = worst < 1e-4
    print(
        f"gradcheck: {checked} entries, d={dim}, batch {n}, temperature {temperature:g} "
        f"| max rel err {worst:.3e} | {'ok' if ok else 'FAIL (tolerance 1e-4)'}"
    )
    return 0 if ok else 1


_COMMANDS = {
    "synth": cmd_synth,
    "search": cmd_search,
    "eval": cmd_eval,
    "tune-alpha": cmd_tune_alpha,
    "train": cmd_train,
    "apply-adapter": cmd_apply_adapter,
    "clean": cmd_clean,
    "bench": cmd_bench,
    "gradcheck": cmd_gradcheck,
}


def _setup_logging() -> None:
    raw = os.environ.get("CONTRASCOPE_LOG", "warn").lower()
    if raw not in _LOG_LEVELS:
        names = ", ".join(_LOG_LEVELS)
        raise ConfigError(f"CONTRASCOPE_LOG must be one of {names}, got {raw!r}")
    logging.basicConfig(stream=sys.stderr, level=_LOG_LEVELS[raw])


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrascope",
        description="Contradiction-aware retrieval: synthesize, search, tune, train, clean.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} workflow")
        p.add_argument("--config", help="JSON config file; paths resolve relative to it")
        p.add_argument("--workers", type=int, help="worker cap for parallel stages")
        p.add_argument("--seed", type=int, help="seed override (unsigned 64-bit)")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args = _parser().parse_args(argv)
    if args.seed is not None and not (0 <= args.seed < 2**64):
        print("error: --seed must fit in unsigned 64 bits", file=sys.stderr)
        return 2
    try:
        cfg = JobConfig.from_file(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ContrascopeError as exc:
        log.debug("validation failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
