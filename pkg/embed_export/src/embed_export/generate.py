"""Generate paraphrase and contradiction datasets from source passages.

Each source passage yields n generations per task, written as JSON Lines
records keyed by (source_id, task, index). The output file doubles as the
progress manifest: rerunning a job reads it back, skips every triple that
already exists, and requests only what is missing, so an interrupted run
never duplicates work or records.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ApiError, ConfigError, FormatError, GenerationError
from .formats import GenRecord, TextRecord, append_generations, read_generations, read_texts

logger = logging.getLogger("embed_export")

PARAPHRASE_PROMPT = (
    "Paraphrase the given paragraph keeping its original meaning. Do not add "
    "information that is not present in the original paragraph. Your response "
    "should be as indistinguishable to the original paragraph as possible in "
    "terms of length, language style, and format. Begin your answer directly "
    "without any introductory words."
)

CONTRADICTION_PROMPT = (
    "Rewrite the given paragraph to contradict the original content. Ensure "
    "the revised paragraph changes the factuality of the original. Your "
    "response should be as indistinguishable to the original paragraph as "
    "possible in terms of length, language style, and format. Begin your "
    "answer directly without any introductory words."
)

PROMPTS = {
    "paraphrase": PARAPHRASE_PROMPT,
    "contradiction": CONTRADICTION_PROMPT,
}


@dataclass(frozen=True)
class Truncation:
    """What to do with passages longer than max_passage_chars.

    Generation providers bill and bound by tokens, but the only universally
    available pre-flight measure is length in characters, so the limit is
    expressed in characters. "truncate" clips the passage, "fail" refuses
    the whole job before any API call is made.
    """

    max_passage_chars: int
    mode: str

    def __post_init__(self):
        if self.max_passage_chars < 1:
            raise ConfigError("max_passage_chars must be >= 1")
        if self.mode not in ("fail", "truncate"):
            raise ConfigError(f'truncation mode must be "fail" or "truncate", got {self.mode!r}')

    def apply(self, record: TextRecord) -> str:
        if len(record.text) <= self.max_passage_chars:
            return record.text
        if self.mode == "truncate":
            return record.text[: self.max_passage_chars]
        raise FormatError(
            f"passage {record.id!r} is {len(record.text)} chars, "
            f"over the {self.max_passage_chars} limit"
        )


@dataclass(frozen=True)
class GenJob:
    """One generation run over a texts file.

    max_output_tokens and truncation have no defaults on purpose: output
    length and long-passage handling are provider-dependent choices the
    caller must make explicitly.
    """

    texts_path: str | Path
    out_path: str | Path
    task: str
    max_output_tokens: int
    truncation: Truncation
    n: int = 3
    temperature: float = 1.0
    prompt: str | None = None
    concurrency: int = 4
    max_retries: int = 5
    backoff_base: float = 1.0

    def __post_init__(self):
        if self.task not in PROMPTS:
            raise ConfigError(f"task must be one of {sorted(PROMPTS)}, got {self.task!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ConfigError("temperature must be finite and >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")
        if not isinstance(self.truncation, Truncation):
            raise ConfigError("truncation must be a Truncation")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not math.isfinite(self.backoff_base) or self.backoff_base <= 0:
            raise ConfigError("backoff_base must be positive")
        if self.prompt is None:
            object.__setattr__(self, "prompt", PROMPTS[self.task])
        if not self.prompt:
            raise ConfigError("prompt must be non-empty")


@dataclass(frozen=True)
class GenReport:
    written: int
    skipped: int
    total: int
    out_path: Path


@dataclass
class _WorkItem:
    record: TextRecord
    passage: str
    missing: list[int] = field(default_factory=list)


def _call_with_retry(client, job: GenJob, passage: str, count: int, sleep) -> list[str]:
    attempt = 0
    while True:
        try:
            texts = client.generate(
                job.prompt,
                passage,
                n=count,
                temperature=job.temperature,
                max_tokens=job.max_output_tokens,
            )
            if len(texts) != count:
                raise ApiError(f"client returned {len(texts)} texts for {count} requested")
            return texts
        except ApiError as exc:
            if not exc.retryable or attempt >= job.max_retries:
                raise
            delay = job.backoff_base * (2.0 ** attempt)
            logger.warning(
                "retry %d/%d after %s (sleeping %.1fs)", attempt + 1, job.max_retries, exc, delay
            )
            sleep(delay)
            attempt += 1


def _existing_triples(out: Path) -> set[tuple[str, str, int]]:
    if not out.exists():
        return set()
    seen: set[tuple[str, str, int]] = set()
    for rec in read_generations(out):
        triple = (rec.source_id, rec.task, rec.index)
        if triple in seen:
            raise FormatError(f"{out}: duplicate record for {triple}")
        seen.add(triple)
    return seen


def generate_dataset(job: GenJob, client, *, sleep=time.sleep) -> GenReport:
    """Run the job against a client, writing records as they complete.

    Passages are processed with at most job.concurrency requests in flight.
    Records land in the output file in input order while everything
    succeeds; after a failure, whatever finished is flushed regardless of
    order (the manifest is a set, order is cosmetic) and a GenerationError
    reports the partial progress. Rerunning resumes.
    """
    records = read_texts(job.texts_path)
    if not records:
        raise FormatError(f"{job.texts_path}: no source passages")
    out = Path(job.out_path)
    seen = _existing_triples(out)
    work: list[_WorkItem] = []
    for rec in records:
        passage = job.truncation.apply(rec)
        missing = [i for i in range(job.n) if (rec.id, job.task, i) not in seen]
        if missing:
            work.append(_WorkItem(record=rec, passage=passage, missing=missing))
    total = len(records) * job.n
    skipped = total - sum(len(w.missing) for w in work)
    if not work:
        return GenReport(written=0, skipped=skipped, total=total, out_path=out)

    def _records_for(item: _WorkItem, texts: list[str]) -> list[GenRecord]:
        return [
            GenRecord(source_id=item.record.id, task=job.task, index=i, text=t)
            for i, t in zip(item.missing, texts)
        ]

    executor = ThreadPoolExecutor(max_workers=min(job.concurrency, len(work)))
    futures = {
        executor.submit(_call_with_retry, client, job, item.passage, len(item.missing), sleep): pos
        for pos, item in enumerate(work)
    }
    done_results: dict[int, list[GenRecord]] = {}
    failure: Exception | None = None
    next_commit = 0
    written = 0
    try:
        pending = set(futures)
        while pending and failure is None:
            finished, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in finished:
                pos = futures[fut]
                try:
                    done_results[pos] = _records_for(work[pos], fut.result())
                except Exception as exc:
                    failure = exc
                    break
            while next_commit in done_results:
                append_generations(out, done_results.pop(next_commit))
                written += len(work[next_commit].missing)
                next_commit += 1
    finally:
        executor.shutdown(wait=True, cancel_futures=True)
    if failure is not None:
        # Flush every completed call, even past the failed one: the work is
        # paid for and the resume logic only needs the triples present.
        for fut, pos in futures.items():
            # Positions below next_commit are already on disk; the in-order
            # commit loop popped them from done_results as it wrote.
            if pos < next_commit or pos in done_results or not fut.done() or fut.cancelled():
                continue
            if fut.exception() is None:
                done_results[pos] = _records_for(work[pos], fut.result())
        for pos in sorted(done_results):
            append_generations(out, done_results[pos])
            written += len(work[pos].missing)
        raise GenerationError(
            f"generation stopped after writing {written} new records to {out}; "
            f"rerunning the job resumes from the manifest: {failure}"
        ) from failure
    return GenReport(written=written, skipped=skipped, total=total, out_path=out)
