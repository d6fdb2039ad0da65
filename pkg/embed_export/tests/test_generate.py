"""Dataset generation: prompts, resume, retries, and concurrency."""

from __future__ import annotations

import json
import threading

import pytest

from embed_export import (
    ApiError,
    ConfigError,
    FormatError,
    GenerationError,
    GenJob,
    PROMPTS,
    Truncation,
    generate_dataset,
    read_generations,
)

# Independent copies of the instruction texts. The package constants must
# match these byte for byte; any edit over there should break loudly here.
EXPECTED_PARAPHRASE = (
    "Paraphrase the given paragraph keeping its original meaning. Do not add "
    "information that is not present in the original paragraph. Your response "
    "should be as indistinguishable to the original paragraph as possible in "
    "terms of length, language style, and format. Begin your answer directly "
    "without any introductory words."
)
EXPECTED_CONTRADICTION = (
    "Rewrite the given paragraph to contradict the original content. Ensure "
    "the revised paragraph changes the factuality of the original. Your "
    "response should be as indistinguishable to the original paragraph as "
    "possible in terms of length, language style, and format. Begin your "
    "answer directly without any introductory words."
)


class ScriptedClient:
    """Deterministic stand-in for the HTTP client.

    Generated text encodes the passage and the position within the call, so
    tests can tell exactly which request produced which record. Failures are
    scripted per passage and consumed in order.
    """

    def __init__(self, fail=None, delay=0.0):
        self.calls = []
        self.fail = {k: list(v) for k, v in (fail or {}).items()}
        self.delay = delay
        self._lock = threading.Lock()

    def generate(self, prompt, passage, *, n, temperature, max_tokens):
        with self._lock:
            self.calls.append(
                {
                    "prompt": prompt,
                    "passage": passage,
                    "n": n,
                    "temperature": temperature,
                    "max_tokens": max_tokens,
                }
            )
            queue = self.fail.get(passage)
            if queue:
                raise queue.pop(0)
        if self.delay:
            threading.Event().wait(self.delay)
        return [f"gen:{passage}:{i}" for i in range(n)]


def _texts_file(tmp_path, texts, name="texts.jsonl"):
    path = tmp_path / name
    path.write_text(
        "".join(json.dumps({"id": f"s{i}", "text": t}) + "\n" for i, t in enumerate(texts)),
        encoding="utf-8",
    )
    return path


def _job(tmp_path, **overrides):
    base = dict(
        texts_path=tmp_path / "texts.jsonl",
        out_path=tmp_path / "gen.jsonl",
        task="paraphrase",
        max_output_tokens=512,
        truncation=Truncation(max_passage_chars=10_000, mode="fail"),
        concurrency=1,
        backoff_base=0.25,
    )
    base.update(overrides)
    return GenJob(**base)


def test_prompt_texts_are_frozen():
    assert PROMPTS["paraphrase"] == EXPECTED_PARAPHRASE
    assert PROMPTS["contradiction"] == EXPECTED_CONTRADICTION
    assert set(PROMPTS) == {"paraphrase", "contradiction"}


def test_job_defaults_and_prompt_resolution(tmp_path):
    job = _job(tmp_path)
    assert (job.n, job.temperature) == (3, 1.0)
    assert job.prompt == EXPECTED_PARAPHRASE
    assert _job(tmp_path, task="contradiction").prompt == EXPECTED_CONTRADICTION
    assert _job(tmp_path, prompt="custom instruction").prompt == "custom instruction"


def test_job_validation(tmp_path):
    with pytest.raises(ConfigError, match="task"):
        _job(tmp_path, task="summarize")
    with pytest.raises(ConfigError, match="n must"):
        _job(tmp_path, n=0)
    with pytest.raises(ConfigError, match="temperature"):
        _job(tmp_path, temperature=-0.5)
    with pytest.raises(ConfigError, match="max_output_tokens"):
        _job(tmp_path, max_output_tokens=0)
    with pytest.raises(ConfigError, match="concurrency"):
        _job(tmp_path, concurrency=0)
    with pytest.raises(ConfigError, match="backoff_base"):
        _job(tmp_path, backoff_base=0.0)
    with pytest.raises(ConfigError, match="prompt"):
        _job(tmp_path, prompt="")
    with pytest.raises(ConfigError, match="max_passage_chars"):
        Truncation(max_passage_chars=0, mode="fail")
    with pytest.raises(ConfigError, match="mode"):
        Truncation(max_passage_chars=10, mode="clip")


def test_two_passages_three_samples_each(tmp_path):
    _texts_file(tmp_path, ["first passage", "second passage"])
    client = ScriptedClient()
    report = generate_dataset(_job(tmp_path), client, sleep=lambda s: None)
    assert (report.written, report.skipped, report.total) == (6, 0, 6)
    records = read_generations(tmp_path / "gen.jsonl")
    assert len(records) == 6
    assert [r.source_id for r in records] == ["s0"] * 3 + ["s1"] * 3
    assert [r.index for r in records] == [0, 1, 2, 0, 1, 2]
    assert all(r.task == "paraphrase" for r in records)
    assert records[0].text == "gen:first passage:0"
    # One call per passage carries the exact instruction and sampling knobs.
    assert len(client.calls) == 2
    call = client.calls[0]
    assert call["prompt"] == EXPECTED_PARAPHRASE
    assert (call["n"], call["temperature"], call["max_tokens"]) == (3, 1.0, 512)


def test_contradiction_task_is_labeled(tmp_path):
    _texts_file(tmp_path, ["a passage"])
    generate_dataset(
        _job(tmp_path, task="contradiction"), ScriptedClient(), sleep=lambda s: None
    )
    records = read_generations(tmp_path / "gen.jsonl")
    assert all(r.task == "contradiction" for r in records)


def test_truncate_mode_clips_passages(tmp_path):
    _texts_file(tmp_path, ["x" * 50])
    client = ScriptedClient()
    generate_dataset(
        _job(tmp_path, truncation=Truncation(max_passage_chars=8, mode="truncate")),
        client,
        sleep=lambda s: None,
    )
    assert client.calls[0]["passage"] == "x" * 8


def test_fail_mode_refuses_before_any_call(tmp_path):
    _texts_file(tmp_path, ["short", "y" * 50])
    client = ScriptedClient()
    with pytest.raises(FormatError, match="s1.*50 chars"):
        generate_dataset(
            _job(tmp_path, truncation=Truncation(max_passage_chars=8, mode="fail")),
            client,
            sleep=lambda s: None,
        )
    assert client.calls == []
    assert not (tmp_path / "gen.jsonl").exists()


def test_rerun_of_complete_job_writes_nothing(tmp_path):
    _texts_file(tmp_path, ["one", "two"])
    job = _job(tmp_path)
    generate_dataset(job, ScriptedClient(), sleep=lambda s: None)
    before = (tmp_path / "gen.jsonl").read_bytes()
    client = ScriptedClient()
    report = generate_dataset(job, client, sleep=lambda s: None)
    assert (report.written, report.skipped, report.total) == (0, 6, 6)
    assert client.calls == []
    assert (tmp_path / "gen.jsonl").read_bytes() == before


def test_resume_fills_only_missing_indices(tmp_path):
    _texts_file(tmp_path, ["one", "two"])
    job = _job(tmp_path)
    generate_dataset(job, ScriptedClient(), sleep=lambda s: None)
    # Drop one record in the middle: s0 keeps indices 0 and 2.
    kept = [
        line
        for line in (tmp_path / "gen.jsonl").read_text().splitlines()
        if json.loads(line) != {"source_id": "s0", "task": "paraphrase", "index": 1, "text": "gen:one:1"}
    ]
    (tmp_path / "gen.jsonl").write_text("".join(l + "\n" for l in kept), encoding="utf-8")
    client = ScriptedClient()
    report = generate_dataset(job, client, sleep=lambda s: None)
    assert (report.written, report.skipped) == (1, 5)
    assert len(client.calls) == 1
    assert client.calls[0]["n"] == 1
    triples = [(r.source_id, r.task, r.index) for r in read_generations(tmp_path / "gen.jsonl")]
    assert len(triples) == len(set(triples)) == 6
    assert ("s0", "paraphrase", 1) in triples


def test_retry_backoff_then_success(tmp_path):
    _texts_file(tmp_path, ["wobbly"])
    client = ScriptedClient(
        fail={
            "wobbly": [
                ApiError("rate limited", status=429, retryable=True),
                ApiError("server error", status=503, retryable=True),
            ]
        }
    )
    delays = []
    report = generate_dataset(_job(tmp_path, max_retries=5), client, sleep=delays.append)
    assert report.written == 3
    assert delays == [0.25, 0.5]
    assert len(client.calls) == 3


def test_retry_exhaustion_keeps_partial_progress(tmp_path):
    _texts_file(tmp_path, ["good", "doomed"])
    client = ScriptedClient(
        fail={"doomed": [ApiError("rate limited", status=429, retryable=True)] * 10}
    )
    delays = []
    with pytest.raises(GenerationError, match="resumes"):
        generate_dataset(_job(tmp_path, max_retries=2), client, sleep=delays.append)
    assert delays == [0.25, 0.5]
    survivors = read_generations(tmp_path / "gen.jsonl")
    assert [r.source_id for r in survivors] == ["s0", "s0", "s0"]
    # The rerun completes the doomed passage without touching the good one.
    report = generate_dataset(_job(tmp_path, max_retries=2), ScriptedClient(), sleep=delays.append)
    assert (report.written, report.skipped) == (3, 3)
    triples = [(r.source_id, r.index) for r in read_generations(tmp_path / "gen.jsonl")]
    assert len(set(triples)) == 6


def test_fatal_error_skips_retries(tmp_path):
    _texts_file(tmp_path, ["secret"])
    client = ScriptedClient(fail={"secret": [ApiError("bad key", status=401, retryable=False)]})
    delays = []
    with pytest.raises(GenerationError, match="bad key"):
        generate_dataset(_job(tmp_path), client, sleep=delays.append)
    assert delays == []
    assert len(client.calls) == 1


def test_foreign_exceptions_also_preserve_progress(tmp_path):
    _texts_file(tmp_path, ["fine", "buggy"])
    client = ScriptedClient(fail={"buggy": [ValueError("client bug")]})
    with pytest.raises(GenerationError, match="client bug"):
        generate_dataset(_job(tmp_path), client, sleep=lambda s: None)
    assert len(read_generations(tmp_path / "gen.jsonl")) == 3


class MeterClient(ScriptedClient):
    """Counts in-flight calls to observe the concurrency ceiling."""

    def __init__(self, parties):
        super().__init__(delay=0.01)
        self.active = 0
        self.max_active = 0
        self.barrier = threading.Barrier(parties)

    def generate(self, prompt, passage, **kwargs):
        with self._lock:
            self.active += 1
            self.max_active = max(self.max_active, self.active)
        if passage in ("p0", "p1"):
            # Both of the first two passages must be in flight at once, or
            # this times out and breaks the barrier: proof of parallelism.
            self.barrier.wait(timeout=10)
        try:
            return super().generate(prompt, passage, **kwargs)
        finally:
            with self._lock:
                self.active -= 1


def test_concurrency_is_bounded_and_real(tmp_path):
    _texts_file(tmp_path, [f"p{i}" for i in range(6)])
    client = MeterClient(parties=2)
    report = generate_dataset(_job(tmp_path, concurrency=2), client, sleep=lambda s: None)
    assert report.written == 18
    assert client.max_active <= 2
    records = read_generations(tmp_path / "gen.jsonl")
    assert [r.source_id for r in records[:6]] == ["s0"] * 3 + ["s1"] * 3


def test_corrupt_manifest_is_rejected(tmp_path):
    _texts_file(tmp_path, ["one"])
    out = tmp_path / "gen.jsonl"
    row = json.dumps({"source_id": "s0", "task": "paraphrase", "index": 0, "text": "x"})
    out.write_text(row + "\n" + row + "\n", encoding="utf-8")
    with pytest.raises(FormatError, match="duplicate"):
        generate_dataset(_job(tmp_path), ScriptedClient(), sleep=lambda s: None)
    out.write_text("{broken\n", encoding="utf-8")
    with pytest.raises(FormatError, match="bad JSON"):
        generate_dataset(_job(tmp_path), ScriptedClient(), sleep=lambda s: None)


def test_empty_texts_file_is_an_error(tmp_path):
    (tmp_path / "texts.jsonl").write_text("", encoding="utf-8")
    with pytest.raises(FormatError, match="no source passages"):
        generate_dataset(_job(tmp_path), ScriptedClient(), sleep=lambda s: None)
