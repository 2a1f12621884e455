"""Evaluation harness: chat-endpoint and offline-baseline runs over
benchmarks, answer extraction, resumable journals, and strategy judging.

The wire protocol is OpenAI-style chat completions over HTTP: one user
message holding the rendered prompt, bearer auth from a named environment
variable, bounded request fan-out, and exponential-backoff retries.
Completed records are appended to a newline-delimited JSON journal as they
finish, so an interrupted run resumes without re-querying finished items.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import httpx

from .dataset import render_judge_prompt, render_prompt
from .sample import NEGATIVE, POSITIVE, subsample_indices_per_length

logger = logging.getLogger(__name__)

UNKNOWN = "unknown"

STRATEGY_HEURISTIC = "heuristic"
STRATEGY_RULE_BASED = "rule-based"
STRATEGY_CODE = "code"
STRATEGY_UNKNOWN = "unknown"

BASELINE_KINDS = ("oracle", "always-yes", "always-no", "random")


class EndpointError(Exception):
    """The endpoint kept failing after the retry budget was spent."""


class JournalCorrupt(Exception):
    """An existing journal does not match the run being resumed."""


class LengthMismatch(ValueError):
    """Two aligned label lists differ in length."""


@dataclass(frozen=True)
class EndpointConfig:
    """Connection and sampling settings for one chat-completions endpoint."""

    base_url: str
    model_name: str
    max_completion_tokens: int | None = None
    temperature: float = 1.0
    nucleus_p: float = 1.0
    max_parallel_requests: int = 4
    max_retries: int = 3
    backoff: float = 1.0
    timeout: float = 120.0
    api_key_env: str = "OPENAI_API_KEY"

    def check(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.nucleus_p <= 1:
            raise ValueError("nucleus_p must be in (0, 1]")
        if self.max_parallel_requests < 1:
            raise ValueError("max_parallel_requests must be >= 1")


@dataclass(frozen=True)
class Baseline:
    """Offline prediction rules: oracle, always-yes, always-no, random."""

    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; choose from {BASELINE_KINDS}")

    @property
    def name(self) -> str:
        return f"baseline:{self.kind}"


def parse_model_spec(spec: str, *, seed: int = 0) -> Baseline | None:
    """Map "baseline:<kind>" to a Baseline; anything else means a live
    endpoint model name and returns None."""
    if spec.startswith("baseline:"):
        return Baseline(kind=spec.split(":", 1)[1], seed=seed)
    return None


@dataclass(frozen=True)
class EvalRecord:
    grammar_id: str
    example_id: str
    model: str
    label: str
    length: int
    prediction: str
    raw_completion: str
    completion_tokens: int
    reasoning_tokens: int | None = None
    wall_time: float = 0.0
    attempts: int = 1
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "grammar_id": self.grammar_id,
            "example_id": self.example_id,
            "model": self.model,
            "label": self.label,
            "length": self.length,
            "prediction": self.prediction,
            "raw_completion": self.raw_completion,
            "completion_tokens": self.completion_tokens,
            "reasoning_tokens": self.reasoning_tokens,
            "wall_time": self.wall_time,
            "attempts": self.attempts,
            "error": self.error,
        }


_ANSWER_RE = re.compile(r"(?<![\w-])(yes|no)(?![\w-])", re.IGNORECASE)


def extract_prediction(completion: str) -> str:
    """Classify a completion by its LAST standalone "yes"/"no" token
    (case-insensitive; tokens glued to word characters or hyphens do not
    count).  Returns "positive", "negative", or "unknown".  Total: never
    raises."""
    matches = _ANSWER_RE.findall(completion or "")
    if not matches:
        return UNKNOWN
    return POSITIVE if matches[-1].lower() == "yes" else NEGATIVE


def _baseline_completion(baseline: Baseline, label: str, grammar_id: str, example_id: str) -> str:
    if baseline.kind == "oracle":
        return "Yes" if label == POSITIVE else "No"
    if baseline.kind == "always-yes":
        return "Yes"
    if baseline.kind == "always-no":
        return "No"
    rng = random.Random(f"{baseline.seed}:{grammar_id}:{example_id}")
    return "Yes" if rng.random() < 0.5 else "No"


def _chat_payload(cfg: EndpointConfig, prompt: str) -> dict:
    payload = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "top_p": cfg.nucleus_p,
    }
    if cfg.max_completion_tokens is not None:
        payload["max_completion_tokens"] = cfg.max_completion_tokens
    return payload


_RETRYABLE = {408, 409, 425, 429, 500, 502, 503, 504}


def query_endpoint(
    client: httpx.Client, cfg: EndpointConfig, prompt: str, headers: dict
) -> tuple[str, int, int | None, int]:
    """One prompt against the endpoint with retries.  Returns
    (completion, completion_tokens, reasoning_tokens, attempts)."""
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    last_error = "no attempt made"
    for attempt in range(1, cfg.max_retries + 2):
        try:
            resp = client.post(url, json=_chat_payload(cfg, prompt), headers=headers, timeout=cfg.timeout)
            if resp.status_code == 200:
                body = resp.json()
                text = body["choices"][0]["message"]["content"] or ""
                usage = body.get("usage") or {}
                completion_tokens = int(usage.get("completion_tokens", 0))
                details = usage.get("completion_tokens_details") or {}
                reasoning = details.get("reasoning_tokens")
                return text, completion_tokens, reasoning, attempt
            last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if resp.status_code not in _RETRYABLE:
                raise EndpointError(last_error)
        except httpx.HTTPError as exc:
            last_error = f"transport error: {exc}"
        if attempt <= cfg.max_retries:
            time.sleep(cfg.backoff * 2 ** (attempt - 1))
    raise EndpointError(f"retries exhausted: {last_error}")


def _eval_tasks(benchmarks, subsample: int | None, subsample_seed: int):
    tasks = []
    for b in benchmarks:
        if subsample is None:
            idxs = range(len(b.examples))
        else:
            idxs = subsample_indices_per_length(b.examples, subsample, subsample_seed)
        for i in idxs:
            tasks.append((b, i))
    return tasks


def read_journal(path) -> list[EvalRecord]:
    """Parse a journal file.  A torn final line (crash mid-append) is dropped
    with a warning; any other malformed line raises JournalCorrupt."""
    records = []
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for i, line in enumerate(lines):
        try:
            records.append(EvalRecord(**json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            if i == len(lines) - 1:
                logger.warning("dropping torn final journal line: %s", exc)
                continue
            raise JournalCorrupt(f"journal line {i + 1} unreadable: {exc}") from exc
    return records


def _resume_map(path, tasks, model_name: str) -> dict[tuple[str, str], EvalRecord]:
    if not os.path.exists(path):
        return {}
    valid_keys = {(b.grammar_id, str(i)) for b, i in tasks}
    done: dict[tuple[str, str], EvalRecord] = {}
    for rec in read_journal(path):
        key = (rec.grammar_id, rec.example_id)
        if key not in valid_keys:
            raise JournalCorrupt(f"journal record {key} not in the benchmark set being evaluated")
        if rec.model != model_name:
            raise JournalCorrupt(
                f"journal was written for model {rec.model!r}, not {model_name!r}"
            )
        if key in done:
            raise JournalCorrupt(f"journal holds duplicate records for {key}")
        done[key] = rec
    return done


def run_eval(
    benchmarks,
    model: EndpointConfig | Baseline,
    journal_path,
    *,
    subsample: int | None = None,
    subsample_seed: int = 0,
) -> list[EvalRecord]:
    """Evaluate every (grammar, example) pair, journaling each record as it
    completes.  Pairs already present in the journal are not re-queried.
    Endpoint failures after retries are recorded as "unknown" predictions
    with the error noted; the run continues.

    Returns one record per pair, in benchmark order.
    """
    benchmarks = list(benchmarks)
    ids = [b.grammar_id for b in benchmarks]
    if len(set(ids)) != len(ids):
        raise ValueError("benchmark set holds duplicate grammars; journal keys would collide")
    tasks = _eval_tasks(benchmarks, subsample, subsample_seed)
    model_name = model.name if isinstance(model, Baseline) else model.model_name
    done = _resume_map(journal_path, tasks, model_name)
    pending = [(b, i) for b, i in tasks if (b.grammar_id, str(i)) not in done]

    def finish(rec: EvalRecord, journal) -> None:
        journal.write(json.dumps(rec.as_dict(), separators=(",", ":")) + "\n")
        journal.flush()
        done[(rec.grammar_id, rec.example_id)] = rec

    with open(journal_path, "a", encoding="utf-8", newline="\n") as journal:
        if isinstance(model, Baseline):
            for b, i in pending:
                ex = b.examples[i]
                completion = _baseline_completion(model, ex.label, b.grammar_id, str(i))
                finish(
                    EvalRecord(
                        grammar_id=b.grammar_id,
                        example_id=str(i),
                        model=model_name,
                        label=ex.label,
                        length=ex.length,
                        prediction=extract_prediction(completion),
                        raw_completion=completion,
                        completion_tokens=1,
                    ),
                    journal,
                )
        elif pending:
            model.check()
            headers = _auth_headers(model)
            with httpx.Client() as client:

                def call(task):
                    b, i = task
                    ex = b.examples[i]
                    prompt = render_prompt(b.grammar, ex.tokens)
                    start = time.monotonic()
                    try:
                        text, tokens, reasoning, attempts = query_endpoint(
                            client, model, prompt, headers
                        )
                        error = None
                    except EndpointError as exc:
                        text, tokens, reasoning, attempts = "", 0, None, model.max_retries + 1
                        error = str(exc)
                        logger.warning("endpoint failed for %s/%s: %s", b.grammar_id, i, exc)
                    return EvalRecord(
                        grammar_id=b.grammar_id,
                        example_id=str(i),
                        model=model_name,
                        label=ex.label,
                        length=ex.length,
                        prediction=extract_prediction(text),
                        raw_completion=text,
                        completion_tokens=tokens,
                        reasoning_tokens=reasoning,
                        wall_time=time.monotonic() - start,
                        attempts=attempts,
                        error=error,
                    )

                with ThreadPoolExecutor(max_workers=model.max_parallel_requests) as pool:
                    futures = [pool.submit(call, t) for t in pending]
                    for fut in as_completed(futures):
                        finish(fut.result(), journal)
        else:
            pass  # everything already journaled

    return [done[(b.grammar_id, str(i))] for b, i in tasks]


def _auth_headers(cfg: EndpointConfig) -> dict:
    key = os.environ.get(cfg.api_key_env, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


@dataclass(frozen=True)
class StrategyLabel:
    category: str  # heuristic | rule-based | code | unknown
    note: str | None = None


_STRATEGY_RE = re.compile(r"(?<![\w-])(heuristic|rule[\s-]based|code)(?![\w-])", re.IGNORECASE)


def parse_strategy_reply(reply: str) -> StrategyLabel:
    """Last category name wins; hyphen or space tolerated in "rule-based"."""
    matches = _STRATEGY_RE.findall(reply or "")
    if not matches:
        return StrategyLabel(STRATEGY_UNKNOWN)
    word = matches[-1].lower()
    if word.startswith("rule"):
        return StrategyLabel(STRATEGY_RULE_BASED)
    return StrategyLabel(word)


def classify_strategy(completion: str, judge: EndpointConfig) -> StrategyLabel:
    """Ask the judge endpoint to categorise one completion.  Endpoint errors
    degrade to an "unknown" label carrying the error note."""
    judge.check()
    with httpx.Client() as client:
        try:
            reply, _, _, _ = query_endpoint(
                client, judge, render_judge_prompt(completion), _auth_headers(judge)
            )
        except EndpointError as exc:
            return StrategyLabel(STRATEGY_UNKNOWN, note=str(exc))
    return parse_strategy_reply(reply)


def classify_strategies(completions, judge: EndpointConfig) -> list[StrategyLabel]:
    """Batch judge with the endpoint's request fan-out; order preserved."""
    judge.check()
    completions = list(completions)
    out: list[StrategyLabel | None] = [None] * len(completions)
    headers = _auth_headers(judge)
    with httpx.Client() as client:
        with ThreadPoolExecutor(max_workers=judge.max_parallel_requests) as pool:

            def call(i: int) -> tuple[int, StrategyLabel]:
                try:
                    reply, _, _, _ = query_endpoint(
                        client, judge, render_judge_prompt(completions[i]), headers
                    )
                except EndpointError as exc:
                    return i, StrategyLabel(STRATEGY_UNKNOWN, note=str(exc))
                return i, parse_strategy_reply(reply)

            for fut in as_completed([pool.submit(call, i) for i in range(len(completions))]):
                i, label = fut.result()
                out[i] = label
    return out  # type: ignore[return-value]


def judge_agreement(labels_a, labels_b) -> float:
    """Fraction of aligned positions whose categories agree."""

    def cat(x):
        return x.category if isinstance(x, StrategyLabel) else x

    a = [cat(x) for x in labels_a]
    b = [cat(x) for x in labels_b]
    if len(a) != len(b):
        raise LengthMismatch(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("cannot score empty label lists")
    return sum(1 for x, y in zip(a, b) if x == y) / len(a)
