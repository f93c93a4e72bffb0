"""Single client boundary for every generative-model call.

Four roles share one completion wire format: the query expander, the
relevance judge, the result summarizer, and the synthetic-query generator.
Each role gets its own endpoint (the deployment uses different models per
role), configured programmatically or from BRIEFBANK_*_URL / *_API_KEY
environment variables.

Every operation here is total under :class:`MockGateway`, so the full test
suite runs without a network. Prompt templates live in ``prompts/`` as
versioned assets and are sent byte-for-byte.
"""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    ContractError,
    EmptyOutputError,
    RemoteError,
    TransportError,
    ValidationError,
)

logger = logging.getLogger(__name__)

_PROMPT_DIR = Path(__file__).parent / "prompts"

ROLE_EXPANDER = "expander"
ROLE_JUDGE = "judge"
ROLE_SUMMARIZER = "summarizer"
ROLE_GENERATOR = "generator"
ROLE_SEGMENTER = "segmenter"
ROLE_CONTENT_FILTER = "content_filter"

_ENV_URLS = {
    ROLE_EXPANDER: "BRIEFBANK_EXPAND_URL",
    ROLE_JUDGE: "BRIEFBANK_JUDGE_URL",
    ROLE_SUMMARIZER: "BRIEFBANK_SUMMARY_URL",
    ROLE_GENERATOR: "BRIEFBANK_GEN_URL",
}


def load_prompt(name: str) -> str:
    return (_PROMPT_DIR / name).read_text(encoding="utf-8")


EXPANSION_SYSTEM_PROMPT = load_prompt("query_expansion_system.txt")
GENERATION_SYSTEM_TEMPLATE = load_prompt("synthetic_generation_system.txt")
JUDGE_SYSTEM_PROMPT = load_prompt("relevance_judge_system.txt")
SUMMARY_SYSTEM_PROMPT = load_prompt("result_summary_system.txt")
CONTENT_FILTER_SYSTEM_PROMPT = load_prompt("content_filter_system.txt")


@dataclass(frozen=True)
class PromptRequest:
    system_prompt: str
    user_prompt: str
    max_output_chars: int = 4000
    temperature_hint: float = 0.0

    def __post_init__(self):
        if not self.system_prompt or not self.user_prompt:
            raise ValidationError("prompts must be non-empty")
        if self.max_output_chars <= 0:
            raise ValidationError("max_output_chars must be positive")
        if self.temperature_hint < 0:
            raise ValidationError("temperature_hint must be >= 0")


@dataclass
class EndpointConfig:
    url: str
    api_key: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    backoff_base: float = 0.1
    post: object | None = None  # injectable (url, payload, timeout, headers) -> dict


def _default_post(url: str, payload: dict, timeout: float, headers: dict) -> dict:
    resp = requests.post(url, json=payload, timeout=timeout, headers=headers)
    if resp.status_code != 200:
        raise TransportError(f"POST {url} -> {resp.status_code}")
    return resp.json()


def complete(endpoint: EndpointConfig, request: PromptRequest) -> str:
    """One completion call: retries transient failures, truncates oversized replies."""
    payload = {
        "system": request.system_prompt,
        "user": request.user_prompt,
        "max_chars": request.max_output_chars,
    }
    headers = {}
    if endpoint.api_key:
        headers["Authorization"] = f"Bearer {endpoint.api_key}"
    post = endpoint.post or _default_post
    attempt = 0
    while True:
        try:
            body = post(endpoint.url, payload, endpoint.timeout, headers)
            break
        except (TransportError, requests.RequestException) as exc:
            attempt += 1
            if attempt > endpoint.max_retries:
                raise TransportError(
                    f"completion endpoint {endpoint.url} failed after {attempt} attempts: {exc}"
                ) from exc
            time.sleep(min(endpoint.backoff_base * 2 ** (attempt - 1), 2.0))
    text = body.get("text")
    if not isinstance(text, str):
        raise ContractError("completion endpoint reply missing 'text'")
    if not text.strip():
        raise EmptyOutputError(f"completion endpoint {endpoint.url} returned empty text")
    return text[: request.max_output_chars]


class LLMGateway:
    """Role -> endpoint router. Shareable; calls are independent."""

    def __init__(self, endpoints: dict[str, EndpointConfig] | None = None):
        self.endpoints = dict(endpoints or {})
        self.call_counts: dict[str, int] = {}

    @classmethod
    def from_env(cls, post=None) -> "LLMGateway":
        endpoints = {}
        for role, var in _ENV_URLS.items():
            url = os.environ.get(var)
            if url:
                key = os.environ.get(var.replace("_URL", "_API_KEY"))
                endpoints[role] = EndpointConfig(url=url, api_key=key, post=post)
        return cls(endpoints)

    def complete_role(self, role: str, request: PromptRequest) -> str:
        endpoint = self.endpoints.get(role)
        if endpoint is None:
            raise TransportError(f"no endpoint configured for role {role!r}")
        self.call_counts[role] = self.call_counts.get(role, 0) + 1
        return complete(endpoint, request)


class MockGateway:
    """Deterministic offline gateway.

    ``replies`` is a canned table keyed by user prompt (applies to every
    role). Per-role behavior goes in ``role_handlers``: a str (fixed reply),
    a dict (user prompt -> reply), or a callable taking the PromptRequest.
    Roles listed in ``failing_roles`` (or everything, with ``fail_all``)
    raise TransportError, which exercises the degraded paths.
    """

    def __init__(self, replies: dict[str, str] | None = None, default_reply: str = "",
                 role_handlers: dict | None = None, failing_roles: set[str] | None = None,
                 fail_all: bool = False):
        self.replies = dict(replies or {})
        self.default_reply = default_reply
        self.role_handlers = dict(role_handlers or {})
        self.failing_roles = set(failing_roles or ())
        self.fail_all = fail_all
        self.calls: list[tuple[str, PromptRequest]] = []

    def complete_role(self, role: str, request: PromptRequest) -> str:
        self.calls.append((role, request))
        if self.fail_all or role in self.failing_roles:
            raise TransportError(f"mock gateway failure for role {role!r}")
        handler = self.role_handlers.get(role)
        if handler is None:
            reply = self.replies.get(request.user_prompt, self.default_reply)
        elif callable(handler):
            reply = handler(request)
        elif isinstance(handler, dict):
            reply = handler.get(request.user_prompt, self.default_reply)
        else:
            reply = str(handler)
        if not reply.strip():
            raise EmptyOutputError(f"mock gateway has no reply for role {role!r}")
        return reply[: request.max_output_chars]


# ---------------------------------------------------------------------------
# Query expansion (structured legal reasoning, then an augmented query)
# ---------------------------------------------------------------------------


@dataclass
class ExpandedQuery:
    original: str
    issue: str = ""
    rule: str = ""
    analysis: str = ""
    augmented: str = ""
    degraded: bool = False
    overlap_warning: bool = False


_LABELS = ("issue", "rule", "analysis", "augmented query")
_LABEL_RE = re.compile(
    r"^\s*[*\-#]*\s*\"?(issue|rule|analysis|augmented query)\"?\s*:\s*(.*)$",
    re.IGNORECASE,
)


def _strip_value(value: str) -> str:
    value = value.strip()
    if value.endswith(","):
        value = value[:-1].rstrip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1]
    return value.strip()


def parse_expansion_reply(reply: str) -> dict[str, str]:
    """Extract the labeled fields, tolerant to quoting, ordering, wrapping."""
    fields: dict[str, list[str]] = {}
    current: str | None = None
    for line in reply.splitlines():
        m = _LABEL_RE.match(line)
        if m:
            current = m.group(1).lower()
            fields[current] = [m.group(2)]
        elif current is not None and line.strip():
            fields[current].append(line.strip())
    return {k: _strip_value(" ".join(v)) for k, v in fields.items()}


def _token_overlap(original: str, augmented: str) -> float:
    orig = set(original.lower().split())
    if not orig:
        return 1.0
    aug = set(augmented.lower().split())
    return len(orig & aug) / len(orig)


def expand_query(gateway, query_text: str) -> ExpandedQuery:
    """Expand a query via issue/rule/analysis reasoning into an augmented query.

    Any failure (transport, unparseable reply) degrades to augmented ==
    original, so the downstream pipeline behaves exactly as if expansion
    were disabled.
    """
    if not query_text.strip():
        raise ValidationError("query_text must be non-empty")
    request = PromptRequest(
        system_prompt=EXPANSION_SYSTEM_PROMPT,
        user_prompt=query_text,
        max_output_chars=4000,
    )
    try:
        reply = gateway.complete_role(ROLE_EXPANDER, request)
    except RemoteError as exc:
        logger.warning("query expansion unavailable: %s", exc)
        return ExpandedQuery(original=query_text, augmented=query_text, degraded=True)

    fields = parse_expansion_reply(reply)
    augmented = fields.get("augmented query", "")
    if not augmented:
        return ExpandedQuery(original=query_text, augmented=query_text, degraded=True)
    expanded = ExpandedQuery(
        original=query_text,
        issue=fields.get("issue", ""),
        rule=fields.get("rule", ""),
        analysis=fields.get("analysis", ""),
        augmented=augmented,
    )
    if _token_overlap(query_text, augmented) < 0.5:
        expanded.overlap_warning = True
        logger.warning("augmented query shares <50%% of original tokens: %r", query_text)
    return expanded


# ---------------------------------------------------------------------------
# Result summarization (extraction-only; never fabricates citations)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    text: str
    degraded: bool = False


def summarize_result(gateway, paragraph: str, doc_meta: dict | None = None,
                     max_chars: int = 400) -> Summary:
    """Summarize a result passage; on gateway failure, fall back to its head."""
    if not paragraph.strip():
        raise ValidationError("paragraph must be non-empty")
    meta_lines = []
    for key in ("title", "filing_date"):
        if doc_meta and doc_meta.get(key):
            meta_lines.append(f"{key}: {doc_meta[key]}")
    user = "\n".join(meta_lines + ["passage:", paragraph])
    request = PromptRequest(
        system_prompt=SUMMARY_SYSTEM_PROMPT,
        user_prompt=user,
        max_output_chars=max_chars,
    )
    try:
        return Summary(text=gateway.complete_role(ROLE_SUMMARIZER, request)[:max_chars])
    except RemoteError as exc:
        logger.warning("summary unavailable, using passage head: %s", exc)
        return Summary(text=paragraph[:max_chars], degraded=True)


# ---------------------------------------------------------------------------
# Relevance judging (binary filter during dataset construction)
# ---------------------------------------------------------------------------

LABEL_RELEVANT = "relevant"
LABEL_IRRELEVANT = "irrelevant"
LABEL_UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class JudgeVerdict:
    label: str
    raw_response: str
    transport_error: bool = False


def _parse_verdict(reply: str) -> str:
    head = reply.strip().upper()
    head = head.lstrip("*# ").rstrip(".!")
    if head.startswith(("IRRELEVANT", "NOT RELEVANT", "NO")):
        return LABEL_IRRELEVANT
    if head.startswith(("RELEVANT", "YES")):
        return LABEL_RELEVANT
    return LABEL_UNCERTAIN


def judge_relevance(gateway, query: str, paragraph: str) -> JudgeVerdict:
    """Ask the judge endpoint whether a paragraph answers a query.

    Unparseable or failed replies come back as "uncertain" (never raises),
    so callers decide how conservative to be.
    """
    if not query.strip() or not paragraph.strip():
        raise ValidationError("query and paragraph must be non-empty")
    request = PromptRequest(
        system_prompt=JUDGE_SYSTEM_PROMPT,
        user_prompt=f"query: {query}\n\nparagraph: {paragraph}",
        max_output_chars=200,
    )
    try:
        reply = gateway.complete_role(ROLE_JUDGE, request)
    except RemoteError as exc:
        return JudgeVerdict(label=LABEL_UNCERTAIN,
                            raw_response=f"transport error: {exc}",
                            transport_error=True)
    return JudgeVerdict(label=_parse_verdict(reply), raw_response=reply)


# ---------------------------------------------------------------------------
# Synthetic query generation (training-pair curation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratedQuery:
    text: str | None
    declined: bool = False  # model replied None: paragraph too thin to query
    error: str | None = None  # transport failure, distinct from declining

    @property
    def ok(self) -> bool:
        return self.text is not None


def render_fewshot_examples(examples: list[tuple[str, str]]) -> str:
    """(query, paragraph) pairs -> the examples block of the generation prompt."""
    blocks = [f"paragraph: {para}\nquery: {query}" for query, para in examples]
    return "\n\n".join(blocks) if blocks else "(no examples)"


def generate_synthetic_query(gateway, paragraph: str,
                             fewshot_examples: list[tuple[str, str]] | None = None
                             ) -> GeneratedQuery:
    """Generate one search query for which the paragraph is the top result.

    The model declines thin paragraphs by replying "None" (case-insensitive);
    that is a normal outcome, reported separately from transport errors.
    """
    if not paragraph.strip():
        raise ValidationError("paragraph must be non-empty")
    system = GENERATION_SYSTEM_TEMPLATE.format(
        examples=render_fewshot_examples(fewshot_examples or [])
    )
    request = PromptRequest(system_prompt=system, user_prompt=paragraph,
                            max_output_chars=400)
    try:
        reply = gateway.complete_role(ROLE_GENERATOR, request)
    except RemoteError as exc:
        return GeneratedQuery(text=None, error=str(exc))
    if reply.strip().lower() == "none":
        return GeneratedQuery(text=None, declined=True)
    return GeneratedQuery(text=reply.strip())
