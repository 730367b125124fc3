"""Prompt construction, chat-completions client and the record/replay cache."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .core import OoroError
from .geometry import BBox

logger = logging.getLogger(__name__)

API_KEY_ENV = "OORO_API_KEY"

PROMPT_TEMPLATE = (
    "List all visible objects stated in these {categories} from foreground to background "
    "starting from index 0.\n"
    "{bboxes}"
    "Professionally state object occlusion, return it in this format:\n"
    '"Object A occludes Object B"\n'
    "If there are multiple objects in same class, number them (e.g., bottle 0, bottle 1, etc).\n"
    "Return only the ordered list and occlusions -- no explanations."
)
FINAL_INSTRUCTION = "Return only the ordered list and occlusions -- no explanations."


class EmptyCategoryList(OoroError, ValueError):
    pass


class CacheMiss(OoroError, LookupError):
    pass


class TransportError(OoroError):
    pass


class RateLimited(TransportError):
    def __init__(self, message: str, retry_after: float | None):
        self.retry_after = retry_after
        super().__init__(message)


class MalformedResponse(OoroError):
    pass


@dataclass(frozen=True)
class PromptSpec:
    template: str
    categories_csv: str
    include_bboxes: bool
    rendered: str


def build_prompt(
    categories_csv: str,
    include_bboxes: bool = False,
    bboxes: Sequence[tuple[str, BBox]] | None = None,
    template: str = PROMPT_TEMPLATE,
) -> PromptSpec:
    """Render the occlusion prompt for one image.

    With ``include_bboxes`` each ``(name, box)`` becomes a ``name: [x,y,w,h]``
    line ahead of the format instruction.
    """
    if not categories_csv.strip():
        raise EmptyCategoryList("the category list is empty")
    lines = ""
    if include_bboxes:
        lines = "".join(f"{name}: {_box_text(box)}\n" for name, box in bboxes or ())
    rendered = template.format(categories=categories_csv, bboxes=lines)
    return PromptSpec(template, categories_csv, include_bboxes, rendered)


def _box_text(box: BBox) -> str:
    return "[" + ",".join(f"{v:g}" for v in (box.x, box.y, box.w, box.h)) + "]"


def image_digest(image_bytes: bytes) -> str:
    return hashlib.sha256(image_bytes).hexdigest()


def cache_key(model: str, prompt: str, image_sha: str) -> str:
    return hashlib.sha256(f"{model}\n{prompt}\n{image_sha}".encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmExchange:
    cache_key: str
    model_name: str
    image_ref: str
    prompt: str
    response_text: str
    timestamp: int

    def to_json(self) -> dict:
        return {
            "key": self.cache_key,
            "model": self.model_name,
            "image_digest": self.image_ref,
            "prompt": self.prompt,
            "response": self.response_text,
            "ts": self.timestamp,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LlmExchange":
        return cls(obj["key"], obj["model"], obj["image_digest"], obj["prompt"], obj["response"], int(obj["ts"]))


class ResponseCache:
    """Append-only JSONL store of exchanges, keyed by ``cache_key``.

    Reads are plain dict lookups; appends go through one lock so rows
    never interleave. Later rows with the same key win.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._rows: dict[str, LlmExchange] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as f:
                for lineno, line in enumerate(f, 1):
                    if not line.strip():
                        continue
                    try:
                        ex = LlmExchange.from_json(json.loads(line))
                    except (KeyError, ValueError, TypeError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: bad cache row ({exc!r})") from exc
                    self._rows[ex.cache_key] = ex

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key: str) -> bool:
        return key in self._rows

    def models(self) -> list[str]:
        return sorted({ex.model_name for ex in self._rows.values()})

    def get(self, key: str) -> LlmExchange | None:
        return self._rows.get(key)

    def append(self, ex: LlmExchange) -> None:
        with self._lock:
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as f:
                    f.write(json.dumps(ex.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            self._rows[ex.cache_key] = ex


@dataclass
class EndpointConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key: str | None = None
    live: bool = False
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 3
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0)
    extra_headers: dict[str, str] = field(default_factory=dict)

    def resolved_key(self) -> str | None:
        return self.api_key or os.environ.get(API_KEY_ENV)


def image_mime_type(image_bytes: bytes) -> str:
    if image_bytes.startswith(b"\x89PNG\r\n\x1a\n"):
        return "image/png"
    if image_bytes.startswith(b"\xff\xd8\xff"):
        return "image/jpeg"
    raise ValueError("image is neither PNG nor JPEG")


def request_body(image_bytes: bytes, prompt: str, config: EndpointConfig) -> dict:
    data_url = f"data:{image_mime_type(image_bytes)};base64," + base64.b64encode(image_bytes).decode("ascii")
    return {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {"type": "image_url", "image_url": {"url": data_url}},
                ],
            }
        ],
    }


def _response_text(payload: object) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]  # type: ignore[index]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no message content in response ({exc!r})") from exc
    if isinstance(content, list):
        parts = [p.get("text") for p in content if isinstance(p, dict) and p.get("type") == "text"]
        if not parts or not all(isinstance(p, str) for p in parts):
            raise MalformedResponse("response has no text parts")
        content = "".join(parts)
    if not isinstance(content, str) or not content.strip():
        raise MalformedResponse("response text is empty or not text")
    return content


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def query(
    image_bytes: bytes,
    prompt: PromptSpec | str,
    config: EndpointConfig,
    cache: ResponseCache,
    *,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> LlmExchange:
    """Return the model's reply for one image, from the cache or the endpoint.

    Replay mode (``config.live`` false) is a pure cache lookup and never
    touches the network.
    """
    text = prompt.rendered if isinstance(prompt, PromptSpec) else prompt
    digest = image_digest(image_bytes)
    key = cache_key(config.model, text, digest)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if not config.live:
        raise CacheMiss(f"no cached response for key {key}")

    body = request_body(image_bytes, text, config)
    headers = {"Content-Type": "application/json", **config.extra_headers}
    api_key = config.resolved_key()
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    own_client = client is None
    http = client or httpx.Client(timeout=config.timeout)
    try:
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            if attempt:
                sleep(config.backoff[min(attempt - 1, len(config.backoff) - 1)])
            try:
                resp = http.post(config.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                logger.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429:
                raise RateLimited(f"rate limited by {config.endpoint}", _retry_after(resp))
            if resp.status_code >= 500:
                last_error = TransportError(f"HTTP {resp.status_code}")
                logger.warning("server error %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except ValueError as exc:
                raise MalformedResponse("response body is not JSON") from exc
            exchange = LlmExchange(key, config.model, digest, text, _response_text(payload), int(time.time()))
            cache.append(exchange)
            return exchange
        raise TransportError(f"gave up after {config.max_retries} retries: {last_error}")
    finally:
        if own_client:
            http.close()
