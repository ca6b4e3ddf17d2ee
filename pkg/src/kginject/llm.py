"""Chat-completion HTTP client with retry, plus a deterministic offline mock.

Every model in the pipeline is reached through the same wire shape: POST
``{base_url}/chat/completions`` with a JSON body of model, messages,
temperature, and max_tokens. A caching wrapper keyed by (model name, prompt
fingerprint) makes paid runs resumable and reruns byte-identical.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from typing import Callable

import requests

from .prompt import RenderedPrompt

Transport = Callable[[str, dict, bytes, float], tuple[int, bytes]]
Completer = Callable[[RenderedPrompt], "LlmResponse"]


class LlmError(Exception):
    pass


class AuthError(LlmError):
    """Missing or rejected credentials; never retried."""


class RetryExhaustedError(LlmError):
    def __init__(self, attempts: int, last: str):
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts


class MalformedResponseError(LlmError):
    pass


class StatusError(LlmError):
    """Non-retryable HTTP status other than an auth failure."""

    def __init__(self, status: int):
        super().__init__(f"endpoint returned status {status}")
        self.status = status


@dataclass(frozen=True)
class ModelConfig:
    name: str
    base_url: str = "https://api.openai.com/v1"
    temperature: float = 0.0
    max_output_tokens: int = 512
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str = "LLM_API_KEY"

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "base_url": self.base_url,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "api_key_env": self.api_key_env,
        }


@dataclass(frozen=True)
class LlmResponse:
    text: str
    model_name: str
    latency: float
    attempt_count: int


def request_body(prompt: RenderedPrompt, config: ModelConfig) -> bytes:
    """Byte-deterministic chat-completion body for (prompt, config)."""
    doc = {
        "model": config.name,
        "messages": [{"role": role, "content": content} for role, content in prompt.messages],
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _requests_transport(url: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
    try:
        resp = requests.post(url, data=body, headers=headers, timeout=timeout)
    except requests.Timeout:
        raise TimeoutError("request timed out") from None
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from None
    return resp.status_code, resp.content


def _extract_text(body: bytes) -> str:
    try:
        doc = json.loads(body)
        text = doc["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(f"unexpected response shape: {exc}") from None
    if not isinstance(text, str):
        raise MalformedResponseError("message content is not a string")
    return text


def complete(
    prompt: RenderedPrompt,
    config: ModelConfig,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> LlmResponse:
    """One chat completion with exponential backoff on 429/5xx/timeouts.

    Auth failures (401/403 or a missing key) are raised immediately; other
    non-retryable statuses raise StatusError; a malformed body raises
    MalformedResponseError.
    """
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise AuthError(f"environment variable {config.api_key_env} is not set")
    send = transport or _requests_transport
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json", "Authorization": f"Bearer {api_key}"}
    body = request_body(prompt, config)

    started = time.monotonic()
    last_failure = ""
    attempts = 0
    for attempt in range(config.max_retries + 1):
        attempts = attempt + 1
        try:
            status, data = send(url, headers, body, config.timeout)
        except TimeoutError as exc:
            last_failure = f"timeout: {exc}"
        except ConnectionError as exc:
            raise LlmError(f"network failure: {exc}") from None
        else:
            if status == 200:
                return LlmResponse(
                    text=_extract_text(data),
                    model_name=config.name,
                    latency=time.monotonic() - started,
                    attempt_count=attempts,
                )
            if status in (401, 403):
                raise AuthError(f"endpoint rejected credentials with status {status}")
            if status == 429 or status >= 500:
                last_failure = f"status {status}"
            else:
                raise StatusError(status)
        if attempt < config.max_retries:
            sleep(0.5 * 2**attempt)
    raise RetryExhaustedError(attempts, last_failure)


def mock_complete(
    prompt: RenderedPrompt, script: dict[str, str], fallback: str = "UNKNOWN"
) -> LlmResponse:
    """Deterministic offline stand-in: the reply is looked up by the prompt
    fingerprint, then by the first script key occurring as a substring of the
    prompt text, then the fallback."""
    if not script:
        raise ValueError("mock script must not be empty")
    if prompt.fingerprint in script:
        text = script[prompt.fingerprint]
    else:
        text = fallback
        haystack = prompt.text()
        for pattern, reply in script.items():
            if pattern in haystack:
                text = reply
                break
    return LlmResponse(text=text, model_name="mock", latency=0.0, attempt_count=1)


def make_completer(
    config: ModelConfig,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Completer:
    return lambda prompt: complete(prompt, config, transport=transport, sleep=sleep)


def make_mock_completer(script: dict[str, str], fallback: str = "UNKNOWN") -> Completer:
    return lambda prompt: mock_complete(prompt, script, fallback=fallback)


# ---------------------------------------------------------------------------
# response cache

def _safe_name(name: str) -> str:
    return re.sub(r"[^0-9A-Za-z._-]", "_", name)


def cache_path(cache_dir: str, model_name: str, fingerprint: str) -> str:
    return os.path.join(cache_dir, f"{_safe_name(model_name)}__{fingerprint}.json")


def with_cache(completer: Completer, cache_dir: str, model_name: str) -> Completer:
    """Wrap a completer with a disk cache keyed by (model name, fingerprint)."""

    def run(prompt: RenderedPrompt) -> LlmResponse:
        path = cache_path(cache_dir, model_name, prompt.fingerprint)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            return LlmResponse(doc["text"], doc["model"], 0.0, 0)
        resp = completer(prompt)
        os.makedirs(cache_dir, exist_ok=True)
        doc = {"model": resp.model_name, "fingerprint": prompt.fingerprint, "text": resp.text}
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False)
        os.replace(tmp, path)
        return resp

    return run
