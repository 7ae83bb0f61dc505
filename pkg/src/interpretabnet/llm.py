"""Minimal chat-completion client with retries and structured-output parsing.

Speaks the common chat-completion JSON wire format so any compatible server
(or a test double) can answer.  The reply's first embedded JSON object is
extracted and validated against the prompt bundle's expected keys.
"""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from .errors import (
    ConfigError,
    LlmParseError,
    LlmSchemaMismatchError,
    LlmTransportError,
)
from .prompts import PromptBundle

DEFAULT_API_KEY_ENV = "INTERPRETABNET_LLM_API_KEY"


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4-1106-preview"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be at least 1")
        if self.retry_backoff < 0:
            raise ConfigError("retry_backoff must be non-negative")


def extract_first_json_object(text: str) -> dict | None:
    """First balanced {...} block in ``text`` that parses as a JSON object."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for pos in range(start, len(text)):
            ch = text[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : pos + 1]
                    try:
                        parsed = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, dict):
                        return parsed
                    break
        start = text.find("{", start + 1)
    return None


def _post_chat(bundle: PromptBundle, cfg: LlmConfig, api_key: str) -> str:
    body = json.dumps(
        {
            "model": cfg.model,
            "messages": [{"role": "user", "content": bundle.text}],
        }
    ).encode("utf-8")
    request = urllib.request.Request(
        cfg.endpoint,
        data=body,
        headers={
            "Content-Type": "application/json",
            "Authorization": f"Bearer {api_key}",
        },
        method="POST",
    )
    last_error = None
    for attempt in range(cfg.max_retries):
        try:
            with urllib.request.urlopen(request, timeout=cfg.timeout) as resp:
                return resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            if exc.code < 500:
                raise LlmTransportError(f"HTTP {exc.code}: {exc.reason}") from exc
            last_error = exc
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            last_error = exc
        if attempt + 1 < cfg.max_retries:
            time.sleep(cfg.retry_backoff * (2**attempt))
    raise LlmTransportError(
        f"request failed after {cfg.max_retries} attempts: {last_error}"
    ) from last_error


def query_llm(bundle: PromptBundle, cfg: LlmConfig) -> dict[str, str]:
    """Send the prompt and parse the per-mask interpretation map.

    Raises :class:`LlmParseError` when no JSON object can be extracted from
    the reply and :class:`LlmSchemaMismatchError` (carrying the raw map)
    when expected keys are missing.  The API key is read from the named
    environment variable and never logged.
    """
    api_key = os.environ.get(cfg.api_key_env)
    if not api_key:
        raise ConfigError(
            f"API key environment variable {cfg.api_key_env!r} is not set"
        )
    raw_body = _post_chat(bundle, cfg, api_key)
    try:
        payload = json.loads(raw_body)
        reply_text = payload["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        raise LlmParseError(
            "response body is not a chat-completion payload", raw_text=raw_body
        ) from None
    parsed = extract_first_json_object(reply_text)
    if parsed is None:
        raise LlmParseError(
            "no JSON object found in model reply", raw_text=reply_text
        )
    result = {str(k): str(v) for k, v in parsed.items()}
    missing = [k for k in bundle.expected_schema if k not in result]
    if missing:
        raise LlmSchemaMismatchError(
            f"model reply misses expected keys: {missing}",
            parsed=result,
            missing_keys=missing,
        )
    return result
