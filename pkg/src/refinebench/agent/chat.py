"""OpenAI-compatible multimodal chat client and the three agent stages."""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import httpx
import numpy as np

from ..errors import ServiceError
from ..http import post_json
from ..tools.locator import encode_png_b64
from .parse import RetrievalDecision, VqppDecision, parse_operations, parse_retrieval_decision
from .prompts import build_answer_prompt, build_retrieval_prompt, build_vqpp_prompt, caption_prompt


@dataclass
class ChatConfig:
    endpoint: str  # base URL; "/chat/completions" is appended unless already present
    model: str
    api_key_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0
    max_retries: int = 2
    backoff: float = 1.0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def url(self) -> str:
        base = self.endpoint.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"


class ChatClient:
    def __init__(self, config: ChatConfig, http_client: httpx.Client | None = None):
        self.config = config
        self.http = http_client or httpx.Client(timeout=config.timeout)
        self._slots = threading.Semaphore(max(1, config.max_in_flight))

    def complete(self, image: np.ndarray | None, prompt: str) -> str:
        cfg = self.config
        content: list[dict] = [{"type": "text", "text": prompt}]
        if image is not None:
            content.append({"type": "image_url",
                            "image_url": {"url": "data:image/png;base64," + encode_png_b64(image)}})
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        headers = {}
        if cfg.api_key_env and os.environ.get(cfg.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[cfg.api_key_env]}"
        with self._slots:
            body = post_json(self.http, cfg.url, payload, headers=headers,
                             attempts=cfg.max_retries + 1, backoff=cfg.backoff, timeout=cfg.timeout)
        try:
            message = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ServiceError(f"unexpected chat response shape: {str(body)[:200]}") from exc
        if isinstance(message, list):
            message = "".join(p.get("text", "") for p in message if isinstance(p, dict))
        return message or ""


def call_chat(config: ChatConfig, image, prompt: str, client: ChatClient | None = None) -> str:
    return (client or ChatClient(config)).complete(image, prompt)


def propose_operations(client: ChatClient, image, question: str, template: str | None = None) -> VqppDecision:
    return parse_operations(client.complete(image, build_vqpp_prompt(question, template)))


def decide_retrieval(client: ChatClient, image, question: str, template: str | None = None) -> RetrievalDecision:
    return parse_retrieval_decision(client.complete(image, build_retrieval_prompt(question, template)))


def generate_answer(client: ChatClient, image, question: str, contexts, templates: dict | None = None) -> str:
    return client.complete(image, build_answer_prompt(question, contexts, templates)).strip()


def caption(client: ChatClient, image) -> str:
    return client.complete(image, caption_prompt()).strip()
