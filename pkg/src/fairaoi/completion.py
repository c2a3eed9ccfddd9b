"""Text-completion services used by the LLM offspring operator."""

from __future__ import annotations

import json
import os
import urllib.request
from typing import Iterable, Optional, Protocol

TOKEN_ENV = "FAIRAOI_LLM_TOKEN"


class CompletionService(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpCompletionService:
    """Single POST per prompt: JSON body ``{"model": ..., "prompt": ...}``.

    The raw response body is returned; the operator scans it for the
    ``<begin> ... <end>`` span, so any reply format that echoes the answer
    text works.
    """

    def __init__(self, endpoint: str, model: str = "default", token: Optional[str] = None,
                 timeout_s: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.timeout_s = timeout_s

    def complete(self, prompt: str) -> str:
        body = json.dumps({"model": self.model, "prompt": prompt}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
            return resp.read().decode("utf-8", errors="replace")


class ScriptedService:
    """Replays canned replies in order; raises once the script runs out."""

    def __init__(self, replies: Iterable[str]):
        self.replies = list(replies)
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if len(self.prompts) > len(self.replies):
            raise RuntimeError("scripted service exhausted")
        return self.replies[len(self.prompts) - 1]
