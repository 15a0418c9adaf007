"""Front-face oracle clients: an HTTP client and a file-scripted mock.

Wire format: POST a JSON body ``{"prompt": str, "images": {"A": b64, ...}}``
and read back ``{"choice": "A".."E"}``. Images travel as base64 binary PPM.
"""
from __future__ import annotations

import base64
import json
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .render import ppm_bytes

CHOICES = ("A", "B", "C", "D", "E")


class AnnotationError(RuntimeError):
    """The oracle could not be reached or failed to answer."""

    def __init__(self, message, audit=None):
        super().__init__(message)
        self.audit = audit


class ProtocolError(AnnotationError):
    """The oracle answered with something outside the A-E protocol."""


def annotation_prompt() -> str:
    data = json.loads(resources.files("orientkit").joinpath("data/prompts.json").read_text(encoding="utf-8"))
    return data["front_face_annotation"]


@dataclass
class OracleRequest:
    prompt: str
    images: dict  # letter -> (H, W, 3) uint8

    def to_json(self) -> dict:
        return {
            "prompt": self.prompt,
            "images": {k: base64.b64encode(ppm_bytes(v)).decode("ascii") for k, v in sorted(self.images.items())},
        }


def parse_choice(payload, allowed=CHOICES) -> str:
    """Extract and validate the ``choice`` field of an oracle reply."""
    if isinstance(payload, (bytes, str)):
        try:
            payload = json.loads(payload)
        except ValueError as exc:
            raise ProtocolError(f"oracle reply is not JSON: {payload!r:.80}") from exc
    if not isinstance(payload, dict) or "choice" not in payload:
        raise ProtocolError(f"oracle reply lacks a 'choice' field: {payload!r:.80}")
    choice = payload["choice"]
    if not isinstance(choice, str) or choice.strip().upper() not in allowed:
        raise ProtocolError(f"oracle choice {choice!r} is not one of {', '.join(allowed)}")
    return choice.strip().upper()


class HttpOracle:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout
        self.calls = 0

    def ask(self, request: OracleRequest) -> str:
        """Send one request; return the raw reply body."""
        self.calls += 1
        body = json.dumps(request.to_json()).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
            raise AnnotationError(f"oracle at {self.url} failed: {exc}") from exc


@dataclass
class ScriptedOracle:
    """Replays canned replies, one per call, and keeps every request it saw.

    Each script line is either a bare letter or a full JSON reply.
    """

    replies: list
    requests: list = field(default_factory=list)

    @classmethod
    def from_file(cls, path) -> "ScriptedOracle":
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
        return cls(lines)

    @property
    def calls(self) -> int:
        return len(self.requests)

    def ask(self, request: OracleRequest) -> str:
        self.requests.append(request)
        if len(self.requests) > len(self.replies):
            raise AnnotationError("scripted oracle ran out of replies")
        r = self.replies[len(self.requests) - 1]
        return r if r.startswith("{") else json.dumps({"choice": r})
