"""Locator bindings behind the ``locate`` tool."""

from __future__ import annotations

import base64
import io
import os
from typing import Protocol

import httpx
import numpy as np
from PIL import Image as PILImage

from ..errors import NoDetection, ServiceError
from ..http import post_json
from ..raster import BBox, dims


class Locator(Protocol):
    def locate(self, image: np.ndarray, prompt: str) -> BBox: ...


class OracleLocator:
    """Returns the box recorded for a triplet, whatever the prompt."""

    def __init__(self, bbox: BBox | None):
        self.bbox = bbox

    @classmethod
    def from_triplet(cls, triplet) -> "OracleLocator":
        return cls(triplet.bbox)

    def locate(self, image, prompt):
        if self.bbox is None:
            raise NoDetection("triplet has no recorded region")
        return self.bbox


class NullLocator:
    def locate(self, image, prompt):
        raise NoDetection("no locator configured")


def encode_png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(image, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class RemoteLocator:
    """HTTP grounding service.

    Request: ``{"image": <base64 PNG>, "prompt": str}``.
    Response: ``{"top_left": [x, y], "bottom_right": [x, y]}`` or
    ``{"detection": null}``.
    """

    def __init__(self, endpoint: str, api_key_env: str | None = None, timeout: float = 30.0,
                 max_retries: int = 3, backoff: float = 0.5, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)

    def locate(self, image, prompt):
        headers = {}
        if self.api_key_env and os.environ.get(self.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[self.api_key_env]}"
        body = post_json(self.client, self.endpoint, {"image": encode_png_b64(image), "prompt": prompt},
                         headers=headers, attempts=self.max_retries, backoff=self.backoff)
        if body.get("detection", True) is None:
            raise NoDetection(f"nothing found for {prompt!r}")
        try:
            box = BBox.from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed locator response: {body!r}") from exc
        w, h = dims(image)
        if not box.fits(w, h):
            raise NoDetection(f"locator returned {box} outside {w}x{h}")
        return box
