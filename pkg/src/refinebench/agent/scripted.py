"""Agents that choose a refinement plan.

Every agent exposes ``propose(image, question, triplet) -> VqppDecision``.
"""

from __future__ import annotations

from ..raster import derive_seed, dims, make_rng
from ..tools.registry import FLIP_DIRECTIONS, ROTATE_DEGREES, TOOL_NAMES, ToolCall
from .chat import ChatClient, propose_operations
from .parse import VqppDecision

LOCATE_PROMPTS = ("the main object", "the screen", "the watermark text", "the overlaid object")


class OracleAgent:
    """Emits the triplet's recorded inverse trace."""

    name = "oracle"

    def propose(self, image, question, triplet):
        ops = [ToolCall.from_dict(d) for d in triplet.oracle_trace]
        return VqppDecision(ops, raw_response="<oracle>")


class PassAgent:
    name = "pass"

    def propose(self, image, question, triplet):
        return VqppDecision([], raw_response="<pass>")


class RandomAgent:
    """One uniformly chosen, schema-valid call per sample, seeded by sample id."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def sample_call(self, rng, width: int, height: int) -> ToolCall:
        tool = TOOL_NAMES[int(rng.integers(len(TOOL_NAMES)))]
        if tool == "rotate":
            return ToolCall(tool, {"degrees": ROTATE_DEGREES[int(rng.integers(3))]})
        if tool == "flip":
            return ToolCall(tool, {"direction": FLIP_DIRECTIONS[int(rng.integers(3))]})
        if tool == "lum":
            return ToolCall(tool, {"factor": float(rng.uniform(0.25, 4.0))})
        if tool == "locate":
            return ToolCall(tool, {"prompt": LOCATE_PROMPTS[int(rng.integers(len(LOCATE_PROMPTS)))]})
        if tool in ("crop", "fill"):
            xs = sorted(int(v) for v in rng.choice(width + 1, size=2, replace=False))
            ys = sorted(int(v) for v in rng.choice(height + 1, size=2, replace=False))
            return ToolCall(tool, {"bbox": {"top_left": [xs[0], ys[0]], "bottom_right": [xs[1], ys[1]]}})
        return ToolCall(tool, {})

    def propose(self, image, question, triplet):
        rng = make_rng(derive_seed(self.seed, "random-agent", triplet.sample_id))
        w, h = dims(image)
        return VqppDecision([self.sample_call(rng, w, h)], raw_response="<random>")


class ChatAgent:
    def __init__(self, client: ChatClient, template: str | None = None, name: str = "chat"):
        self.client = client
        self.template = template
        self.name = name

    def propose(self, image, question, triplet):
        return propose_operations(self.client, image, question, self.template)


def scripted_agents(seed: int = 0) -> dict:
    return {"oracle": OracleAgent(), "pass": PassAgent(), "random": RandomAgent(seed)}
