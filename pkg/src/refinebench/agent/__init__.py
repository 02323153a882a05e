"""Agent bindings: prompts, chat transport, output parsing, scripted agents."""

from .chat import (
    ChatClient,
    ChatConfig,
    call_chat,
    caption,
    decide_retrieval,
    generate_answer,
    propose_operations,
)
from .parse import (
    RetrievalDecision,
    VqppDecision,
    extract_json_object,
    parse_operations,
    parse_retrieval_decision,
)
from .prompts import build_answer_prompt, build_retrieval_prompt, build_vqpp_prompt, load_template
from .scripted import ChatAgent, OracleAgent, PassAgent, RandomAgent, scripted_agents

__all__ = [
    "ChatAgent",
    "ChatClient",
    "ChatConfig",
    "OracleAgent",
    "PassAgent",
    "RandomAgent",
    "RetrievalDecision",
    "VqppDecision",
    "build_answer_prompt",
    "build_retrieval_prompt",
    "build_vqpp_prompt",
    "call_chat",
    "caption",
    "decide_retrieval",
    "extract_json_object",
    "generate_answer",
    "load_template",
    "parse_operations",
    "parse_retrieval_decision",
    "propose_operations",
    "scripted_agents",
]
