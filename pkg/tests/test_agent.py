from __future__ import annotations

import json
from pathlib import Path

import httpx
import numpy as np
import pytest

from refinebench.agent import (
    ChatAgent,
    ChatClient,
    ChatConfig,
    OracleAgent,
    PassAgent,
    RandomAgent,
    build_answer_prompt,
    build_retrieval_prompt,
    build_vqpp_prompt,
    decide_retrieval,
    extract_json_object,
    generate_answer,
    parse_operations,
    parse_retrieval_decision,
    scripted_agents,
)
from refinebench.errors import ServiceError, ServiceTimeout, TemplateError
from refinebench.tools import TOOLS, ToolCall, render_roster, validate_call

GOLDEN = Path(__file__).parent / "golden"


def test_vqpp_prompt_matches_golden():
    expected = (GOLDEN / "vqpp_who_built_this.txt").read_text(encoding="utf-8").rstrip("\n")
    prompt = build_vqpp_prompt("Who built this?")
    assert prompt == expected
    assert prompt.endswith("Only respond with valid JSON, no other text.")


def test_roster_is_generated_from_the_registry():
    roster = render_roster()
    for i, (name, spec) in enumerate(TOOLS.items(), 1):
        assert f"{i}. {name}\n   - Parameters: {spec.parameters}" in roster


def test_question_is_escaped_not_interpreted():
    p = build_vqpp_prompt('say "hi" {tool_roster} {question}')
    assert '"say \\"hi\\" {tool_roster} {question}"' in p
    assert p.count("1. rotate") == 1


def test_custom_template_needs_placeholders():
    with pytest.raises(TemplateError):
        build_vqpp_prompt("q", template="no slots here")
    assert build_vqpp_prompt("q", template='<image> "{question}"') == '<image> "q"'


def test_retrieval_prompt():
    p = build_retrieval_prompt("Where is it?")
    assert p.startswith('Given this image and the question: "Where is it?"')
    assert '"need_retrieval": true/false' in p


def test_answer_prompts():
    assert "Please answer based on the image." in build_answer_prompt("q", [])
    ctx = [(f"t{i}", f"x{i}") for i in range(1, 6)]
    p = build_answer_prompt("q", ctx)
    assert p.startswith("Reference Context:\nContext 1:\ntitle: t1\ntext: x1\n\nContext 2:")
    positions = [p.index(f"Context {i}:") for i in range(1, 6)]
    assert positions == sorted(positions)
    assert "Context 6" not in p
    braces = build_answer_prompt("q", [("{question}", "{contexts} {x}")])
    assert "title: {question}\ntext: {contexts} {x}" in braces


def test_parse_ok_and_recovered():
    d = parse_operations('{"operations":[{"tool":"flip","params":{"direction":"horizontal"}}]}')
    assert d.operations == [ToolCall("flip", {"direction": "horizontal"})] and d.parse_status == "ok"
    d = parse_operations('{"operations":[{"tool":"rotate","params":{"degrees":45}},{"tool":"deblur"}]}')
    assert d.operations == [ToolCall("deblur", {})] and d.parse_status == "recovered"
    assert "degrees" in d.errors[0]


@pytest.mark.parametrize("raw", [
    'Sure! ```json\n{"operations": [{"tool": "denoise", "params": {}}]}\n``` hope that helps',
    'Here you go: {"operations": [{"tool": "denoise", "params": {}}]} done',
    'noise {"a": {"b" ... then {"operations": [{"tool": "denoise"}]}',
])
def test_parse_finds_embedded_json(raw):
    assert parse_operations(raw).operations == [ToolCall("denoise", {})]


@pytest.mark.parametrize("raw", ["", "no json", b"\xff\xfe", "[1,2]", '{"ops": []}', "{" * 5000, None])
def test_parse_failure_is_pass(raw):
    d = parse_operations(raw)
    assert d.operations == [] and d.parse_status == "failed"


def test_empty_plan_is_ok():
    d = parse_operations('{"operations": []}')
    assert d.operations == [] and d.parse_status == "ok"


def test_retrieval_decision():
    d = parse_retrieval_decision('{"need_retrieval": false, "reason": "visible in image"}')
    assert d.need_retrieval is False and d.reason == "visible in image"
    assert parse_retrieval_decision("maybe?").need_retrieval is True
    assert parse_retrieval_decision('{"need_retrieval": "no"}').parse_status == "failed"


def test_extract_json_object_prefers_whole_string():
    assert extract_json_object('{"a": 1}') == {"a": 1}
    assert extract_json_object("[]") is None


def test_scripted_agents(by_kind, img):
    flip = by_kind["flip"]
    assert OracleAgent().propose(img, "q", flip).operations == flip.oracle_calls()
    assert flip.oracle_calls()[0].name == "flip"
    assert PassAgent().propose(img, "q", flip).operations == []
    a = RandomAgent(5).propose(img, "q", flip).operations
    assert a == RandomAgent(5).propose(img, "q", flip).operations
    assert len(a) == 1 and validate_call(a[0])
    assert set(scripted_agents()) == {"oracle", "pass", "random"}


def test_random_agent_covers_every_tool(triplet_list, img):
    agent = RandomAgent(0)
    seen = set()
    for t in triplet_list:
        for seed in range(4):
            agent.seed = seed
            seen.add(agent.propose(img, "q", t).operations[0].name)
    assert seen == set(TOOLS)


# ---------------------------------------------------------------------------
# chat transport


def _client(handler, **cfg):
    config = ChatConfig(endpoint="http://llm.test/v1", model="m", backoff=0.0, **cfg)
    return ChatClient(config, httpx.Client(transport=httpx.MockTransport(handler)))


def _reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def test_chat_request_shape(monkeypatch):
    seen = []

    def handler(request):
        seen.append((str(request.url), request.headers.get("authorization"), json.loads(request.content)))
        return _reply('{"operations": [{"tool": "rotate", "params": {"degrees": 90}}]}')

    monkeypatch.setenv("OPENAI_API_KEY", "k")
    agent = ChatAgent(_client(handler))
    d = agent.propose(np.zeros((4, 4, 3), np.uint8), "What?", None)
    assert d.operations == [ToolCall("rotate", {"degrees": 90})]
    url, auth, body = seen[0]
    assert url == "http://llm.test/v1/chat/completions" and auth == "Bearer k"
    assert body["model"] == "m" and body["temperature"] == 0.0
    parts = body["messages"][0]["content"]
    assert parts[0]["type"] == "text" and parts[0]["text"].startswith("Given this image")
    assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_chat_retries_429_then_succeeds():
    replies = iter([httpx.Response(429), _reply('{"need_retrieval": false, "reason": "r"}')])
    d = decide_retrieval(_client(lambda r: next(replies)), None, "q")
    assert d.need_retrieval is False


def test_chat_timeouts_exhaust_retries():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(ServiceTimeout):
        generate_answer(_client(handler, max_retries=2), None, "q", [])
    assert len(calls) == 3


def test_chat_bad_shape_and_client_error():
    with pytest.raises(ServiceError):
        generate_answer(_client(lambda r: httpx.Response(200, json={"x": 1})), None, "q", [])
    with pytest.raises(ServiceError):
        generate_answer(_client(lambda r: httpx.Response(401, text="nope")), None, "q", [])


def test_chat_config_validation():
    with pytest.raises(ValueError):
        ChatConfig(endpoint="http://x", model="m", temperature=-1)
    assert ChatConfig(endpoint="http://x/chat/completions/", model="m").url == "http://x/chat/completions"
