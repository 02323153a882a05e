"""What a chat-backed agent sends and how its replies are read.

A fake OpenAI-compatible server (an in-process httpx transport) answers the
tool-selection prompt with a messy reply: prose around a fenced JSON block
that also names a tool the toolbox lacks. The parser keeps the valid call,
reports the dropped one, and the restored query is compared against ground
truth.

Pointing ``ChatConfig.endpoint`` at a real server is the only change needed
to use a live model; the key is read from the environment variable named in
``api_key_env``.

    python3 demos/03_chat_agent_wire.py
"""

import json
from pathlib import Path

import httpx
import numpy as np

from refinebench.agent.chat import ChatClient, ChatConfig, propose_operations
from refinebench.corrupt import DistractorPool
from refinebench.tools import execute_trace
from refinebench.triplets import generate, oracle_locator, read_manifest

HERE = Path(__file__).parent
DATA = HERE / "data"


def fake_server(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    text, image = body["messages"][0]["content"]
    print("request model:", body["model"], "| image part:", image["image_url"]["url"][:30] + "...")
    print("prompt ends with:", repr(text["text"][-60:]))
    reply = ("The photo looks upside down, so I would rotate it.\n"
             "```json\n{\"operations\": [{\"tool\": \"rotate\", \"params\": {\"degrees\": 180}}, "
             "{\"tool\": \"sharpen\", \"params\": {}}]}\n```")
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": reply}}]})


def main():
    manifest = generate(DATA / "sources.jsonl", DistractorPool.load(DATA / "pool" / "pool.json"),
                        run_seed=0, out_dir=HERE / "out" / "triplets")
    t = next(t for t in read_manifest(manifest) if t.kind == "rotation")
    print(f"sample {t.sample_id}: oracle says {t.oracle_trace}")

    client = ChatClient(ChatConfig(endpoint="http://fake.local/v1", model="demo-vlm", api_key_env=None),
                        http_client=httpx.Client(transport=httpx.MockTransport(fake_server)))
    decision = propose_operations(client, t.load_query(), t.question)
    print("parse status:", decision.parse_status)
    print("plan:", [op.to_dict() for op in decision.operations])
    for err in decision.errors:
        print("dropped:", err)

    restored, log = execute_trace(t.load_query(), decision.operations, oracle_locator(t))
    match = restored.shape == t.load_gt().shape and np.array_equal(restored, t.load_gt())
    print("restored equals ground truth:", match)


if __name__ == "__main__":
    main()
