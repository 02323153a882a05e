"""Prompt templates for the three agent stages.

Templates are plain text with ``{name}`` slots filled in a single pass, so
braces inside a question or a retrieved passage are never re-interpreted.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

from ..errors import TemplateError
from ..tools.registry import render_roster

_SLOT = re.compile(r"\{(question|tool_roster|contexts)\}")


def load_template(name: str, override=None) -> str:
    if override is not None:
        return Path(override).read_text(encoding="utf-8").rstrip("\n")
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def fill(template: str, **values: str) -> str:
    return _SLOT.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def _quoted(question: str) -> str:
    # escaped body of a JSON string, for templates that wrap the question in quotes
    return json.dumps(question, ensure_ascii=False)[1:-1]


def check_vqpp_template(template: str) -> None:
    for slot in ("<image>", "{question}"):
        if slot not in template:
            raise TemplateError(f"template lacks the {slot} placeholder")


def build_vqpp_prompt(question: str, template: str | None = None) -> str:
    template = load_template("vqpp") if template is None else template
    check_vqpp_template(template)
    return fill(template, question=_quoted(question), tool_roster=render_roster())


def build_retrieval_prompt(question: str, template: str | None = None) -> str:
    template = load_template("retrieval") if template is None else template
    return fill(template, question=_quoted(question))


def build_answer_prompt(question: str, contexts, templates: dict | None = None) -> str:
    """``contexts`` is a sequence of ``(title, text)`` in retrieval order."""
    templates = templates or {}
    if not contexts:
        tpl = templates.get("answer_no_context") or load_template("answer_no_context")
        return fill(tpl, question=question)
    blocks = [f"Context {i}:\ntitle: {title}\ntext: {text}" for i, (title, text) in enumerate(contexts, 1)]
    tpl = templates.get("answer_with_context") or load_template("answer_with_context")
    return fill(tpl, question=question, contexts="\n\n".join(blocks))


def caption_prompt() -> str:
    return load_template("caption")
