"""Prompting baselines: the ready/ask/predict loop, direct or ReAct style.

A baseline interview never executes checker code.  The agent re-reads the
full requirement text every call, decides whether it has heard enough
(ready), asks free-form questions until it has, then emits one constrained
boolean-array prediction over all opportunities.  The random agent skips
straight to a coin-flip prediction for floor comparisons.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .dialog import Responder, budget_for
from .gateway import (
    CompletionRequest,
    ConstraintExhausted,
    Gateway,
    Message,
    assistant,
    bool_array_output,
    boolean_output,
    user,
)
from .prompts import (
    ASK_PROMPT,
    ASK_REACT_COT_PROMPT,
    PREDICT_CONSTRAINED_COT_PROMPT,
    PREDICT_PROMPT,
    PREDICT_REASONING_COT_PROMPT,
    READY_COT_PROMPT,
    READY_PROMPT,
    render_example_array,
)
from .synthesis import RequirementDoc

DIRECT = "direct"
REACT = "react"

_QUESTION_MARKER = "Question:"
_ASK_ATTEMPTS = 2


class MalformedEmission(Exception):
    """The model never produced an extractable question."""


@dataclass
class BaselineState:
    history: list[tuple[str, str]] = field(default_factory=list)
    requirements: str = ""
    mode: str = DIRECT

    def __post_init__(self) -> None:
        if self.mode not in (DIRECT, REACT):
            raise ValueError(f"unknown baseline mode {self.mode!r}")


def open_baseline(docs: Iterable[RequirementDoc], mode: str = DIRECT) -> BaselineState:
    ordered = sorted(docs, key=lambda d: d.opportunity_id)
    if not ordered:
        raise ValueError("a baseline run needs at least one requirement")
    return BaselineState(requirements="\n\n".join(d.body for d in ordered), mode=mode)


@dataclass(frozen=True)
class BaselineResult:
    decisions: dict[str, bool]
    turns: int
    warning: bool
    history: tuple[tuple[str, str], ...]


class BaselineAgent:
    """Prompt-only interviewer; ``mode`` picks plain or chain-of-thought."""

    def __init__(self, gateway: Gateway, mode: str = DIRECT, model: str = "default"):
        if mode not in (DIRECT, REACT):
            raise ValueError(f"unknown baseline mode {mode!r}")
        self.gateway = gateway
        self.mode = mode
        self.model = model

    def _messages(self, state: BaselineState, prompt: str) -> tuple[Message, ...]:
        messages: list[Message] = []
        for question, answer in state.history:
            messages.append(assistant(question))
            messages.append(user(answer))
        messages.append(user(prompt))
        return tuple(messages)

    def _request(self, messages: tuple[Message, ...], max_tokens: int) -> CompletionRequest:
        return CompletionRequest(messages, max_tokens=max_tokens, model=self.model)

    # - ready -

    def ready(self, state: BaselineState) -> bool:
        """Has the dialog gathered enough to predict every opportunity?"""
        messages = self._messages(
            state, READY_PROMPT.format(eligibility_requirements=state.requirements)
        )
        if self.mode == REACT:
            reasoning = self.gateway.complete(
                self._request(
                    self._messages(
                        state,
                        READY_COT_PROMPT.format(
                            eligibility_requirements=state.requirements
                        ),
                    ),
                    max_tokens=512,
                )
            )
            messages = messages[:-1] + (assistant(reasoning), messages[-1])
        return self.gateway.complete_constrained(
            self._request(messages, max_tokens=8), boolean_output()
        )

    # - ask -

    def ask(self, state: BaselineState) -> str:
        if self.mode == DIRECT:
            prompt = ASK_PROMPT.format(eligibility_requirements=state.requirements)
            emission = self.gateway.complete(
                self._request(self._messages(state, prompt), max_tokens=256)
            )
            return emission.strip()
        prompt = ASK_REACT_COT_PROMPT.format(eligibility_requirements=state.requirements)
        for _ in range(_ASK_ATTEMPTS):
            emission = self.gateway.complete(
                self._request(self._messages(state, prompt), max_tokens=512)
            )
            marker = emission.rfind(_QUESTION_MARKER)
            if marker >= 0:
                question = emission[marker + len(_QUESTION_MARKER):].strip()
                if question:
                    return question
        raise MalformedEmission("no question after the marker in repeated emissions")

    # - predict -

    def predict(self, state: BaselineState, n: int) -> tuple[list[bool], bool]:
        """Boolean verdict per opportunity; second value flags a fallback
        to all-false after the model never satisfied the array constraint."""
        if n < 1:
            raise ValueError("predict needs at least one opportunity")
        example = render_example_array(n)
        if self.mode == REACT:
            reasoning = self.gateway.complete(
                self._request(
                    self._messages(
                        state,
                        PREDICT_REASONING_COT_PROMPT.format(
                            eligibility_requirements=state.requirements,
                            num_programs=n,
                            example_array=example,
                        ),
                    ),
                    max_tokens=512,
                )
            )
            prompt = PREDICT_CONSTRAINED_COT_PROMPT.format(
                reasoning=reasoning.strip(), num_programs=n, example_array=example
            )
        else:
            prompt = PREDICT_PROMPT.format(
                eligibility_requirements=state.requirements,
                num_programs=n,
                example_array=example,
            )
        request = self._request(self._messages(state, prompt), max_tokens=128)
        try:
            values = self.gateway.complete_constrained(request, bool_array_output(n))
        except ConstraintExhausted:
            return [False] * n, True
        return list(values), False


class RandomAgent:
    """Coin-flip floor: never asks, predicts each opportunity at P(true)=0.5."""

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def ready(self, state: BaselineState) -> bool:
        return True

    def ask(self, state: BaselineState) -> str:
        raise RuntimeError("the random agent never asks")

    def predict(self, state: BaselineState, n: int) -> tuple[list[bool], bool]:
        return [self.rng.random() < 0.5 for _ in range(n)], False


class Agent(Protocol):
    def ready(self, state: BaselineState) -> bool: ...

    def ask(self, state: BaselineState) -> str: ...

    def predict(self, state: BaselineState, n: int) -> tuple[list[bool], bool]: ...


def run_baseline(
    agent: Agent,
    docs: Sequence[RequirementDoc],
    responder: Responder,
) -> BaselineResult:
    """Ask until the agent says ready or the budget runs out, then predict
    once.  The readiness check runs before every question."""
    ordered = sorted(docs, key=lambda d: d.opportunity_id)
    state = open_baseline(ordered, mode=getattr(agent, "mode", DIRECT))
    budget = budget_for(len(ordered))
    turns = 0
    while turns < budget.max_turns and not agent.ready(state):
        question = agent.ask(state)
        state.history.append((question, responder.answer(question)))
        turns += 1
    values, warning = agent.predict(state, len(ordered))
    decisions = {doc.opportunity_id: value for doc, value in zip(ordered, values)}
    return BaselineResult(decisions, turns, warning, tuple(state.history))
