"""Synthetic story worlds: generation, belief labels, plausibility and scoring."""

import json

from . import _core
from ._core import (
    Contradiction,
    Error,
    GenerationExhausted,
    InvalidConfig,
    NoInjectionSite,
    ParseError,
    PreconditionViolation,
    SessionNotFound,
    SignatureOverlap,
    Unanswerable,
    UnknownEntity,
    UnresolvedId,
)

__all__ = [
    "Contradiction",
    "Error",
    "GenerationExhausted",
    "InvalidConfig",
    "NoInjectionSite",
    "ParseError",
    "PreconditionViolation",
    "SessionNotFound",
    "SignatureOverlap",
    "Unanswerable",
    "UnknownEntity",
    "UnresolvedId",
    "Sessions",
    "annotate",
    "answer",
    "compose",
    "concurrence",
    "detect_conflict",
    "generate",
    "inject",
    "sample_story",
    "score",
    "score_breakpoints",
    "to_babi",
]


def _dump(value):
    return value if isinstance(value, str) else json.dumps(value)


def _jsonl(rows):
    if isinstance(rows, str):
        return rows
    return "".join(json.dumps(r) + "\n" for r in rows)


def _rows(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def sample_story(spec, seed):
    return json.loads(_core.sample_story(_dump(spec), seed))


def generate(spec, n, seed, id_prefix="s", threads=1):
    return _rows(_core.generate(_dump(spec), n, seed, id_prefix, threads))


def compose(train_specs, test_specs, mode, train_size, test_size, seed, threads=1):
    """Returns (train, test) story lists; mode is "iid" or "compositional"."""
    train, test = _core.compose(
        _dump(train_specs), _dump(test_specs), mode, train_size, test_size, seed, threads
    )
    return _rows(train), _rows(test)


def answer(story, question):
    """question: {"qtype", "position", "query"} as found in story["questions"]."""
    return json.loads(_core.answer(_dump(story), _dump(question)))


def to_babi(stories):
    return _core.to_babi(_jsonl(stories))


def annotate(story):
    return json.loads(_core.annotate(_dump(story)))


def inject(story, seed):
    return json.loads(_core.inject(_dump(story), seed))


def detect_conflict(sentences, entities):
    return json.loads(_core.detect_conflict(list(sentences), _dump(entities)))


def score(dataset, predictions):
    return json.loads(_core.score(_jsonl(dataset), _jsonl(predictions)))


def score_breakpoints(gold, predicted):
    return json.loads(_core.score_breakpoints(_jsonl(gold), _jsonl(predicted)))


def concurrence(a, b, method="kendall"):
    return _core.concurrence(list(a), list(b), method)


class Sessions:
    """Annotation sessions; with data_dir every step is logged and recovered on restart."""

    def __init__(self, data_dir=None):
        self._manager = _core.SessionManager(None if data_dir is None else str(data_dir))

    def create(self, config):
        return self._manager.create(_dump(config))

    def execute(self, session_id, text, segment=None):
        return json.loads(self._manager.execute(session_id, text, segment))

    def state(self, session_id):
        return json.loads(self._manager.state(session_id))

    def legal(self, session_id):
        return json.loads(self._manager.legal(session_id))

    def export(self, session_id, fmt="trace-jsonl"):
        return self._manager.export(session_id, fmt)

    def ids(self):
        return list(self._manager.ids())

    @property
    def recovered(self):
        return self._manager.recovered
