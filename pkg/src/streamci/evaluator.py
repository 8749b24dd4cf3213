"""Built-in data-centric functions and the deterministic text classifier.

These are the seed contents of the function zoo: selection, cleaning and
augmentation transforms plus a multinomial naive Bayes train/eval stage.
Every operation here is a pure function of (inputs, params, seed), which
is what makes runs replayable bit-for-bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .core_store import Record
from .errors import ValidationError
from .prng import record_scoped_state, prng_next, unit_float

_TOKEN_RE = re.compile(r"[a-z0-9_]+")

MODEL_NAME = "multinomial_nb"


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on runs of non-[ASCII letter/digit/underscore]."""
    return _TOKEN_RE.findall(text.lower())


# ----------------------------------------------------------------------
# dataset transforms


def builtin_passthrough(inputs, params, seed):
    return list(inputs[0])


def builtin_select_recent(inputs, params, seed):
    """Keep the ceil(keep_fraction * n) newest records."""
    keep_fraction = params["keep_fraction"]
    if not isinstance(keep_fraction, (int, float)) or not 0 < keep_fraction <= 1:
        raise ValidationError("keep_fraction must be in (0, 1]")
    records = sorted(inputs[0], key=lambda r: (-r.timestamp, r.id))
    keep = math.ceil(keep_fraction * len(records))
    return records[:keep]


def builtin_dedup_text(inputs, params, seed):
    """Among records with identical text, keep the smallest (timestamp, id)."""
    best: dict[str, Record] = {}
    for record in inputs[0]:
        current = best.get(record.text)
        if current is None or (record.timestamp, record.id) < (current.timestamp, current.id):
            best[record.text] = record
    return list(best.values())


def builtin_augment_drop(inputs, params, seed):
    """Append one token-dropout copy of each record (id suffixed "+aug").

    Each token of the copy survives independently with probability
    1 - drop_prob, decided by the shared PRNG seeded per record id, so
    the augmentation is a pure function of (input, params, seed).
    """
    drop_prob = params["drop_prob"]
    if not isinstance(drop_prob, (int, float)) or not 0 <= drop_prob < 1:
        raise ValidationError("drop_prob must be in [0, 1)")
    records = list(inputs[0])
    augmented = []
    for record in records:
        state = record_scoped_state(seed, record.id)
        kept = []
        for token in tokenize(record.text):
            value, state = prng_next(state)
            if unit_float(value) >= drop_prob:
                kept.append(token)
        augmented.append(
            Record(
                id=record.id + "+aug",
                timestamp=record.timestamp,
                text=" ".join(kept),
                label=record.label,
            )
        )
    return records + augmented


# ----------------------------------------------------------------------
# multinomial naive Bayes


@dataclass
class TokenCounts:
    """Per-class token frequencies gathered by nb_train."""

    token_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    doc_counts: dict[str, int] = field(default_factory=dict)
    vocab: set[str] = field(default_factory=set)

    def class_total(self, label: str) -> int:
        return sum(self.token_counts.get(label, {}).values())


def nb_train(records: list[Record], alpha: float) -> TokenCounts:
    """Accumulate token counts per class from tokenized record texts."""
    if not isinstance(alpha, (int, float)) or alpha <= 0:
        raise ValidationError("alpha must be > 0")
    counts = TokenCounts()
    for record in records:
        if record.label is None:
            raise ValidationError(f"record {record.id!r} is unlabeled")
        counts.doc_counts[record.label] = counts.doc_counts.get(record.label, 0) + 1
        per_class = counts.token_counts.setdefault(record.label, {})
        for token in tokenize(record.text):
            per_class[token] = per_class.get(token, 0) + 1
            counts.vocab.add(token)
    if len(counts.doc_counts) < 2:
        raise ValidationError("training set must contain at least 2 distinct labels")
    return counts


def nb_log_posteriors(model: TokenCounts, alpha: float, text: str) -> dict[str, float]:
    """Unnormalized log posterior per class, in log space.

    Scores are accumulated with math.fsum (correctly rounded), so they
    are independent of token order and exact posterior ties stay exact
    in float space, leaving the tie-break rule in charge.
    """
    total_docs = sum(model.doc_counts.values())
    vocab_size = len(model.vocab)
    tokens = tokenize(text)
    scores = {}
    for label in sorted(model.doc_counts):
        terms = [math.log(model.doc_counts[label] / total_docs)]
        denom = model.class_total(label) + alpha * vocab_size
        if denom > 0:
            per_class = model.token_counts.get(label, {})
            for token in tokens:
                terms.append(math.log((per_class.get(token, 0) + alpha) / denom))
        scores[label] = math.fsum(terms)
    return scores


def nb_predict(model: TokenCounts, alpha: float, text: str) -> str:
    """Argmax class; ties go to the lexicographically smallest label."""
    scores = nb_log_posteriors(model, alpha, text)
    best_label = None
    best_score = -math.inf
    for label in sorted(scores):
        if scores[label] > best_score:
            best_label = label
            best_score = scores[label]
    return best_label


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    n_eval: int
    model_name: str
    hyperparams: dict

    def to_output(self) -> dict:
        return {
            "metrics": {"accuracy": self.accuracy, "macro_f1": self.macro_f1},
            "model_name": self.model_name,
            "hyperparams": dict(self.hyperparams),
            "n_eval": self.n_eval,
        }


def train_eval(train: list[Record], eval_records: list[Record], alpha: float) -> MetricsReport:
    """Train on the first dataset, score accuracy and macro-F1 on the second."""
    if not eval_records:
        raise ValidationError("evaluation dataset is empty")
    for record in eval_records:
        if record.label is None:
            raise ValidationError(f"eval record {record.id!r} is unlabeled")
    model = nb_train(train, alpha)
    predictions = [nb_predict(model, alpha, r.text) for r in eval_records]
    correct = sum(1 for r, p in zip(eval_records, predictions) if r.label == p)
    accuracy = correct / len(eval_records)

    eval_classes = sorted({r.label for r in eval_records})
    f1s = []
    for cls in eval_classes:
        tp = sum(1 for r, p in zip(eval_records, predictions) if r.label == cls and p == cls)
        fp = sum(1 for r, p in zip(eval_records, predictions) if r.label != cls and p == cls)
        fn = sum(1 for r, p in zip(eval_records, predictions) if r.label == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    macro_f1 = sum(f1s) / len(f1s)

    return MetricsReport(
        accuracy=accuracy,
        macro_f1=macro_f1,
        n_eval=len(eval_records),
        model_name=MODEL_NAME,
        hyperparams={"alpha": float(alpha)},
    )


def builtin_train_eval(inputs, params, seed):
    report = train_eval(inputs[0], inputs[1], params["alpha"])
    return report.to_output()


# ----------------------------------------------------------------------
# the builtin catalog


@dataclass(frozen=True)
class BuiltinSpec:
    func: callable
    input_arity: int
    output_kind: str
    param_defaults: dict


BUILTINS: dict[str, BuiltinSpec] = {
    "passthrough": BuiltinSpec(builtin_passthrough, 1, "dataset", {}),
    "select_recent": BuiltinSpec(builtin_select_recent, 1, "dataset", {"keep_fraction": 1.0}),
    "dedup_text": BuiltinSpec(builtin_dedup_text, 1, "dataset", {}),
    "augment_drop": BuiltinSpec(builtin_augment_drop, 1, "dataset", {"drop_prob": 0.1}),
    "train_eval_nb": BuiltinSpec(builtin_train_eval, 2, "metrics", {"alpha": 1.0}),
}
