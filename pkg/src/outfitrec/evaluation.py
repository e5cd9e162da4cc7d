"""Fashion-compatibility AUC, fill-in-the-blank accuracy and run voting."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from itertools import combinations

import numpy as np

from .compatibility import score_from_reps
from .data import Dataset, FCQuestion, FITBQuestion, filter_questions
from .errors import MetricUndefinedError
from .model import OutfitModel, item_representations
from .tensor import no_grad


def compute_representations(model: OutfitModel, dataset: Dataset,
                            item_ids, chunk: int = 512
                            ) -> dict[str, np.ndarray]:
    """Fused reps for described items, batched; undescribed ids are skipped."""
    ids = [i for i in dict.fromkeys(item_ids) if dataset.items[i].described]
    reps: dict[str, np.ndarray] = {}
    with no_grad():
        for start in range(0, len(ids), chunk):
            part = ids[start:start + chunk]
            regions = np.stack([dataset.items[i].regions for i in part])
            words = np.stack([dataset.items[i].words for i in part])
            out = item_representations(model, regions, words).data
            for i, rep in zip(part, out):
                reps[i] = rep
    return reps


def outfit_score(item_ids, model: OutfitModel, dataset: Dataset,
                 reps: dict[str, np.ndarray]) -> tuple[float | None, int]:
    """Mean pair score over scorable unordered pairs; None if none scorable.

    Returns (score, skipped_pairs) where skipped pairs lack a trained
    type-pair space.
    """
    total, count, skipped = 0.0, 0, 0
    for a, b in combinations(item_ids, 2):
        ta, tb = dataset.items[a].type.name, dataset.items[b].type.name
        if not model.has_space(ta, tb):
            skipped += 1
            continue
        total += score_from_reps(model, ta, reps[a], tb, reps[b])
        count += 1
    if count == 0:
        return None, skipped
    return total / count, skipped


def fc_auc(scores, labels) -> float:
    """ROC AUC via the rank statistic, midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0   # midrank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def fc_scores_and_labels(dataset: Dataset, questions: list[FCQuestion],
                         model: OutfitModel,
                         reps: dict[str, np.ndarray] | None = None
                         ) -> tuple[list[float], list[int], int, int]:
    """Outfit scores for answerable FC questions.

    Returns (scores, labels, unanswerable_count, skipped_pairs).
    """
    if reps is None:
        ids = [i for q in questions for i in q.items]
        reps = compute_representations(model, dataset, ids)
    scores, labels = [], []
    unanswerable, skipped = 0, 0
    for q in questions:
        score, sk = outfit_score(q.items, model, dataset, reps)
        skipped += sk
        if score is None:
            unanswerable += 1
        else:
            scores.append(score)
            labels.append(q.label)
    return scores, labels, unanswerable, skipped


def fitb_answer(question: FITBQuestion, model: OutfitModel, dataset: Dataset,
                reps: dict[str, np.ndarray]
                ) -> tuple[int, np.ndarray] | None:
    """Chosen candidate index plus per-candidate total scores.

    Untrained type pairs are skipped. Returns None when no candidate has a
    single scorable pair. Ties break toward the lowest index.
    """
    totals = np.zeros(len(question.candidates))
    scorable = 0
    for ci, cand in enumerate(question.candidates):
        tc = dataset.items[cand].type.name
        for other in question.partial:
            to = dataset.items[other].type.name
            if not model.has_space(tc, to):
                continue
            totals[ci] += score_from_reps(model, tc, reps[cand], to, reps[other])
            scorable += 1
    if scorable == 0:
        return None
    return int(np.argmax(totals)), totals


def vote(answers: list[int], totals_per_run: list[np.ndarray]) -> int:
    """Majority vote over run answers; ties resolved by the highest summed
    candidate score across tied indices, then by the lowest index."""
    if not answers:
        raise MetricUndefinedError("vote over zero runs")
    n_cand = len(totals_per_run[0])
    counts = np.bincount(answers, minlength=n_cand)
    tied = np.flatnonzero(counts == counts.max())
    if len(tied) == 1:
        return int(tied[0])
    summed = np.sum(totals_per_run, axis=0)
    best = tied[np.argmax(summed[tied])]
    return int(best)


@dataclass
class MetricsReport:
    fc_auc_per_run: list[float] = field(default_factory=list)
    fc_auc_mean: float = float("nan")
    fitb_accuracy_per_run: list[float] = field(default_factory=list)
    fitb_accuracy_mean: float = float("nan")
    fitb_accuracy_vote: float = float("nan")
    fc_total: int = 0
    fc_discarded: int = 0
    fc_unanswerable: int = 0
    fc_answered: int = 0
    fitb_total: int = 0
    fitb_discarded: int = 0
    fitb_unanswerable: int = 0
    fitb_answered: int = 0
    skipped_pairs: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(dataset: Dataset, models: list[OutfitModel]) -> MetricsReport:
    """Per-run FC AUC and FITB accuracy, their means, and voting accuracy.

    All models must share the trained type-pair table (runs of one
    configuration), so discard/unanswerable bookkeeping is common.
    """
    if not models:
        raise MetricUndefinedError("evaluate needs at least one model")
    pair_tables = {tuple(sorted(m.spaces)) for m in models}
    if len(pair_tables) != 1:
        raise MetricUndefinedError(
            "models disagree on trained type pairs; evaluate runs of one "
            "training configuration together")

    fc, fitb, fc_disc, fitb_disc = filter_questions(
        dataset.fc_questions, dataset.fitb_questions, dataset)
    report = MetricsReport(fc_total=len(dataset.fc_questions),
                           fc_discarded=fc_disc,
                           fitb_total=len(dataset.fitb_questions),
                           fitb_discarded=fitb_disc)

    ids = [i for q in fc for i in q.items]
    ids += [i for q in fitb for i in list(q.partial) + list(q.candidates)]

    fitb_outcomes: list[list[tuple[int, np.ndarray] | None]] = []
    for run, model in enumerate(models):
        reps = compute_representations(model, dataset, ids)
        scores, labels, unanswerable, skipped = fc_scores_and_labels(
            dataset, fc, model, reps)
        report.fc_auc_per_run.append(fc_auc(scores, labels))
        outcomes = [fitb_answer(q, model, dataset, reps) for q in fitb]
        fitb_outcomes.append(outcomes)
        answered = [o for o in outcomes if o is not None]
        if not answered:
            raise MetricUndefinedError("no answerable FITB questions")
        correct = sum(1 for q, o in zip(fitb, outcomes)
                      if o is not None and o[0] == q.answer)
        report.fitb_accuracy_per_run.append(correct / len(answered))
        if run == 0:
            report.fc_unanswerable = unanswerable
            report.fc_answered = len(scores)
            report.skipped_pairs = skipped
            report.fitb_unanswerable = sum(1 for o in outcomes if o is None)
            report.fitb_answered = len(answered)

    vote_correct, vote_answered = 0, 0
    for qi, q in enumerate(fitb):
        per_run = [runs[qi] for runs in fitb_outcomes]
        if any(o is None for o in per_run):
            continue
        vote_answered += 1
        choice = vote([o[0] for o in per_run], [o[1] for o in per_run])
        if choice == q.answer:
            vote_correct += 1

    report.fc_auc_mean = float(np.mean(report.fc_auc_per_run))
    report.fitb_accuracy_mean = float(np.mean(report.fitb_accuracy_per_run))
    if vote_answered:
        report.fitb_accuracy_vote = vote_correct / vote_answered
    return report
