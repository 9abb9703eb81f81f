"""Evaluation harness.

Ranking metrics over annotated contexts, paired bootstrap significance,
Spearman rank correlation, and a chat-based judge that scores recommended
quotes on novelty and semantic matching.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .backends.base import ChatBackend
from .errors import ValidationError
from .kb import ContextRecord, Quotation

__all__ = [
    "RankingJudgment",
    "BootstrapResult",
    "JudgeScore",
    "JudgeSpec",
    "SystemResult",
    "EvalReport",
    "JUDGE_DIMENSIONS",
    "LAMBDA_SWEEP",
    "hr_at_k",
    "ndcg_at_k",
    "mrr_at_k",
    "paired_bootstrap",
    "spearman",
    "parse_judge_response",
    "judge",
    "run_eval",
]

logger = logging.getLogger(__name__)

JUDGE_DIMENSIONS = ("matching", "novelty")

# weight combinations exercised by the reranking sweep, as
# (lambda_n, lambda_p, lambda_m)
LAMBDA_SWEEP = (
    (1.00, 0.00, 0.00),
    (0.70, 0.30, 0.00),
    (0.50, 0.50, 0.00),
    (0.70, 0.00, 0.30),
    (0.70, 0.15, 0.15),
    (0.70, 0.20, 0.10),
    (0.50, 0.25, 0.25),
)

_DEFAULT_PROMPT_DIR = Path(__file__).parent / "prompts"


# ---------------------------------------------------------------------------
# ranking metrics


@dataclass(frozen=True)
class RankingJudgment:
    """One system's ranked output for one context, plus the ground truth."""

    context_id: str
    ranked_ids: tuple[str, ...]
    relevant_ids: frozenset[str]

    def validate(self) -> None:
        if len(self.ranked_ids) < 1:
            raise ValidationError(f"context {self.context_id!r}: ranked_ids must be non-empty")
        if len(set(self.ranked_ids)) != len(self.ranked_ids):
            raise ValidationError(f"context {self.context_id!r}: ranked_ids must be distinct")


def _check_k(k: int) -> None:
    if k < 1:
        raise ValidationError("k must be >= 1")


def _warn_if_empty(j: RankingJudgment) -> bool:
    if not j.relevant_ids:
        logger.warning("context %r has an empty relevant set; metric is 0", j.context_id)
        return True
    return False


def hr_at_k(j: RankingJudgment, k: int = 5) -> float:
    """1.0 when any relevant id appears in the top k, else 0.0."""
    _check_k(k)
    j.validate()
    if _warn_if_empty(j):
        return 0.0
    return 1.0 if any(q in j.relevant_ids for q in j.ranked_ids[:k]) else 0.0


def mrr_at_k(j: RankingJudgment, k: int = 5) -> float:
    """Reciprocal rank of the first relevant id in the top k, else 0.0."""
    _check_k(k)
    j.validate()
    if _warn_if_empty(j):
        return 0.0
    for rank, q in enumerate(j.ranked_ids[:k], start=1):
        if q in j.relevant_ids:
            return 1.0 / rank
    return 0.0


def ndcg_at_k(j: RankingJudgment, k: int = 5) -> float:
    """Binary-gain nDCG with a 1/log2(rank+1) discount."""
    _check_k(k)
    j.validate()
    if _warn_if_empty(j):
        return 0.0
    dcg = 0.0
    for rank, q in enumerate(j.ranked_ids[:k], start=1):
        if q in j.relevant_ids:
            dcg += 1.0 / np.log2(rank + 1)
    ideal_hits = min(k, len(j.relevant_ids))
    idcg = sum(1.0 / np.log2(rank + 1) for rank in range(1, ideal_hits + 1))
    return float(dcg / idcg)


# ---------------------------------------------------------------------------
# significance and correlation


@dataclass(frozen=True)
class BootstrapResult:
    mean_delta: float
    ci_low: float
    ci_high: float
    replicates: int
    significant: bool

    def validate(self) -> None:
        if self.ci_low > self.ci_high:
            raise ValidationError("bootstrap CI bounds are out of order")
        tol = 1e-9 + 1e-9 * abs(self.mean_delta)
        if not (self.ci_low - tol <= self.mean_delta <= self.ci_high + tol):
            raise ValidationError("bootstrap mean falls outside its own CI")

    def to_json(self) -> dict:
        return {
            "mean_delta": self.mean_delta,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicates": self.replicates,
            "significant": self.significant,
        }


def paired_bootstrap(
    d: Sequence[float], b: int = 1000, conf: float = 0.95, seed: int = 0
) -> BootstrapResult:
    """Percentile bootstrap CI for the mean of paired per-context deltas."""
    arr = np.asarray(d, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValidationError("paired bootstrap needs at least 2 paired deltas")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("deltas must be finite")
    if b < 1:
        raise ValidationError("replicate count must be >= 1")
    if not 0.0 < conf < 1.0:
        raise ValidationError("conf must be in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(b, arr.size))
    replicate_means = arr[idx].mean(axis=1)
    lo_pct = 100.0 * (1.0 - conf) / 2.0
    lo, hi = np.percentile(replicate_means, [lo_pct, 100.0 - lo_pct])
    result = BootstrapResult(
        mean_delta=float(arr.mean()),
        ci_low=float(lo),
        ci_high=float(hi),
        replicates=b,
        significant=bool(lo > 0.0 or hi < 0.0),
    )
    result.validate()
    return result


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Rank correlation with average ranks for ties."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("inputs must be equal-length 1-d sequences")
    if x.size < 3:
        raise ValidationError("spearman needs at least 3 pairs")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0.0:
        raise ValidationError("spearman undefined for a constant sequence")
    return float((rx * ry).sum() / denom)


# ---------------------------------------------------------------------------
# LLM-as-judge


@dataclass(frozen=True)
class JudgeScore:
    """One judged quote. score is None when the judge output never parsed."""

    dimension: str
    score: float | None
    reason: str
    judge_model: str
    temperature: float

    def validate(self) -> None:
        if self.dimension not in JUDGE_DIMENSIONS:
            raise ValidationError(f"unknown judge dimension {self.dimension!r}")
        if self.score is not None and not 1.0 <= self.score <= 5.0:
            raise ValidationError("judge score must lie in [1, 5]")


def _strip_fences(text: str) -> str:
    t = text.strip()
    m = re.match(r"^```[A-Za-z]*\s*\n(.*?)\n?\s*```$", t, flags=re.DOTALL)
    return m.group(1) if m else t


def parse_judge_response(text: str, dimension: str) -> tuple[int, str]:
    """Extract (score, reason) from a judge reply; raises when unusable.

    Primary path is YAML with a top-level dimension block; a regex fallback
    covers replies where an unquoted reason breaks the YAML parse.
    """
    if dimension not in JUDGE_DIMENSIONS:
        raise ValidationError(f"unknown judge dimension {dimension!r}")
    body = _strip_fences(text)
    score = None
    reason = None
    try:
        obj = yaml.safe_load(body)
    except yaml.YAMLError:
        obj = None
    if isinstance(obj, dict):
        block = obj.get(dimension)
        if isinstance(block, dict):
            score = block.get("score")
            reason = block.get("reason")
    if score is None:
        m = re.search(r"score\s*:\s*(-?\d+)\b", body)
        if m:
            score = int(m.group(1))
    if reason is None:
        m = re.search(r"reason\s*:\s*(.+)", body)
        if m:
            reason = m.group(1).strip().strip('"')
    if isinstance(score, str) and score.strip().lstrip("-").isdigit():
        score = int(score.strip())
    if isinstance(score, bool) or not isinstance(score, int):
        raise ValidationError(f"no integer {dimension} score found")
    if not 1 <= score <= 5:
        raise ValidationError(f"{dimension} score {score} outside 1..5")
    return score, str(reason or "").strip()


def judge(
    context: str,
    quote: str,
    deep_meaning: str,
    dimension: str,
    chat: ChatBackend,
    temperature: float = 0.0,
    samples: int = 1,
    prompt_dir: str | Path | None = None,
) -> JudgeScore:
    """Score one quote against one context on a single dimension.

    Each sample gets up to two re-prompts on unparseable output. A sample
    that still fails is dropped; when every sample fails the returned score
    is None (an invalid judgment, excluded from aggregates).
    """
    if dimension not in JUDGE_DIMENSIONS:
        raise ValidationError(f"unknown judge dimension {dimension!r}")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    prompt_dir = Path(prompt_dir) if prompt_dir else _DEFAULT_PROMPT_DIR
    template = (prompt_dir / f"judge_{dimension}.txt").read_text(encoding="utf-8")
    prompt = template
    for key, value in (("context", context), ("quote", quote), ("deep_meaning", deep_meaning)):
        prompt = prompt.replace("{" + key + "}", value)

    scores: list[int] = []
    first_reason = ""
    for sample_no in range(samples):
        for _attempt in range(3):
            reply = chat.chat(prompt, temperature=temperature, seed=sample_no)
            try:
                score, reason = parse_judge_response(reply, dimension)
            except ValidationError:
                continue
            scores.append(score)
            if not first_reason:
                first_reason = reason
            break
        else:
            logger.warning("judge output unparseable after re-prompts (%s)", dimension)
    if not scores:
        return JudgeScore(dimension, None, "", chat.name, temperature)
    result = JudgeScore(
        dimension=dimension,
        score=float(np.mean(scores)),
        reason=first_reason,
        judge_model=chat.name,
        temperature=temperature,
    )
    result.validate()
    return result


# ---------------------------------------------------------------------------
# end-to-end report


@dataclass(frozen=True)
class JudgeSpec:
    """One judge column: a chat backend plus its sampling settings."""

    chat: ChatBackend
    temperature: float = 0.0
    samples: int = 1
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.chat.name


@dataclass
class SystemResult:
    name: str
    hr: float | None = None
    ndcg: float | None = None
    mrr: float | None = None
    novelty: float | None = None
    matching: float | None = None
    invalid_judgments: int = 0
    per_context_hr: list[float] = field(default_factory=list)
    per_context_ndcg: list[float] = field(default_factory=list)
    per_context_mrr: list[float] = field(default_factory=list)

    @property
    def avg(self) -> float | None:
        if self.novelty is None or self.matching is None:
            return None
        return (self.novelty + self.matching) / 2.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "novelty": self.novelty,
            "matching": self.matching,
            "avg": self.avg,
            "hr": self.hr,
            "ndcg": self.ndcg,
            "mrr": self.mrr,
            "invalid_judgments": self.invalid_judgments,
        }


@dataclass
class EvalReport:
    k: int
    systems: list[SystemResult]
    baseline: str | None
    bootstrap: dict[str, dict[str, BootstrapResult]]
    judged_contexts: int
    ranked_contexts: int

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "baseline": self.baseline,
            "ranked_contexts": self.ranked_contexts,
            "judged_contexts": self.judged_contexts,
            "systems": [s.to_json() for s in self.systems],
            "bootstrap": {
                name: {metric: r.to_json() for metric, r in rows.items()}
                for name, rows in self.bootstrap.items()
            },
        }

    def render_text(self) -> str:
        def fmt(value: float | None, digits: int) -> str:
            return "-" if value is None else f"{value:.{digits}f}"

        headers = ["System", "Novelty", "Match", "Avg", f"HR@{self.k}", f"nDCG@{self.k}", f"MRR@{self.k}"]
        rows = []
        for s in self.systems:
            rows.append(
                [
                    s.name,
                    fmt(s.novelty, 2),
                    fmt(s.matching, 2),
                    fmt(s.avg, 3),
                    fmt(s.hr, 4),
                    fmt(s.ndcg, 4),
                    fmt(s.mrr, 4),
                ]
            )
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
        lines = []
        lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
        lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
        for r in rows:
            lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))).rstrip())
        if self.bootstrap:
            lines.append("")
            lines.append(f"Paired bootstrap vs {self.baseline} (95% CI):")
            for name, rows_by_metric in self.bootstrap.items():
                for metric, res in rows_by_metric.items():
                    marker = " *" if res.significant else ""
                    lines.append(
                        f"  {name} {metric}: delta={res.mean_delta:+.4f}"
                        f" CI=[{res.ci_low:+.4f}, {res.ci_high:+.4f}]{marker}"
                    )
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / "report.json"
        text_path = out / "report.txt"
        json_path.write_text(
            json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        text_path.write_text(self.render_text(), encoding="utf-8")
        return json_path, text_path


def run_eval(
    systems: Mapping[str, Callable[[ContextRecord], Sequence[str]]],
    contexts: Sequence[ContextRecord],
    k: int = 5,
    kb: Mapping[str, Quotation] | None = None,
    judges: Sequence[JudgeSpec] = (),
    baseline: str | None = None,
    bootstrap_b: int = 1000,
    seed: int = 0,
    prompt_dir: str | Path | None = None,
) -> EvalReport:
    """Run every system over the contexts and assemble the report.

    Rank metrics use only contexts that carry relevant_ids; judge scoring
    covers every context. Bootstrap deltas are paired per context against
    the baseline system (defaults to the first one).
    """
    if not systems:
        raise ValidationError("at least one system is required")
    if not contexts:
        raise ValidationError("at least one context is required")
    _check_k(k)
    if judges and kb is None:
        raise ValidationError("judge scoring needs the KB for quote text and deep meaning")
    names = list(systems.keys())
    if baseline is None:
        baseline = names[0]
    if baseline not in systems:
        raise ValidationError(f"baseline {baseline!r} is not one of the systems")

    ranked_contexts = sum(1 for c in contexts if c.relevant_ids is not None)
    results: list[SystemResult] = []
    for name in names:
        rank_fn = systems[name]
        res = SystemResult(name=name)
        judge_values: dict[str, list[float]] = {d: [] for d in JUDGE_DIMENSIONS}
        for ctx in contexts:
            ranked = tuple(rank_fn(ctx))[:k]
            if ctx.relevant_ids is not None:
                judgment = RankingJudgment(ctx.id, ranked, frozenset(ctx.relevant_ids))
                res.per_context_hr.append(hr_at_k(judgment, k))
                res.per_context_ndcg.append(ndcg_at_k(judgment, k))
                res.per_context_mrr.append(mrr_at_k(judgment, k))
            for spec in judges:
                for qid in ranked:
                    quote = kb[qid]
                    for dim in JUDGE_DIMENSIONS:
                        verdict = judge(
                            ctx.text,
                            quote.text,
                            quote.deep_meaning or "",
                            dim,
                            spec.chat,
                            temperature=spec.temperature,
                            samples=spec.samples,
                            prompt_dir=prompt_dir,
                        )
                        if verdict.score is None:
                            res.invalid_judgments += 1
                        else:
                            judge_values[dim].append(verdict.score)
        if res.per_context_hr:
            res.hr = float(np.mean(res.per_context_hr))
            res.ndcg = float(np.mean(res.per_context_ndcg))
            res.mrr = float(np.mean(res.per_context_mrr))
        if judges:
            if judge_values["novelty"]:
                res.novelty = float(np.mean(judge_values["novelty"]))
            if judge_values["matching"]:
                res.matching = float(np.mean(judge_values["matching"]))
        results.append(res)

    by_name = {r.name: r for r in results}
    base = by_name[baseline]
    bootstrap: dict[str, dict[str, BootstrapResult]] = {}
    if len(base.per_context_hr) >= 2:
        for res in results:
            if res.name == baseline:
                continue
            deltas_by_metric = {
                "hr": np.subtract(res.per_context_hr, base.per_context_hr),
                "ndcg": np.subtract(res.per_context_ndcg, base.per_context_ndcg),
                "mrr": np.subtract(res.per_context_mrr, base.per_context_mrr),
            }
            bootstrap[res.name] = {
                metric: paired_bootstrap(d, b=bootstrap_b, seed=seed)
                for metric, d in deltas_by_metric.items()
            }
    elif len(names) > 1:
        logger.warning("fewer than 2 annotated contexts; skipping bootstrap deltas")

    return EvalReport(
        k=k,
        systems=results,
        baseline=baseline if bootstrap else None,
        bootstrap=bootstrap,
        judged_contexts=len(contexts) if judges else 0,
        ranked_contexts=ranked_contexts,
    )
