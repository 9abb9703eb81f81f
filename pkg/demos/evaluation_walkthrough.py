"""
Measuring whether one ranker beats another
==========================================

The evaluation harness answers three questions: how often do relevant quotes
land in the top k (rank metrics), is an observed gap between two systems
real or resampling noise (paired bootstrap), and do two score lists agree in
ordering (rank correlation). This script exercises each on small inline data,
then runs the full harness with an automatic judge.
"""

from nqr.backends import LocalChat
from nqr.evaluation import (
    JudgeSpec,
    RankingJudgment,
    hr_at_k,
    mrr_at_k,
    ndcg_at_k,
    paired_bootstrap,
    run_eval,
    spearman,
)
from nqr.kb import ContextRecord, Language, Quotation

# ---------------------------------------------------------------------------
# Rank metrics on a single judged context. The ranking [b, a, c] with only
# `a` relevant hits in the top five (HR 1), at reciprocal rank 1/2 (MRR 0.5),
# and earns the second-position discount 1/log2(3) in nDCG.
# ---------------------------------------------------------------------------

j = RankingJudgment("c1", ("b", "a", "c"), frozenset({"a"}))
print(f"ranked [b, a, c], relevant {{a}}:")
print(f"  HR@5 = {hr_at_k(j):.4f}  MRR@5 = {mrr_at_k(j):.4f}  nDCG@5 = {ndcg_at_k(j):.4f}")

# ---------------------------------------------------------------------------
# Paired bootstrap over per-context metric deltas. Resampling contexts with
# replacement gives a distribution over the mean delta; the middle 95% of it
# is the interval we report. An interval clear of zero marks a real gap.
# ---------------------------------------------------------------------------

deltas = [0.20, 0.00, 0.10, 0.30, -0.10, 0.20, 0.10, 0.00, 0.20, 0.10]
result = paired_bootstrap(deltas, b=2000, seed=42)
print(f"\nmean delta {result.mean_delta:+.3f}, 95% CI [{result.ci_low:+.3f}, {result.ci_high:+.3f}]")
print(f"significant: {result.significant}")

# ---------------------------------------------------------------------------
# Rank correlation with tie handling: tied values share an averaged rank.
# ---------------------------------------------------------------------------

rho = spearman([1.0, 2.0, 2.0, 3.0], [1.0, 3.0, 2.0, 4.0])
print(f"\nspearman([1,2,2,3], [1,3,2,4]) = {rho:.6f}")

# ---------------------------------------------------------------------------
# The full harness. Two toy systems rank the same four-quote corpus for
# three annotated contexts: one always surfaces the relevant quote first,
# the other buries it in third place. A deterministic local judge scores
# every surfaced quote for novelty and match, so the report carries both
# ranking metrics and judged quality, plus a bootstrap comparison.
# ---------------------------------------------------------------------------

kb = {
    q.id: q
    for q in [
        Quotation(id="k1", text="Every harbor was once open sea.",
                  language=Language.EN,
                  deep_meaning="Expresses that safety is built, not found."),
        Quotation(id="k2", text="Patience is a seed that flowers out of season.",
                  language=Language.EN,
                  deep_meaning="Expresses that persistence pays off late."),
        Quotation(id="k3", text="Maps end where the interesting country begins.",
                  language=Language.EN,
                  deep_meaning="Expresses that discovery starts past the known."),
        Quotation(id="k4", text="Rest is the rhyme that makes the work scan.",
                  language=Language.EN,
                  deep_meaning="Expresses that pauses give effort structure."),
    ]
}

contexts = [
    ContextRecord(id="c1", text="On building a safe life slowly.", relevant_ids=frozenset({"k1"})),
    ContextRecord(id="c2", text="On waiting out a slow project.", relevant_ids=frozenset({"k2"})),
    ContextRecord(id="c3", text="On leaving familiar methods behind.", relevant_ids=frozenset({"k3"})),
]

want = {"c1": "k1", "c2": "k2", "c3": "k3"}


def relevant_first(ctx):
    hit = want[ctx.id]
    return [hit] + [k for k in sorted(kb) if k != hit]


def relevant_third(ctx):
    hit = want[ctx.id]
    rest = [k for k in sorted(kb) if k != hit]
    return rest[:2] + [hit] + rest[2:]


report = run_eval(
    systems={"relevant-first": relevant_first, "relevant-third": relevant_third},
    contexts=contexts,
    k=3,
    kb=kb,
    judges=(JudgeSpec(LocalChat()),),
    baseline="relevant-first",
    bootstrap_b=500,
    seed=7,
)
print()
print(report.render_text())
