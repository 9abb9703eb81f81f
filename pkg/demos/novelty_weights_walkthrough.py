"""
How the novelty score decides which tokens matter
=================================================

A quote is novel where its perplexity trace bends, not where it is merely
high. This script walks the full computation on a tiny hand-made trace, then
shows the failure mode of plain averaging that the weighting exists to fix.
"""

import math

from nqr.backends import ScriptedLm
from nqr.novelty import novelty_token_score, uniform_avg_score

# ---------------------------------------------------------------------------
# A five-token quote whose prior perplexity is flat except for one step up at
# position 4. The scripted backend replays exactly the log-probabilities we
# hand it, so every intermediate value below can be checked by hand.
# ---------------------------------------------------------------------------

ppl = [5.0, 5.0, 5.0, 9.0, 5.0]
r = [2.0, 0.1, 0.1, 1.0, -0.5]  # logp_prior - logp_cond at each position

logp_prior = [-math.log(p) for p in ppl]
logp_cond = [lp - ri for lp, ri in zip(logp_prior, r)]

quote = "the river answers stone slowly"
lm = ScriptedLm(prior={quote: logp_prior}, cond={("ctx", quote): logp_cond})

trace = novelty_token_score("ctx", quote, lm)

print("position  token      ppl     d1      |d2|    D2      w~      r")
for t, token in enumerate(trace.tokens.token_texts):
    print(
        f"{t + 1:>8}  {token:<9} {trace.ppl[t]:6.2f} {trace.delta1[t]:7.2f}"
        f" {trace.delta2_abs[t]:7.2f} {trace.big_delta2[t]:7.3f}"
        f" {trace.w_tilde[t]:7.4f} {trace.r[t]:6.2f}"
    )
print(f"\nweighted novelty score S_N = {trace.s_n:.6f}")

# Positions 1-3 carry zero weight: their curvature is at the minimum of the
# trace. The step at position 4 bends the trace twice (up, then back down),
# so positions 4 and 5 split all of the mass between them.

# ---------------------------------------------------------------------------
# Why not just average r over the quote? Because a single surprising opening
# followed by a predictable tail gets diluted. Quote A below has all of its
# novelty in the head; quote B is mildly novel everywhere.
# ---------------------------------------------------------------------------

T = 11
prior_a = [-math.log(20.0)] + [0.0] * (T - 1)
r_a = [3.0, 1.2] + [0.0] * (T - 2)
prior_b = [0.0] * T
r_b = [0.4] * T

quote_a = "a sudden phrase then ten familiar words follow it closely here"
quote_b = "each word here is slightly unusual but never truly surprising once"
lm = ScriptedLm(
    prior={quote_a: prior_a, quote_b: prior_b},
    cond={
        ("ctx", quote_a): [p - ri for p, ri in zip(prior_a, r_a)],
        ("ctx", quote_b): [p - ri for p, ri in zip(prior_b, r_b)],
    },
)

print("\n            uniform average   curvature weighted")
for name, q in (("head spike", quote_a), ("mild everywhere", quote_b)):
    avg = uniform_avg_score("ctx", q, lm)
    s_n = novelty_token_score("ctx", q, lm).s_n
    print(f"{name:<15} {avg:16.4f} {s_n:20.4f}")

# The averaging baseline prefers B: its flat tail never drags the mean down.
# The curvature weights land on the spike and recover A, which is the quote a
# reader would actually experience as novel.
