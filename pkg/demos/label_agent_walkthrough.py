"""
Labeling a quote: analysis, critique rounds, structured labels
==============================================================

Every quote enters the knowledge base through the same protocol: an analysis
pass proposes a deep meaning, a self-critique loop either accepts it or sends
it back with known issues, and an extraction pass turns the accepted analysis
into filterable labels. This script runs the protocol with the deterministic
local chat backend, then replays a scripted rejection to show the bookkeeping.
"""

from nqr.backends import LocalChat, ScriptedChat
from nqr.kb import Language, Quotation
from nqr.labeling import LabelAgent

# ---------------------------------------------------------------------------
# Three unlabeled quotes. The local chat backend derives deterministic but
# plausible-looking responses from the prompt text itself, so the walkthrough
# needs no network and prints the same thing on every run.
# ---------------------------------------------------------------------------

quotes = [
    Quotation(
        id="d01",
        text="Rivers cut through rock not by power but by persistence.",
        language=Language.EN,
    ),
    Quotation(
        id="d02",
        text="A lantern carried for another lights both roads.",
        language=Language.EN,
    ),
    Quotation(
        id="d03",
        text="灯为别人点亮时，自己的路也亮了。",
        language=Language.ZH,
    ),
]

agent = LabelAgent(LocalChat())

for q in quotes:
    labeled, report = agent.label_quotation(q)
    print(f"--- {q.id}: {q.text}")
    print(f"outcome: {report.outcome} after {report.rounds_used} round(s)")
    print(f"deep meaning: {labeled.deep_meaning}")
    print(f"domains:      {', '.join(labeled.labels.core_domains)}")
    print(f"insights:     {', '.join(labeled.labels.core_insights)}")
    print(f"values:       {', '.join(labeled.labels.core_values)}")
    print(f"tone:         {', '.join(labeled.labels.sentiment_tone)}")
    print()

# ---------------------------------------------------------------------------
# The critique loop is capped at three rounds. A scripted chat lets us pin
# the verdicts: two rejections with named issues, then a final rejection,
# after which the quote is kept but marked rejected and carries the parsed
# failure reasons instead of labels.
# ---------------------------------------------------------------------------

analysis = (
    "1. Analysis Result: <AA>The quote frames generosity as mutual"
    " illumination rather than sacrifice.</AA>\n"
    "2. Deep Meaning: <DM>Expresses that helping another also helps oneself.</DM>"
)
scripted = ScriptedChat(
    [
        analysis,
        "No. The reading is superficial and stays at the image.",
        analysis,
        "No. There is a logical gap between lantern and benefit.",
        analysis,
        "No. The claimed benefit is unsupported by the text.",
    ]
)
stubborn = LabelAgent(scripted)
labeled, report = stubborn.label_quotation(
    Quotation(id="d04", text="A lantern carried for another lights both roads.", language=Language.EN)
)
print(f"--- d04 scripted run")
print(f"outcome: {report.outcome} after {report.rounds_used} round(s)")
print(f"status:  {labeled.label_status.value}, labels kept: {labeled.labels is not None}")
print(f"recorded reasons: {', '.join(report.rejection_reasons)}")
