#!/usr/bin/env python3
"""Writes the synthetic TEI corpus and its ground truth.

Every paper belongs to one theme. Its design context and implications are
drawn from that theme with a seeded RNG, and each implication sentence is
embedded verbatim in a findings paragraph. The ground truth file is what the
mock provider answers with, so extraction output can be checked exactly.

    python3 tools/fixtures/make_corpus.py tests/data/corpus
"""

import json
import random
import sys
from pathlib import Path
from xml.sax.saxutils import escape

SEED = 20240917
PAPER_COUNT = 50

THEMES = {
    "travel": {
        "target_user": ["frequent business travelers", "budget leisure travelers",
                        "families planning vacations", "older adults booking trips"],
        "domain": ["travel booking", "flight search", "hotel reservations"],
        "modality": ["mobile app", "web app", "mobile web"],
        "pain_point": ["comparing fares across many results", "hidden fees at checkout",
                       "uncertainty about cancellation terms"],
        "client": ["online travel agency", "airline", "hotel chain"],
        "metric": ["booking conversion rate", "checkout abandonment", "time to book"],
        "implications": [
            "Show the total trip price including taxes and fees on every result card.",
            "Let travelers pin two or three fares and compare them side by side.",
            "State cancellation and change terms next to the price before checkout.",
            "Keep search filters visible while scrolling through long result lists.",
            "Surface recent price changes so travelers can judge whether to book now.",
            "Summarize hotel reviews by trip type such as business or family stays.",
        ],
    },
    "fitness": {
        "target_user": ["novice runners", "gym members", "older adults staying active"],
        "domain": ["fitness tracking", "workout planning"],
        "modality": ["wearable and mobile app", "mobile app"],
        "pain_point": ["losing motivation after a few weeks", "unclear progress over time"],
        "client": ["fitness startup", "wearable manufacturer"],
        "metric": ["weekly active users", "workout completion rate"],
        "implications": [
            "Celebrate small streaks to keep novice users returning each week.",
            "Show progress against a personal baseline instead of population norms.",
            "Offer short fallback workouts when a planned session is skipped.",
            "Let users share milestones with a small trusted group rather than publicly.",
        ],
    },
    "health": {
        "target_user": ["patients managing chronic conditions", "caregivers", "clinicians"],
        "domain": ["digital health", "medication management", "telehealth"],
        "modality": ["mobile app", "web portal"],
        "pain_point": ["missed medication doses", "information overload in results"],
        "client": ["hospital network", "health insurer"],
        "metric": ["medication adherence", "portal engagement"],
        "implications": [
            "Explain lab results in plain language next to the clinical values.",
            "Use gentle reminders that adapt to the time a dose is usually taken.",
            "Give caregivers a shared view with clear permission controls.",
            "Show the next required action at the top of the patient dashboard.",
        ],
    },
    "finance": {
        "target_user": ["young adults budgeting", "small business owners", "retirees"],
        "domain": ["personal finance", "mobile banking"],
        "modality": ["mobile app", "web app"],
        "pain_point": ["surprise overdraft fees", "difficulty tracking spending categories"],
        "client": ["retail bank", "fintech startup"],
        "metric": ["monthly savings rate", "feature adoption"],
        "implications": [
            "Warn about upcoming bills before the balance drops below zero.",
            "Group spending into a few editable categories users recognize.",
            "Show the total cost of a transfer including fees before confirmation.",
            "Let users set savings goals with visible progress toward each goal.",
        ],
    },
    "education": {
        "target_user": ["high school students", "adult online learners", "teachers"],
        "domain": ["online learning", "course management"],
        "modality": ["web app", "tablet app"],
        "pain_point": ["dropping out of self-paced courses", "unclear grading criteria"],
        "client": ["university", "edtech company"],
        "metric": ["course completion rate", "assignment submission rate"],
        "implications": [
            "Break long courses into short modules with a visible progress indicator.",
            "Show grading criteria next to each assignment before submission.",
            "Send teachers a summary of students who have fallen behind.",
            "Let learners resume exactly where they stopped on any device.",
        ],
    },
    "shopping": {
        "target_user": ["online shoppers", "shoppers with low vision", "first-time buyers"],
        "domain": ["e-commerce", "online grocery"],
        "modality": ["mobile app", "web app", "mobile web"],
        "pain_point": ["checkout abandonment", "doubts about product quality"],
        "client": ["online retailer", "grocery chain"],
        "metric": ["checkout completion", "cart abandonment"],
        "implications": [
            "Display delivery fees and the order total early in the checkout flow.",
            "Show a step indicator so shoppers know how many checkout steps remain.",
            "Highlight reviews from verified buyers near the purchase button.",
            "Support large text and high contrast without breaking the layout.",
        ],
    },
}

DIMENSIONS = ["target_user", "domain", "modality", "pain_point", "client", "metric"]

# Theme of each paper, in order. Travel is over-represented so the travel
# mockup has a clear top-k.
THEME_PLAN = (["travel"] * 14 + ["fitness"] * 7 + ["health"] * 7 + ["finance"] * 7 +
              ["education"] * 7 + ["shopping"] * 8)

STUDY_KINDS = ["interview study", "field deployment", "controlled experiment",
               "diary study", "survey", "log analysis"]


def paper_context(rng, theme, index):
    spec = THEMES[theme]
    ctx = {}
    for d in DIMENSIONS:
        ctx[d] = rng.choice(spec[d])
    # Most papers leave a dimension or two unstated.
    for d in rng.sample(["client", "metric", "pain_point", "modality"], rng.choice([0, 1, 1, 2])):
        ctx[d] = None
    if index == 49:
        # One paper states no context at all and must stay out of the index.
        ctx = {d: None for d in DIMENSIONS}
    return ctx


def build_paper(rng, index, theme):
    spec = THEMES[theme]
    pid = f"p{index:02d}"
    ctx = paper_context(rng, theme, index)
    study = rng.choice(STUDY_KINDS)
    user = ctx["target_user"] or "participants"
    domain = ctx["domain"] or "everyday software"
    participants = rng.randint(8, 40)
    chosen = rng.sample(spec["implications"], rng.choice([2, 2, 3]))

    title_subject = domain.title() if ctx["domain"] else "Everyday Interfaces"
    title = f"{title_subject} for {user.title()}: A {study.title()} ({pid.upper()})"

    abstract = [
        f"We report a {study} with {participants} {user} on {domain}.",
        f"Findings point to concrete changes for designers of {domain} products.",
    ]
    intro = [
        f"People increasingly rely on {domain} tools, yet {ctx['pain_point'] or 'common problems'} "
        f"remain frequent for {user}.",
    ]
    related = [
        f"Prior work examined {domain} from the perspective of service providers rather than "
        f"{user}.",
    ]
    method = [
        f"We ran a {study} with {participants} participants recruited through local channels. "
        f"Sessions lasted about one hour.",
    ]
    findings = []
    implications = []
    for n, sentence in enumerate(chosen):
        para_id = f"{pid}-f{n}"
        text = (f"Participants repeatedly described friction around this topic. "
                f"{sentence} This pattern held across most sessions.")
        findings.append((para_id, text))
        implications.append({
            "design_implication": sentence,
            "original_paragraph": text,
            "paragraph_key": para_id,
            "rationale": [f"{study} observation", "participant quotes"],
        })
    discussion = [
        f"These results suggest that {domain} designers should treat the needs of {user} as "
        f"first-class requirements.",
    ]
    references = [
        f"Author {k}. A study of {domain}. Proceedings of a conference, {2010 + k}."
        for k in range(rng.randint(2, 4))
    ]
    return {
        "paper_id_hint": pid,
        "theme": theme,
        "title": title,
        "context": ctx,
        "implications": implications,
        "tei": render_tei(pid, title, abstract, intro, related, method, findings, discussion,
                          references),
    }


def render_tei(pid, title, abstract, intro, related, method, findings, discussion, references):
    def p(text, xml_id=None):
        attr = f' xml:id="{xml_id}"' if xml_id else ""
        return f"<p{attr}>{escape(text)}</p>"

    def div(n, head, paras):
        body = "\n        ".join(paras)
        return f'<div>\n        <head n="{n}">{escape(head)}</head>\n        {body}\n      </div>'

    bibl = "\n          ".join(
        f"<biblStruct><analytic><title>{escape(r)}</title></analytic></biblStruct>"
        for r in references)
    findings_paras = [p(text, xml_id) for xml_id, text in findings]
    findings_paras.append(
        f"<figure><head>Figure 1.</head><figDesc>Overview of the {escape(pid)} study "
        f"setup.</figDesc></figure>")
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
  <teiHeader>
    <fileDesc>
      <titleStmt>
        <title level="a" type="main">{escape(title)}</title>
      </titleStmt>
    </fileDesc>
    <profileDesc>
      <abstract>
        {"".join(p(a) for a in abstract)}
      </abstract>
    </profileDesc>
  </teiHeader>
  <text>
    <body>
      {div(1, "Introduction", [p(t) for t in intro])}
      {div(2, "Related Work", [p(t) for t in related])}
      {div(3, "Method", [p(t) for t in method])}
      {div(4, "Findings", findings_paras)}
      {div(5, "Discussion", [p(t) for t in discussion])}
    </body>
    <back>
      <div type="references">
        <listBibl>
          {bibl}
        </listBibl>
      </div>
    </back>
  </text>
</TEI>
"""


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/corpus")
    tei_dir = out / "tei"
    tei_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    truth = []
    for i, theme in enumerate(THEME_PLAN[:PAPER_COUNT]):
        paper = build_paper(rng, i, theme)
        (tei_dir / f"{paper['paper_id_hint']}.xml").write_text(paper.pop("tei"), encoding="utf-8")
        truth.append(paper)
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=2, ensure_ascii=False) + "\n",
                                           encoding="utf-8")
    print(f"wrote {len(truth)} papers to {tei_dir}")


if __name__ == "__main__":
    main()
