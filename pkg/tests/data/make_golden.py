#!/usr/bin/env python3
"""Regenerate the lexicon-tracing golden fixtures.

Builds trace_corpus.jsonl, golden_clues.jsonl, and lexicon.json from an
explicit construction plan: every document embeds known clue strings at
known spots, so the expected clue set is written straight from the plan
and never by running the tracer. The plan is sanity-checked with a local
Levenshtein implementation kept independent of the package.

Run from the repository root:  python tests/data/make_golden.py
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

ANCHORS = {
    "statement": "[STATEMENT]",
    "date": "[DATE]",
    "location": "[LOCATION]",
    "process": "[PROCESS]",
}
TEMPLATE_START = "The court finds that:"
TEMPLATE_END = "Sentencing"
THRESHOLD = 0.8

MOTIVATIONS = {
    "robbery": ["greed for quick money", "a sudden violent impulse"],
    "theft": ["quiet opportunism", "greed for quick money"],
    "fraud": ["an elaborate deception scheme", "greed for quick money"],
}
ACTIONS = {
    "robbery": ["forcibly seized the handbag", "threatened the clerk with a knife"],
    "theft": ["secretly took the wallet", "slipped the phone into a coat pocket"],
    "fraud": ["forged a bank transfer order", "fabricated an investment return"],
}
HARMS = {
    "robbery": ["minor bodily injury", "loss of property"],
    "theft": ["loss of property"],
    "fraud": ["serious financial damage", "loss of property"],
}
ARTICLES = {"robbery": "article 263", "theft": "article 264", "fraud": "article 266"}
PRISON = {"robbery": "three to ten years", "theft": "under three years", "fraud": "fine only"}

NAMES = ["Wang", "Li", "Zhang", "Chen", "Liu", "Yang", "Zhao", "Huang", "Zhou", "Wu"]
CITIES = ["Nanshan", "Futian", "Luohu", "Baoan", "Longgang"]

# Per-document plan: (charge, motivation idx, action idx, harm idx, variant)
# variant "fuzzy": the action is planted with one substituted character.
# variant "fallback": no harm term (or close window) appears in the area.
# variant "sections": the record carries an explicit sections object.
PLAN = [
    ("robbery", 0, 0, 0, None),
    ("theft", 0, 0, 0, None),
    ("fraud", 0, 0, 0, None),
    ("robbery", 1, 1, 1, None),
    ("theft", 1, 1, 0, None),
    ("fraud", 1, 1, 1, None),
    ("robbery", 0, 1, 1, "sections"),
    ("theft", 0, 1, 0, None),
    ("fraud", 0, 1, 0, None),
    ("robbery", 1, 0, 0, None),
    ("theft", 1, 0, 0, "sections"),
    ("fraud", 1, 0, 1, None),
    ("robbery", 0, 0, 1, None),
    ("theft", 0, 1, 0, None),
    ("fraud", 1, 1, 0, "sections"),
    ("robbery", 1, 1, 0, None),
    ("theft", 1, 0, 0, "fuzzy"),
    ("fraud", 0, 0, 1, None),
    ("robbery", 0, 1, 0, "fallback"),
    ("theft", 0, 0, 0, None),
]


def levenshtein(a, b):
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def substitute_one(text, index, replacement):
    assert text[index] != replacement
    return text[:index] + replacement + text[index + 1 :]


def all_terms(table):
    seen = []
    for terms in table.values():
        for term in terms:
            if term not in seen:
                seen.append(term)
    return seen


def best_window_score(area, term):
    best = 0.0
    for width in range(max(1, len(term) - 2), min(len(area), len(term) + 2) + 1):
        for start in range(0, len(area) - width + 1):
            window = area[start : start + width]
            score = 1.0 - levenshtein(window, term) / max(len(window), len(term))
            best = max(best, score)
    return best


def main():
    lexicon = {
        "motivation": all_terms(MOTIVATIONS),
        "action": all_terms(ACTIONS),
        "harm": all_terms(HARMS),
        "templates": [{"start": TEMPLATE_START, "end": TEMPLATE_END}],
        "sections": ANCHORS,
    }

    corpus_lines = []
    golden_lines = []
    for doc_no, (charge, mi, ai, hi, variant) in enumerate(PLAN):
        doc_id = f"trace-{doc_no:03d}"
        name = NAMES[doc_no % len(NAMES)]
        city = CITIES[doc_no % len(CITIES)]
        motivation = MOTIVATIONS[charge][mi]
        action = ACTIONS[charge][ai]
        harm = HARMS[charge][hi]
        provenance = {"motivation": "exact", "action": "exact", "harm": "exact"}

        planted_action = action
        if variant == "fuzzy":
            # one substitution in "secretly took the wallet" (24 chars):
            # similarity 1 - 1/24, above 0.9 and unique in its area
            planted_action = substitute_one(action, 9, "7")
            provenance["action"] = "fuzzy"
            score = 1.0 - levenshtein(planted_action, action) / max(
                len(planted_action), len(action)
            )
            assert score >= 0.9, score
            for term in lexicon["action"]:
                assert term not in planted_action

        if variant == "fallback":
            area_body = (
                f"motivated by {motivation}, the defendant {planted_action}, "
                "and the court recorded no further findings about consequences."
            )
        else:
            area_body = (
                f"motivated by {motivation}, the defendant {planted_action}, "
                f"causing {harm}."
            )

        statement = f"The people's procuratorate accuses the defendant {name}."
        date = f"On 2017-0{1 + doc_no % 9}-1{doc_no % 10} around noon."
        location = f"Inside a store in {city} district."
        process = (
            f"Upon review it is established as follows. {TEMPLATE_START} "
            f"{area_body} {TEMPLATE_END} shall follow the applicable provisions."
        )

        expected = {
            "motivation": motivation,
            "action": planted_action,
            "harm": harm,
        }
        if variant == "fallback":
            expected["harm"] = area_body
            provenance["harm"] = "fallback_area"
            # the plan guarantees nothing harm-like sits in this area
            for term in lexicon["harm"]:
                assert term not in area_body
                assert best_window_score(area_body, term) < THRESHOLD, term

        # exact plants must occur verbatim, and earlier-starting lexicon
        # terms must not shadow them
        area = area_body
        for field, value in expected.items():
            if provenance[field] == "exact":
                assert area.count(value) == 1, (doc_id, field)
                starts = [
                    (area.find(t), -len(t))
                    for t in lexicon[field]
                    if area.find(t) >= 0
                ]
                assert min(starts) == (area.find(value), -len(value)), (doc_id, field)

        record = {"id": doc_id, "fact": ""}
        fact = (
            f"{ANCHORS['statement']} {statement} {ANCHORS['date']} {date} "
            f"{ANCHORS['location']} {location} {ANCHORS['process']} {process}"
        )
        record["fact"] = fact
        if variant == "sections":
            record["sections"] = {
                "statement": statement,
                "date": date,
                "location": location,
                "process": process,
            }
        record["labels"] = {
            "imprisonment": PRISON[charge],
            "charge": charge,
            "article": ARTICLES[charge],
        }
        corpus_lines.append(json.dumps(record, ensure_ascii=False))
        golden_lines.append(
            json.dumps(
                {
                    "id": doc_id,
                    "motivation": expected["motivation"],
                    "action": expected["action"],
                    "harm": expected["harm"],
                    "provenance": provenance,
                },
                ensure_ascii=False,
            )
        )

    with open(os.path.join(HERE, "lexicon.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(lexicon, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    with open(os.path.join(HERE, "trace_corpus.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(corpus_lines) + "\n")
    with open(os.path.join(HERE, "golden_clues.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(golden_lines) + "\n")
    print(f"wrote {len(corpus_lines)} documents")


if __name__ == "__main__":
    main()
