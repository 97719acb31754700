#!/usr/bin/env python3
"""Regenerates the small example dataset under data/."""

import csv
import json
import random
from pathlib import Path

root = Path(__file__).resolve().parent.parent / "data"
rng = random.Random(7)

spec = {
    "fields": [
        {"name": "Gender", "type": "categorical", "levels": ["Female", "Male", "Nonbinary"], "probs": [0.48, 0.48, 0.04]},
        {"name": "Age", "type": "normal", "mean": 40, "std": 12, "allowed_range": [18, 80]},
        {"name": "Race", "type": "categorical", "levels": ["Asian", "Black", "Hispanic", "White", "Other"],
         "probs": [0.1, 0.13, 0.17, 0.55, 0.05]},
        {"name": "Occupation", "type": "categorical", "levels": ["Student", "Employed", "Retired", "Unemployed"],
         "probs": [0.2, 0.6, 0.12, 0.08]},
        {"name": "Education", "type": "categorical", "levels": ["HighSchool", "Bachelor", "Master", "Doctorate"],
         "probs": [0.35, 0.4, 0.2, 0.05]},
    ]
}

comments = [
    "You people never understand anything about how this works.",
    "That was a pretty dumb move, but I get why you did it.",
    "Thanks for the thoughtful reply, I learned something today.",
    "Nobody asked for your opinion, go away.",
    "This recipe is terrible and whoever wrote it should stop cooking.",
    "Honestly the referee was blind tonight.",
    "Only an idiot would vote for that proposal.",
    "Great photo, the colours are amazing.",
]
problems = []
for k, text in enumerate(comments):
    problems.append({
        "id": f"off{k + 1:02d}",
        "description": f"How offensive is the following comment? \"{text}\"",
        "requirements": "Answer with a single number from 1 (not offensive) to 5 (very offensive).",
        "context": "Online discussion forum moderation.",
        "scale": {"kind": "ordinal", "levels": [1, 2, 3, 4, 5]},
    })
for k, item in enumerate(["a public park next to the station", "a four-day school week"]):
    problems.append({
        "id": f"rate{k + 1:02d}",
        "description": f"How strongly do you support {item}?",
        "requirements": "Answer with one number between 0 and 10.",
        "context": "Community planning survey.",
        "scale": {"kind": "continuous", "lo": 0, "hi": 10},
    })
choices = []
for k, q in enumerate(["Which policy should the city fund first: 1 parks, 2 transit, 3 housing?",
                       "Which meeting time works best: 1 morning, 2 afternoon, 3 evening?"]):
    choices.append({
        "id": f"pick{k + 1:02d}",
        "description": q,
        "requirements": "Answer with the number of one alternative.",
        "context": "Community planning survey.",
        "scale": {"kind": "choice", "m": 3},
    })


def draw(field):
    if field["type"] == "categorical":
        return rng.choices(field["levels"], weights=field["probs"])[0]
    lo, hi = field["allowed_range"]
    while True:
        v = round(rng.gauss(field["mean"], field["std"]))
        if lo <= v <= hi:
            return v


profiles = [{"participant_id": f"p{i + 1:03d}", "profile": {f["name"]: draw(f) for f in spec["fields"]}}
            for i in range(16)]

base = {"off01": 3, "off02": 2.5, "off03": 1, "off04": 3.5, "off05": 3, "off06": 2, "off07": 4, "off08": 1,
        "rate01": 6.5, "rate02": 3.5}
rows = []
for person in profiles:
    prof = person["profile"]
    lean = (0.6 if prof["Gender"] == "Female" else -0.2) + (0.4 if prof["Age"] > 50 else 0.0)
    for prob in rng.sample(problems, 7):
        pid = prob["id"]
        if prob["scale"]["kind"] == "ordinal":
            v = min(5, max(1, round(base[pid] + lean + rng.gauss(0, 0.7))))
        else:
            v = round(min(10, max(0, base[pid] + 1.5 * lean + rng.gauss(0, 1))), 1)
        rows.append((person["participant_id"], pid, v))
choice_rows = []
for person in profiles:
    older = person["profile"]["Age"] > 45
    for prob in choices:
        v = rng.choices([1, 2, 3], weights=[3, 2, 1] if older else [1, 2, 3])[0]
        choice_rows.append((person["participant_id"], prob["id"], v))

root.mkdir(exist_ok=True)
(root / "profile_spec.json").write_text(json.dumps(spec, indent=2) + "\n")
with open(root / "problems.jsonl", "w") as f:
    for p in problems:
        f.write(json.dumps(p) + "\n")
with open(root / "profiles.jsonl", "w") as f:
    for p in profiles:
        f.write(json.dumps(p) + "\n")
with open(root / "responses.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["participant_id", "problem_id", "value"])
    w.writerows(rows)
(root / "choice").mkdir(exist_ok=True)
with open(root / "choice" / "problems.jsonl", "w") as f:
    for p in choices:
        f.write(json.dumps(p) + "\n")
with open(root / "choice" / "responses.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["participant_id", "problem_id", "value"])
    w.writerows(choice_rows)
