"""Regenerates the end-to-end respondent fixture. Output is checked in."""
import json
import random

rng = random.Random(20240501)

questions = [
    {"id": "q_guns", "text": "Ban assault rifles", "cardinality": 2,
     "low_label": "Oppose", "high_label": "Support", "tag": "Gun Policy"},
    {"id": "q_abortion", "text": "Always allow a woman to obtain an abortion as a matter of choice", "cardinality": 2,
     "low_label": "Oppose", "high_label": "Support", "tag": "Abortion"},
    {"id": "q_climate", "text": "Give the Environmental Protection Agency power to regulate carbon dioxide emissions",
     "cardinality": 4, "low_label": "Strongly disagree", "high_label": "Strongly agree", "tag": "Environment"},
    {"id": "q_police", "text": "Increase the number of police on the street by 10 percent", "cardinality": 5,
     "low_label": "Greatly decrease", "high_label": "Greatly increase", "tag": "Policing"},
    {"id": "q_immigration", "text": "Increase spending on border security by $25 billion", "cardinality": 5,
     "low_label": "Strongly oppose", "high_label": "Strongly support", "tag": "Immigration"},
]
tags = ["Gun Policy", "Abortion", "Environment", "Policing", "Immigration"]
# Sign of the ideology effect: +1 means conservatives sit high on the scale.
lean = {"q_guns": -1, "q_abortion": -1, "q_climate": -1, "q_police": 1, "q_immigration": 1}

ideology_codes = {"VeryLiberal": "1", "Liberal": "2", "Moderate": "3", "Conservative": "4", "VeryConservative": "5"}
ideology_pos = {"VeryLiberal": -1.0, "Liberal": -0.5, "Moderate": 0.0, "Conservative": 0.5, "VeryConservative": 1.0}


def answer(q, ideo, woman, nonwhite):
    c = q["cardinality"]
    center = 0.5 + 0.3 * lean[q["id"]] * ideology_pos[ideo] - 0.05 * woman + 0.05 * nonwhite
    x = rng.gauss(center, 0.3)
    x = min(max(x, 0.0), 0.999)
    return int(x * c) + 1


rows = []
rid = 0
for ideo in ideology_codes:
    for woman in (0, 1):
        for nonwhite in (0, 1):
            for _ in range(40):
                rid += 1
                race = rng.choice(["2", "3", "4"]) if nonwhite else "1"
                ans = [str(answer(q, ideo, woman, nonwhite)) for q in questions]
                if rng.random() < 0.03:
                    ans[rng.randrange(len(ans))] = ""
                rows.append([f"r{rid:04d}", ideology_codes[ideo], "2" if woman else "1", race] + ans)
for _ in range(20):
    rid += 1
    kind = rng.choice(["missing", "nonbinary"])
    ideo = "6" if kind == "missing" else "3"
    gender = "3" if kind == "nonbinary" else "1"
    rows.append([f"r{rid:04d}", ideo, gender, "1"] + [str(answer(q, "Moderate", 0, 0)) for q in questions])

with open("e2e/questions.json", "w") as f:
    json.dump({"tags": tags, "questions": questions}, f, indent=2)
    f.write("\n")
with open("e2e/respondents.csv", "w") as f:
    f.write(",".join(["respondent_id", "ideology", "gender", "race"] + [q["id"] for q in questions]) + "\n")
    for r in rows:
        f.write(",".join(r) + "\n")
