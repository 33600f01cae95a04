"""Regenerate the demo project inputs in this directory (deterministic)."""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent
rng = random.Random(7)

NEWSPAPERS = [
    ("globe", "Daily Globe", "United Kingdom", "London", 51.5072, -0.1276, 12),
    ("herald", "Harbor Herald", "United States", "Boston", 42.3601, -71.0589, 40),
    ("courier", "Alpine Courier", "Switzerland", "Zurich", 47.3769, 8.5417, 210),
    ("tribune", "Delta Tribune", "India", "Kolkata", 22.5726, 88.3639, 95),
    ("sentinel", "Cape Sentinel", "South Africa", "Cape Town", -33.9249, 18.4241, 300),
    ("post", "Pacific Post", "Australia", "Sydney", -33.8688, 151.2093, 150),
]

THEMES = {
    "summit": {
        "entities": [("Helena Varga", "PER"), ("Northern Alliance", "ORG"), ("Geneva", "LOC")],
        "title": ["{0} opens climate summit in {2}", "Talks in {2} stall as {1} walks out",
                  "{0} hails breakthrough deal", "Delegates clash over emissions in {2}"],
        "sentences": [
            "{0} told delegates in {2} that the emissions agreement was within reach.",
            "The {1} rejected the draft and accused organisers of ignoring poorer states.",
            "Negotiators worked through the night on carbon targets and climate finance.",
            "Observers praised the progress but warned that the deadline could slip again.",
            "{0} said the final text would protect vulnerable coastal communities.",
            "Critics argued the summit produced promises without binding commitments.",
        ],
        "classes": ["Person", "Organization", "City", "Event"],
    },
    "floods": {
        "entities": [("Rivera Basin", "LOC"), ("Red Crescent", "ORG"), ("Tomas Okafor", "PER")],
        "title": ["Floods devastate villages across {0}", "{1} rushes aid to {0}",
                  "{2} warns of more rain in {0}", "Thousands displaced as rivers burst banks"],
        "sentences": [
            "Heavy rain flooded the {0} and forced thousands of families from their homes.",
            "The {1} delivered food, clean water and tents to the worst hit districts.",
            "{2} said rescue teams had reached several stranded villages by boat.",
            "Farmers lost their harvest and livestock as the water kept rising.",
            "Officials criticised the slow response and the damaged early warning system.",
            "Engineers inspected weakened dams and bridges along the swollen river.",
        ],
        "classes": ["Region", "Organization", "Person", "Disaster"],
    },
    "markets": {
        "entities": [("Central Reserve", "ORG"), ("Mara Lindqvist", "PER"), ("Frankfurt", "LOC")],
        "title": ["{0} raises interest rates again", "{1} signals pause in rate hikes",
                  "Stocks rally in {2} after {0} decision", "Inflation fears weigh on investors"],
        "sentences": [
            "The {0} raised its benchmark interest rate to fight persistent inflation.",
            "{1} said policymakers would watch wages and energy prices closely.",
            "Shares in {2} climbed as traders bet that borrowing costs had peaked.",
            "Economists warned that higher mortgage payments could slow household spending.",
            "Bond yields fell while the currency gained against the dollar.",
            "Banks reported strong profits but cautioned about rising loan defaults.",
        ],
        "classes": ["Institution", "Person", "City", "Market"],
    },
}
THEME_ORDER = ["summit", "floods", "markets"]
FOOTER = {"globe": " Subscribe to the Daily Globe for more.", "herald": " Read more at Harbor Herald online."}
CENTERS = {
    "summit": [4.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0],
    "floods": [0.0, 4.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5],
    "markets": [0.0, 0.0, 4.0, 0.0, 0.0, 1.0, 0.5, 0.5],
}


def article(idx, theme, paper):
    t = THEMES[theme]
    names = [e[0] for e in t["entities"]]
    title = rng.choice(t["title"]).format(*names)
    sents = rng.sample(t["sentences"], 4)
    body = " ".join(s.format(*names) for s in sents)
    return {
        "id": f"a{idx:03d}",
        "newspaper_id": paper,
        "title": title,
        "body": body + FOOTER.get(paper, ""),
        "published_at": f"2023-10-{1 + idx % 28:02d}",
        "language_tag": "en",
    }, body


def mentions_for(art_id, cleaned, theme):
    out = []
    n = 0
    for surface, group in THEMES[theme]["entities"]:
        start = 0
        while True:
            i = cleaned.find(surface, start)
            if i < 0:
                break
            n += 1
            out.append({
                "mention_id": f"{art_id}-m{n}",
                "article_id": art_id,
                "entity_group": group,
                "surface": surface,
                "detector_score": round(0.9 + rng.random() * 0.09, 4),
                "start": i,
                "end": i + len(surface),
            })
            start = i + len(surface)
    return out


def ontology(theme, broken):
    t = THEMES[theme]
    (a, _), (b, _), (c, _) = t["entities"]
    cls = t["classes"]
    objects = [{"Name": e[0], "InstanceOf": cls[i]} for i, e in enumerate(t["entities"])]
    rels = [
        f'"meets": {{"RelationshipFrom": "{a}", "RelationshipTo": "{b}"}}',
        f'"operates in": {{"RelationshipFrom": "{b}", "RelationshipTo": "{c}"}}',
    ]
    if broken == "undefined":
        rels.append(f'"criticises": {{"RelationshipFrom": "{a}", "RelationshipTo": "Unnamed Critics"}}')
    if broken == "class":
        objects.append({"Name": "Press Office", "InstanceOf": "Department"})
    if broken == "duplicate":
        objects.append(dict(objects[0]))
    body = ", ".join(rels)
    return (
        "Here is the ontology:\n```json\n{\n"
        f'  "Class": {json.dumps(cls)},\n'
        f'  "Object": {json.dumps(objects)},\n'
        f'  "Relationship": {{{body}}}\n'
        "}\n```"
    )


def main():
    papers = [p[0] for p in NEWSPAPERS]
    articles, embeddings, mentions, canned = [], [], [], {}
    idx = 0
    for theme in THEME_ORDER:
        for k in range(20):
            idx += 1
            # Each theme leans towards some newspapers so rate deviations are non-zero.
            paper = papers[(k * (THEME_ORDER.index(theme) + 1) + k // 3) % len(papers)]
            art, cleaned = article(idx, theme, paper)
            articles.append(art)
            vec = [round(c + rng.gauss(0, 0.25), 6) for c in CENTERS[theme]]
            embeddings.append({"article_id": art["id"], "vector": vec})
            mentions.extend(mentions_for(art["id"], cleaned, theme))
            broken = {3: "undefined", 7: "class", 11: "duplicate"}.get(k)
            if k == 15:
                canned[art["id"]] = ["not json at all", ontology(theme, None)]
            else:
                canned[art["id"]] = ontology(theme, broken)
    idx += 1
    articles.append({
        "id": f"a{idx:03d}", "newspaper_id": "courier", "title": "Regierung plant neue Steuern",
        "body": "Die Regierung hat am Montag neue Steuern angekündigt. Die Opposition kritisiert die Pläne scharf und fordert eine Abstimmung im Parlament.",
        "published_at": "2023-10-15",
    })
    embeddings.append({"article_id": f"a{idx:03d}", "vector": [1.0] * 8})

    np_out = [
        {"id": i, "name": n, "country": c, "city": city, "latitude": lat, "longitude": lon, "source_rank": r}
        for i, n, c, city, lat, lon, r in NEWSPAPERS
    ]
    (OUT / "newspapers.json").write_text(json.dumps(np_out, indent=2) + "\n")
    (OUT / "articles.jsonl").write_text("".join(json.dumps(a, ensure_ascii=False) + "\n" for a in articles))
    (OUT / "embeddings.jsonl").write_text("".join(json.dumps(e) + "\n" for e in embeddings))
    (OUT / "entities.jsonl").write_text("".join(json.dumps(m) + "\n" for m in mentions))
    (OUT / "ontology_replies.json").write_text(json.dumps(canned, indent=2) + "\n")
    rules = [
        {"newspaper_id": "globe", "pattern": r"\s*Subscribe to the Daily Globe for more\.$", "order": 1},
        {"newspaper_id": "herald", "pattern": r"\s*Read more at Harbor Herald online\.$", "order": 1},
    ]
    (OUT / "noise_rules.json").write_text(json.dumps(rules, indent=2) + "\n")
    (OUT / "aliases.json").write_text(json.dumps({"Alliance": "Northern Alliance"}, indent=2) + "\n")


if __name__ == "__main__":
    main()
