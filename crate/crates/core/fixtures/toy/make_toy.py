"""Regenerates the toy raw sources. Output is deterministic."""
import csv
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
RAW = HERE / "raw"

INVENTORY = {
    "xa": ("kltm", "ao"),
    "xb": ("prsn", "ei"),
    "xc": ("bdgv", "uy"),
}


def vocabulary(lang, rng):
    cons, vows = INVENTORY[lang]
    sylls = [c + v for c in cons for v in vows]
    words = sorted({a + b + c for a in sylls for b in sylls for c in sylls})
    rng.shuffle(words)
    return {"hate": words[:14], "neutral": words[14:28], "filler": words[28:40], "stop": words[40:43]}


def sentence(vocab, label, rng):
    key = "hate" if label else "neutral"
    words = rng.sample(vocab[key], rng.randint(2, 3)) + rng.sample(vocab["filler"], rng.randint(2, 4))
    if rng.random() < 0.5:
        words.append(rng.choice(vocab["stop"]))
    if rng.random() < 0.15:
        words.insert(rng.randrange(len(words)), rng.choice(["café", "\U0001F600", "naïve"]))
    rng.shuffle(words)
    if rng.random() < 0.2:
        words[0] = words[0].capitalize()
    text = " ".join(words)
    if rng.random() < 0.1:
        text += "\\n"
    return text


def labels(n, rng, p_hate=0.42, noise=0.12):
    """True labels and the noisy labels the annotation will encode."""
    out = []
    for _ in range(n):
        y = int(rng.random() < p_hate)
        shown = 1 - y if rng.random() < noise else y
        out.append((y, shown))
    return out


def main():
    rng = random.Random(20240601)
    vocabs = {lang: vocabulary(lang, rng) for lang in INVENTORY}
    for lang, v in vocabs.items():
        (HERE / "stopwords" / f"{lang}.txt").write_text("\n".join(v["stop"]) + "\n")
    with open(HERE / "vocab.txt", "w") as f:
        for lang, v in vocabs.items():
            # Two hate and two neutral words per language stay out of vocabulary.
            for w in v["hate"][:-2] + v["neutral"][:-2] + v["filler"]:
                f.write(w + "\n")

    # xa: annotator votes (csv) and a category map (tsv).
    rows = []
    for i, (y, shown) in enumerate(labels(60, rng)):
        votes = ["hate" if shown else "ok"] * 3
        votes[rng.randrange(3)] = rng.choice(["hate", "ok", "unsure"])
        if i % 17 == 5:
            votes = ["hate", "ok", "unsure"]  # tie, resolved to 0
        if i % 23 == 7:
            votes = ["unsure"] * 3  # no votes, rejected
        rows.append({"id": f"xa-v{i}", "text": sentence(vocabs["xa"], y, rng), "a1": votes[0], "a2": votes[1], "a3": votes[2]})
    rows.append({"id": "xa-v-empty", "text": "\U0001F600 café", "a1": "ok", "a2": "ok", "a3": "ok"})
    with open(RAW / "xa_votes.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["id", "text", "a1", "a2", "a3"])
        w.writeheader()
        w.writerows(rows)
    rows = []
    for i, (y, shown) in enumerate(labels(45, rng)):
        cat = rng.choice(["slur", "threat"]) if shown else rng.choice(["neutral", "chat"])
        if i % 15 == 4:
            cat = "spam"
        rows.append({"category": cat, "body": sentence(vocabs["xa"], y, rng)})
    with open(RAW / "xa_categories.tsv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["category", "body"], delimiter="\t")
        w.writeheader()
        w.writerows(rows)

    # xb: multi-attribute tags (jsonl) and an id-only source hydrated from a dump.
    with open(RAW / "xb_tags.jsonl", "w") as f:
        for i, (y, shown) in enumerate(labels(70, rng)):
            tags = rng.choice(["hateful", "hateful_offensive", "offensive_hateful"]) if shown else rng.choice(["normal", "offensive", "normal_offensive"])
            f.write(json.dumps({"tweet": sentence(vocabs["xb"], y, rng), "tags": tags}) + "\n")
    dump = []
    rows = []
    for i, (y, shown) in enumerate(labels(36, rng)):
        pid = str(900100 + i)
        rows.append({"post_id": pid, "text": "", "hate": shown})
        if i != 11:  # deleted post: cannot be hydrated
            dump.append({"id": pid, "text": sentence(vocabs["xb"], y, rng)})
    with open(RAW / "xb_ids.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["post_id", "text", "hate"])
        w.writeheader()
        w.writerows(rows)
    with open(RAW / "xb_hydration.jsonl", "w") as f:
        for d in dump:
            f.write(json.dumps(d) + "\n")

    # xc: plain binary labels.
    with open(RAW / "xc_binary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["text", "is_hate"])
        w.writeheader()
        for y, shown in labels(105, rng):
            w.writerow({"text": sentence(vocabs["xc"], y, rng), "is_hate": shown})


if __name__ == "__main__":
    main()
