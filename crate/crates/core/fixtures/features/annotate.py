"""Computes per-comment counts for annotated.jsonl with an independent
tokenizer and sentence splitter. Rerun after editing COMMENTS."""
import json
import re
from pathlib import Path

HERE = Path(__file__).parent
FUNCTION_WORDS = {
    l.strip() for l in (HERE / "../../data/function_words.txt").read_text().splitlines()
    if l.strip() and not l.startswith("#")
}
ARTICLES = {"a", "an", "the"}
ABBREV = {"mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "u.s", "gen", "sen", "gov", "rep"}

COMMENTS = [
    "The debate was a disaster for him.",
    "I think the polls are wrong. They were wrong before!",
    "Is this a joke? No, it is not.",
    "Read this: https://example.com/story before you comment.",
    "Mr. Smith said the plan is an insult to the voters.",
    "Wow!!! Just wow.",
    "We need jobs, not slogans. Jobs, jobs, jobs.",
    "An apple a day keeps the doctor away.",
    "They said “it will never happen.” It happened.",
    "What about the emails? What about the wall?",
    "Nothing in the speech was new...",
    "He has been right about trade for years, and they know it.",
    "Vote. Vote. Vote!",
    "Dr. Jones vs. the establishment is the real fight.",
    "I can't believe how many people showed up at the rally.",
    "The economy is the issue; everything else is noise.",
    "Check www.example.org for the full transcript of the town hall.",
    "If she wins, the court changes for a generation.",
    "Nobody in my town trusts the media anymore (and why would they?).",
    "A vote for a third party is a vote for the other side.",
]


def tokens(text):
    out = []
    for piece in text.lower().split():
        # strip leading and trailing characters that are not letters or digits
        m = re.match(r"^[^0-9a-z]*(.*?)[^0-9a-z]*$", piece, re.S)
        core = m.group(1)
        if core.startswith(("http://", "https://", "www.")):
            out.append("<url>")
        elif core:
            out.append(core)
    return out


def sentences(text):
    parts, start = [], 0
    for m in re.finditer(r"[.!?]+[\"')\]”’]*(?=\s|$)", text):
        run = re.match(r"[.!?]+", m.group(0)).group(0)
        if run == ".":
            word = text[start:m.start()].split()[-1:] or [""]
            word = re.sub(r"^[^0-9A-Za-z]*", "", word[0]).lower()
            if word in ABBREV:
                continue
        parts.append(text[start:m.end()])
        start = m.end()
    parts.append(text[start:])
    return [p.strip() for p in parts if re.search(r"[0-9A-Za-z]", p)]


rows = []
for c in COMMENTS:
    sent_toks = [t for t in (tokens(s) for s in sentences(c)) if t]
    toks = [t for s in sent_toks for t in s]
    rows.append({
        "text": c,
        "tokens": len(toks),
        "types": len(set(toks)),
        "articles": sum(t in ARTICLES for t in toks),
        "function_words": sum(t in FUNCTION_WORDS for t in toks),
        "sentences": len(sent_toks),
    })
(HERE / "annotated.jsonl").write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))
