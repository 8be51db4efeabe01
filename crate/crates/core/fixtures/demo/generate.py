"""Writes the small synthetic demo corpus (two subreddits) next to this file.

Deterministic: rerunning reproduces the committed files byte for byte.
"""
import json
import random
from datetime import datetime, timezone
from pathlib import Path

HERE = Path(__file__).parent

OPENERS = [
    "Honestly,", "Look,", "I think", "Frankly,", "To be fair,", "Well,", "Seriously,", "In my view,",
    "Not gonna lie,", "Let's be real,", "The thing is,", "Agreed,",
]
TOPICS = {
    "trump": [
        "the wall", "trade deals", "the rally last night", "the debate", "jobs in Ohio", "the media coverage",
        "the polls", "the primaries", "taxes", "the convention", "immigration", "the economy",
    ],
    "clinton": [
        "the email story", "health care", "the debate", "the polls", "her running mate", "the convention",
        "the economy", "foreign policy", "the primaries", "the ground game", "student debt", "the Supreme Court",
    ],
}
VERBS = ["changes everything", "is overblown", "matters more than people think", "was a mess",
         "went better than expected", "is the real story", "keeps coming up", "is being ignored",
         "could decide the race", "is old news"]
CLOSERS = ["", " Just saying.", " We'll see in November.", " Source: https://example.com/article",
           " Mark my words.", " Thoughts?", " Not sure why people argue about this.", " Big if true."]


def ts(y, m, d, h=12):
    return int(datetime(y, m, d, h, tzinfo=timezone.utc).timestamp())


def sentence(rng, topic_words, quirk):
    s = f"{rng.choice(OPENERS)} {rng.choice(topic_words)} {rng.choice(VERBS)}."
    if rng.random() < 0.5:
        s += f" {quirk.capitalize()} {rng.choice(topic_words)} {rng.choice(VERBS)}."
    return s + rng.choice(CLOSERS)


def build(name, candidate, seed):
    rng = random.Random(seed)
    topic_words = TOPICS[candidate]
    users = [f"{candidate[:2]}_user{i:02d}" for i in range(12)]
    quirks = {u: rng.choice(["and yes,", "also", "plus", "meanwhile", "again,", "still,"]) for u in users}
    posts, comments = [], []
    cid = 0

    def new_id(prefix):
        nonlocal cid
        cid += 1
        return f"{prefix}{cid:04d}"

    for year, n_posts in ((2015, 6), (2016, 6)):
        for p in range(n_posts):
            pid = new_id("p")
            t0 = ts(year, 1 + 2 * p, 3 + p)
            posts.append({"id": pid, "author": rng.choice(users), "title": f"Discussion: {rng.choice(topic_words)}",
                          "selftext": "What does everyone think?", "created_utc": t0, "subreddit": name})
            # a few top-level comments, each with a short reply chain
            for _ in range(rng.randint(3, 4)):
                parent = pid
                depth = rng.randint(1, 3)
                for d in range(depth):
                    u = rng.choice(users)
                    c = new_id("c")
                    comments.append({"id": c, "parent_id": f"t1_{parent}" if parent != pid else f"t3_{pid}",
                                     "link_id": f"t3_{pid}", "author": u,
                                     "body": sentence(rng, topic_words, quirks[u]),
                                     "created_utc": t0 + 600 * (d + 1) + rng.randint(0, 300), "subreddit": name})
                    parent = c
    # every user gets history in 2015 and at least one leaf reply in 2016
    hist_posts = [p for p in posts if p["created_utc"] < ts(2016, 1, 1)]
    tgt_posts = [p for p in posts if p["created_utc"] >= ts(2016, 1, 1)]
    for u in users:
        p = rng.choice(hist_posts)
        comments.append({"id": new_id("c"), "parent_id": f"t3_{p['id']}", "link_id": f"t3_{p['id']}", "author": u,
                         "body": sentence(rng, topic_words, quirks[u]), "created_utc": p["created_utc"] + 5000,
                         "subreddit": name})
        p = rng.choice(tgt_posts)
        top = new_id("c")
        other = rng.choice([x for x in users if x != u])
        comments.append({"id": top, "parent_id": f"t3_{p['id']}", "link_id": f"t3_{p['id']}", "author": other,
                         "body": sentence(rng, topic_words, quirks[other]), "created_utc": p["created_utc"] + 7000,
                         "subreddit": name})
        comments.append({"id": new_id("c"), "parent_id": f"t1_{top}", "link_id": f"t3_{p['id']}", "author": u,
                         "body": sentence(rng, topic_words, quirks[u]), "created_utc": p["created_utc"] + 7600,
                         "subreddit": name})
    # noise: a deleted author, an orphan, a duplicate line and a malformed line
    p = tgt_posts[0]
    comments.append({"id": new_id("c"), "parent_id": f"t3_{p['id']}", "link_id": f"t3_{p['id']}",
                     "author": "[deleted]", "body": "[removed]", "created_utc": p["created_utc"] + 9000,
                     "subreddit": name})
    comments.append({"id": new_id("c"), "parent_id": "t1_missing0", "link_id": f"t3_{p['id']}",
                     "author": users[0], "body": "Replying to something that is gone.",
                     "created_utc": p["created_utc"] + 9100, "subreddit": name})
    lines = [json.dumps(c, sort_keys=True) for c in comments]
    lines.append(lines[3])
    lines.append('{"id": "broken", "created_utc": ')
    (HERE / f"{name}_posts.jsonl").write_text("".join(json.dumps(p, sort_keys=True) + "\n" for p in posts))
    (HERE / f"{name}_comments.jsonl").write_text("".join(l + "\n" for l in lines))


build("demo_trump", "trump", 2015)
build("demo_clinton", "clinton", 2016)
