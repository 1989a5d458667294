import json
import random

import pytest

TEASER = "you won't believe shocking secret amazing reasons this will what happened next".split()
NEWS = "minister budget report court police economy summit officials announced shares".split()
COMMON = "the a of to in and is on for".split()


def _text(rng, pool, n):
    return " ".join(rng.choice(pool if rng.random() < 0.7 else COMMON) for _ in range(n))


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """A small two-topic corpus in the challenge layout plus matching vectors."""
    root = tmp_path_factory.mktemp("clickbait")
    rng = random.Random(5)
    with open(root / "instances.jsonl", "w") as inst, open(root / "truth.jsonl", "w") as truth:
        for i in range(120):
            bait = i % 3 == 0
            pool = TEASER if bait else NEWS
            inst.write(json.dumps({
                "id": str(1000 + i),
                "postText": [_text(rng, pool, 7)],
                "postTimestamp": "Tue Jun 09 16:31:10 +0000 2015",
                "postMedia": [],
                "targetTitle": _text(rng, pool, 6),
                "targetDescription": _text(rng, NEWS, 10),
                "targetKeywords": "budget, economy",
                "targetParagraphs": [_text(rng, NEWS, 30)],
                "targetCaptions": [],
            }) + "\n")
            mean = 0.8 if bait else 0.1
            truth.write(json.dumps({
                "id": str(1000 + i),
                "truthJudgments": [mean] * 5,
                "truthMean": mean,
                "truthMedian": mean,
                "truthMode": mean,
                "truthClass": "clickbait" if bait else "no-clickbait",
            }) + "\n")
    vrng = random.Random(9)
    with open(root / "vectors.txt", "w") as f:
        for words, lean in ((TEASER, 1.0), (NEWS, -1.0), (COMMON, 0.0)):
            for w in words:
                vec = [lean + vrng.gauss(0, 0.3)] + [vrng.gauss(0, 0.3) for _ in range(49)]
                f.write(w + " " + " ".join(f"{x:.5f}" for x in vec) + "\n")
    return root
