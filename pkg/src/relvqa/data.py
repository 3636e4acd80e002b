"""Dataset ingestion and the procedural scene/question generator.

Dataset files are JSON lines, one example per line:

    {"question_id": str, "tokens": [str], "boxes": [[x, y, w, h]],
     "features": [[...]], "triples": [[subject, predicate, object]],
     "answers": {answer: count}}

Scenes are built around two overlapping anchor boxes and two small items:
one item sits strictly inside the first anchor while straddling the second
anchor's edge, the other does the reverse. The same two facts per item
("in" one anchor, "on" the other) are exposed through every relation
channel: semantic triples, spatial classes (containment vs direction
sectors), and raw geometry, so each single-relation model can answer from
its own graph. Remaining objects are placed far away.

Examples come in paired scenes: the pair shares the layout, categories,
colors, and question, but the two items swap positions, so the answers
differ. Answering the relation templates therefore requires binding each
edge label to its endpoint; a bag of neighbors plus a bag of labels per
vertex is provably ambiguous on such pairs (both scenes present identical
bags at every vertex), which is exactly what separates attention-based
aggregation from plain neighborhood averaging. The rule-based oracle
recomputes every answer from boxes and features alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .autodiff import ValidationError
from .geometry import BBox, classify_spatial, FIRST_SECTOR, INSIDE

ANCHOR_CATEGORIES = ("box", "car", "bowl", "basket")
ITEM_CATEGORIES = ("cake", "ball", "hat", "dog", "cup", "book")
CATEGORIES = ANCHOR_CATEGORIES + ITEM_CATEGORIES
COLORS = ("red", "green", "blue", "yellow")
PRED_IN = 1
PRED_ON = 2
PREDICATE_NAMES = {PRED_IN: "in", PRED_ON: "on"}
FEATURE_DIM = len(CATEGORIES) + len(COLORS)

SCENE_K = 6  # two anchors, two items, two far distractors

# question_id prefixes; everything except "color" needs relational reasoning
RELATIONAL_TEMPLATES = ("what-in", "what-on", "yesno-in", "yesno-on")
ALL_TEMPLATES = RELATIONAL_TEMPLATES + ("color",)


@dataclass
class VqaExample:
    question_id: str
    tokens: list[str]
    boxes: list[BBox]
    features: np.ndarray
    triples: list[tuple[int, int, int]]
    answers: dict[str, int]

    @property
    def template(self) -> str:
        return self.question_id.rsplit("-", 1)[0]


def example_to_dict(ex: VqaExample) -> dict:
    return {
        "question_id": ex.question_id,
        "tokens": list(ex.tokens),
        "boxes": [[b.x, b.y, b.w, b.h] for b in ex.boxes],
        "features": [[float(v) for v in row] for row in ex.features],
        "triples": [list(t) for t in ex.triples],
        "answers": dict(ex.answers),
    }


def example_from_dict(raw: dict) -> VqaExample:
    return VqaExample(
        question_id=str(raw["question_id"]),
        tokens=[str(t) for t in raw["tokens"]],
        boxes=[BBox(*map(float, b)) for b in raw["boxes"]],
        features=np.asarray(raw["features"], dtype=np.float64),
        triples=[tuple(int(v) for v in t) for t in raw["triples"]],
        answers={str(k): int(v) for k, v in raw["answers"].items()},
    )


def save_dataset(path: str, examples: list[VqaExample]) -> None:
    with open(path, "w") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_dict(ex), sort_keys=True))
            fh.write("\n")


def load_dataset(path: str) -> list[VqaExample]:
    examples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(example_from_dict(json.loads(line)))
    return examples


def save_answer_index(path: str, answers: list[str]) -> None:
    with open(path, "w") as fh:
        json.dump({a: i for i, a in enumerate(answers)}, fh, indent=1, sort_keys=False)


def load_answer_index(path: str) -> dict[str, int]:
    with open(path) as fh:
        raw = json.load(fh)
    return {str(k): int(v) for k, v in raw.items()}


# ---------------------------------------------------------------------------
# Feature coding
# ---------------------------------------------------------------------------


def object_features(category: str, color: str) -> np.ndarray:
    vec = np.zeros(FEATURE_DIM)
    vec[CATEGORIES.index(category)] = 1.0
    vec[len(CATEGORIES) + COLORS.index(color)] = 1.0
    return vec


def decode_category(row: np.ndarray) -> str:
    return CATEGORIES[int(np.argmax(row[: len(CATEGORIES)]))]


def decode_color(row: np.ndarray) -> str:
    return COLORS[int(np.argmax(row[len(CATEGORIES) : len(CATEGORIES) + len(COLORS)]))]


# ---------------------------------------------------------------------------
# Scene construction
# ---------------------------------------------------------------------------

# region roles by index
ANCHOR_LOW, ANCHOR_HIGH, SLOT_IN_LOW, SLOT_IN_HIGH, DISTRACTOR_0, DISTRACTOR_1 = range(6)


@dataclass
class SceneLayout:
    """Positions only; the two item objects are assigned to slots later.

    boxes[SLOT_IN_LOW] is strictly inside the low anchor and straddles the
    high anchor's lower edge; boxes[SLOT_IN_HIGH] is strictly inside the high
    anchor and straddles the low anchor's upper edge.
    """

    boxes: list[BBox]


def _is_sector(code: int) -> bool:
    return code >= FIRST_SECTOR


def _sample_layout(rng: np.random.Generator, far_threshold: float) -> SceneLayout:
    """Integer-coordinate layouts; every intended relation is re-verified."""
    for _ in range(300):
        cw, ch = int(rng.integers(30, 37)), int(rng.integers(30, 37))
        cx, cy = int(rng.integers(2, 10)), int(rng.integers(44, 52))
        low = BBox(cx, cy, cw, ch)
        dw, dh = int(rng.integers(30, 37)), int(rng.integers(30, 37))
        dx = cx + int(rng.integers(-3, 4))
        dy = cy - dh + int(rng.integers(5, 9))  # dips a few pixels into the low anchor
        if dy < 2:
            continue
        high = BBox(dx, dy, dw, dh)
        overlap_x0 = max(cx, dx)
        overlap_x1 = min(cx + cw, dx + dw)
        # item inside the low anchor, straddling the high anchor's bottom edge;
        # slot sizes are disjoint so pair geometry separates the two slots crisply
        w1, h1 = int(rng.integers(6, 8)), int(rng.integers(6, 8))
        x1 = overlap_x0 + 2 + int(rng.integers(0, max(1, overlap_x1 - overlap_x0 - w1 - 4)))
        y1 = int(high.y2) - h1 // 2
        in_low = BBox(x1, y1, w1, h1)
        # item inside the high anchor, straddling the low anchor's top edge
        w2, h2 = int(rng.integers(12, 15)), int(rng.integers(12, 15))
        x2 = overlap_x0 + 2 + int(rng.integers(0, max(1, overlap_x1 - overlap_x0 - w2 - 4)))
        y2 = cy - h2 + max(2, h2 // 3)
        in_high = BBox(x2, y2, w2, h2)
        core = [low, high, in_low, in_high]
        if classify_spatial(in_low, low, far_threshold) != INSIDE:
            continue
        if classify_spatial(in_high, high, far_threshold) != INSIDE:
            continue
        if not _is_sector(classify_spatial(in_low, high, far_threshold)):
            continue
        if not _is_sector(classify_spatial(in_high, low, far_threshold)):
            continue
        if classify_spatial(low, high, far_threshold) in (1, 2):
            continue
        distractors = []
        for spot_x, spot_y in ((100, 6), (102, 92)):
            dw2, dh2 = int(rng.integers(5, 8)), int(rng.integers(5, 8))
            distractors.append(BBox(spot_x + int(rng.integers(0, 4)), spot_y + int(rng.integers(0, 4)), dw2, dh2))
        boxes = core + distractors
        ok = True
        for d_idx in (DISTRACTOR_0, DISTRACTOR_1):
            for other in range(SCENE_K):
                if other != d_idx and classify_spatial(boxes[d_idx], boxes[other], far_threshold) != 0:
                    ok = False
        if ok:
            return SceneLayout(boxes=boxes)
    raise RuntimeError("layout sampling failed to satisfy the geometric constraints")


@dataclass
class ScenePair:
    """Two scenes sharing a layout, categories, colors, and question; the two
    item objects swap slots between the members, so relation answers differ."""

    layout: SceneLayout
    anchor_cats: tuple[str, str]
    item_cats: tuple[str, str]  # (a, b); member 0 puts a in the low anchor
    distractor_cats: tuple[str, str]
    colors: dict[str, str]  # per category

    def categories(self, flipped: bool) -> list[str]:
        a, b = self.item_cats
        items = (b, a) if flipped else (a, b)
        return [*self.anchor_cats, *items, *self.distractor_cats]

    def features(self, flipped: bool) -> np.ndarray:
        cats = self.categories(flipped)
        return np.stack([object_features(c, self.colors[c]) for c in cats])

    def triples(self) -> list[tuple[int, int, int]]:
        # slot-indexed, so identical for both members of the pair
        return [
            (SLOT_IN_LOW, PRED_IN, ANCHOR_LOW),
            (SLOT_IN_LOW, PRED_ON, ANCHOR_HIGH),
            (SLOT_IN_HIGH, PRED_IN, ANCHOR_HIGH),
            (SLOT_IN_HIGH, PRED_ON, ANCHOR_LOW),
        ]


def _sample_pair(rng: np.random.Generator, far_threshold: float) -> ScenePair:
    layout = _sample_layout(rng, far_threshold)
    anchors = tuple(str(c) for c in rng.permutation(ANCHOR_CATEGORIES)[:2])
    item_pool = [str(c) for c in rng.permutation(ITEM_CATEGORIES)]
    colors = {}
    for cat in (*anchors, *item_pool[:4]):
        colors[cat] = COLORS[int(rng.integers(0, len(COLORS)))]
    return ScenePair(
        layout=layout,
        anchor_cats=anchors,
        item_cats=(item_pool[0], item_pool[1]),
        distractor_cats=(item_pool[2], item_pool[3]),
        colors=colors,
    )


def _pair_question(pair: ScenePair, template: str, rng: np.random.Generator):
    """Question shared by both members; returns (tokens, answer_X, answer_Y)."""
    low_cat, high_cat = pair.anchor_cats
    a, b = pair.item_cats
    anchor_is_low = bool(rng.integers(0, 2))
    anchor = low_cat if anchor_is_low else high_cat
    if template == "what-in":
        # X: a sits in the low anchor; Y: b does
        ans_x, ans_y = (a, b) if anchor_is_low else (b, a)
        return ["what", "is", "in", "the", anchor], ans_x, ans_y
    if template == "what-on":
        ans_x, ans_y = (b, a) if anchor_is_low else (a, b)
        return ["what", "is", "on", "the", anchor], ans_x, ans_y
    if template in ("yesno-in", "yesno-on"):
        word = template.rsplit("-", 1)[1]
        if rng.integers(0, 5) == 0:
            subject = pair.distractor_cats[int(rng.integers(0, 2))]  # far object: no either way
            return ["is", "the", subject, word, "the", anchor], "no", "no"
        subject = a if rng.integers(0, 2) else b
        subject_in_low_x = subject == a  # member X places item a in the low anchor
        if word == "in":
            truth_x = subject_in_low_x == anchor_is_low
        else:
            truth_x = subject_in_low_x != anchor_is_low
        yn = lambda t: "yes" if t else "no"
        return ["is", "the", subject, word, "the", anchor], yn(truth_x), yn(not truth_x)
    if template == "color":
        cats = [*pair.anchor_cats, *pair.item_cats, *pair.distractor_cats]
        cat = cats[int(rng.integers(0, len(cats)))]
        return ["what", "color", "is", "the", cat], pair.colors[cat], pair.colors[cat]
    raise ValidationError(f"unknown question template {template!r}")


def generate_synthetic(seed: int, n_examples: int, k: int = SCENE_K, far_threshold: float = 4.0) -> list[VqaExample]:
    """Procedural paired dataset; fixed seed gives byte-identical files."""
    if k != SCENE_K:
        raise ValidationError(f"scenes have exactly {SCENE_K} regions; got k={k}")
    rng = np.random.default_rng(seed)
    counters = {t: 0 for t in ALL_TEMPLATES}
    examples: list[VqaExample] = []
    pair_idx = 0
    while len(examples) < n_examples:
        template = ALL_TEMPLATES[pair_idx % len(ALL_TEMPLATES)]
        pair_idx += 1
        pair = _sample_pair(rng, far_threshold)
        tokens, ans_x, ans_y = _pair_question(pair, template, rng)
        for flipped, answer in ((False, ans_x), (True, ans_y)):
            if len(examples) == n_examples:
                break
            qid = f"{template}-{counters[template]:05d}"
            counters[template] += 1
            examples.append(
                VqaExample(
                    question_id=qid,
                    tokens=list(tokens),
                    boxes=pair.layout.boxes,
                    features=pair.features(flipped),
                    triples=pair.triples(),
                    answers={answer: 10},
                )
            )
    return examples


def answer_vocabulary() -> list[str]:
    return list(ITEM_CATEGORIES) + list(COLORS) + ["yes", "no"]


def write_dataset_files(out_dir: str, seed: int, n_train: int, n_val: int, k: int = SCENE_K, far_threshold: float = 4.0):
    """Write train/val splits plus the token and answer vocabularies."""
    from .question import Vocabulary

    os.makedirs(out_dir, exist_ok=True)
    train = generate_synthetic(seed, n_train, k, far_threshold)
    val = generate_synthetic(seed + 1, n_val, k, far_threshold)
    save_dataset(os.path.join(out_dir, "train.jsonl"), train)
    save_dataset(os.path.join(out_dir, "val.jsonl"), val)
    tokens = sorted({t for ex in train + val for t in ex.tokens} | set(CATEGORIES) | set(COLORS))
    Vocabulary.from_tokens(tokens).save(os.path.join(out_dir, "vocab.json"))
    save_answer_index(os.path.join(out_dir, "answers.json"), answer_vocabulary())
    return train, val


# ---------------------------------------------------------------------------
# Rule-based oracle: recompute the answer from boxes and features alone
# ---------------------------------------------------------------------------


def _find_category(ex: VqaExample, category: str) -> int:
    for i in range(len(ex.boxes)):
        if decode_category(ex.features[i]) == category:
            return i
    raise ValidationError(f"no region with category {category!r}")


def _relation_holds(ex: VqaExample, subject: int, anchor: int, word: str, far_threshold: float) -> bool:
    code = classify_spatial(ex.boxes[subject], ex.boxes[anchor], far_threshold)
    return code == INSIDE if word == "in" else _is_sector(code)


def oracle_answer(ex: VqaExample, far_threshold: float = 4.0) -> str:
    """Answer derived from geometry and feature codes, independent of generation."""
    toks = ex.tokens
    if toks[:2] == ["what", "is"] and toks[3] == "the":
        anchor = _find_category(ex, toks[4])
        for j in range(len(ex.boxes)):
            if j == anchor or decode_category(ex.features[j]) not in ITEM_CATEGORIES:
                continue
            if _relation_holds(ex, j, anchor, toks[2], far_threshold):
                return decode_category(ex.features[j])
        raise ValidationError(f"no item is {toks[2]!r} the {toks[4]}")
    if toks[0] == "is" and toks[1] == "the":
        subject = _find_category(ex, toks[2])
        anchor = _find_category(ex, toks[5])
        return "yes" if _relation_holds(ex, subject, anchor, toks[3], far_threshold) else "no"
    if toks[:2] == ["what", "color"]:
        return decode_color(ex.features[_find_category(ex, toks[4])])
    raise ValidationError(f"oracle cannot parse question {toks!r}")
