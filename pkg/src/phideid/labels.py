"""BIO tag inventory and the collapsed class vocabulary.

The 41-entry tag table is frozen in the published order (ids 0..40, the
Outside tag last).  Several classes have no I-tag and STREET has no B-tag;
spans of those classes that cannot be written in BIO form are rejected at
alignment time instead of being mislabelled.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from .errors import InputError

OUTSIDE = "O"
NON_PHI = "Non-PHI"

BIO_TAGS: tuple[str, ...] = (
    "B-AGE", "B-BIOID", "B-CITY", "B-COUNTRY", "B-DATE", "B-DEVICE",
    "B-DOCTOR", "B-EMAIL", "B-FAX", "B-HEALTHPLAN", "B-HOSPITAL", "B-IDNUM",
    "B-LOCATION-OTHER", "B-MEDICALRECORD", "B-ORGANIZATION", "B-PATIENT",
    "B-PHONE", "B-PROFESSION", "B-STATE", "B-URL", "B-USERNAME", "B-ZIP",
    "I-AGE", "I-CITY", "I-COUNTRY", "I-DATE", "I-DOCTOR", "I-FAX",
    "I-HEALTHPLAN", "I-HOSPITAL", "I-IDNUM", "I-LOCATION-OTHER",
    "I-MEDICALRECORD", "I-ORGANIZATION", "I-PATIENT", "I-PHONE",
    "I-PROFESSION", "I-STATE", "I-STREET", "I-URL",
    OUTSIDE,
)
NUM_TAGS = len(BIO_TAGS)
TAG_TO_ID = {t: i for i, t in enumerate(BIO_TAGS)}
OUTSIDE_ID = TAG_TO_ID[OUTSIDE]
IGNORE_INDEX = -100


def _strip(tag: str) -> str:
    return tag[2:] if tag[:2] in ("B-", "I-") else tag


# every class mentioned anywhere in the tag table, in first-appearance order
PHI_CLASSES: tuple[str, ...] = tuple(dict.fromkeys(_strip(t) for t in BIO_TAGS if t != OUTSIDE))
CLASS_LABELS: tuple[str, ...] = (NON_PHI,) + PHI_CLASSES
CLASS_TO_ID = {c: i for i, c in enumerate(CLASS_LABELS)}

B_CLASSES = frozenset(_strip(t) for t in BIO_TAGS if t.startswith("B-"))
I_CLASSES = frozenset(_strip(t) for t in BIO_TAGS if t.startswith("I-"))
# classes that can be labelled at all (need a B- tag)
TAGGABLE_CLASSES: tuple[str, ...] = tuple(c for c in PHI_CLASSES if c in B_CLASSES)
# taggable classes whose spans must stay within one token
SINGLE_TOKEN_CLASSES = frozenset(c for c in TAGGABLE_CLASSES if c not in I_CLASSES)

_TAG_TO_CLASS = {t: (NON_PHI if t == OUTSIDE else _strip(t)) for t in BIO_TAGS}
TAG_ID_TO_CLASS_ID = tuple(CLASS_TO_ID[_TAG_TO_CLASS[t]] for t in BIO_TAGS)


def tag_class(tag: str) -> str:
    try:
        return _TAG_TO_CLASS[tag]
    except KeyError:
        raise InputError(f"unknown BIO tag {tag!r}") from None


def collapse_bio(labels: Iterable[str | int]) -> list[str]:
    """Map B-X and I-X to X and the Outside tag to Non-PHI, pointwise.

    Accepts tag strings or integer tag ids.
    """
    out = []
    for lab in labels:
        if not isinstance(lab, str):
            if not 0 <= lab < NUM_TAGS:
                raise InputError(f"tag id {lab} outside 0..{NUM_TAGS - 1}")
            lab = BIO_TAGS[lab]
        out.append(tag_class(lab))
    return out


def is_bio_valid(tags: Sequence[str]) -> bool:
    prev = OUTSIDE
    for t in tags:
        if t.startswith("I-") and not (prev != OUTSIDE and _strip(prev) == t[2:]):
            return False
        prev = t
    return True


def bio_to_ranges(tags: Sequence[str]) -> list[tuple[str, int, int]]:
    """Merged (class, first_token, last_token) ranges, inclusive on both ends.

    An I-X that does not continue an X run opens a new range.
    """
    ranges: list[tuple[str, int, int]] = []
    for i, t in enumerate(tags):
        if t == OUTSIDE:
            continue
        cls = t[2:]
        if t.startswith("I-") and ranges and ranges[-1][0] == cls and ranges[-1][2] == i - 1:
            ranges[-1] = (cls, ranges[-1][1], i)
        else:
            ranges.append((cls, i, i))
    return ranges
