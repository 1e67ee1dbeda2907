"""Bundled offline fixtures: a small crawlable site and evaluation question sets.

The site is 12 HTML pages under one host, including a directed 3-page
link cycle (about -> history -> campus -> about), assorted rejectable
links (mailto, fragment, cross-host, javascript) and script/style content
to strip. Question sets pair the shared 6-question prompt list with each
model profile's published reference answers; the star ratings below are
the published human judgments for those answers, kept here so reports can
be annotated without retyping them.
"""

from __future__ import annotations

from pathlib import Path

_HERE = Path(__file__).parent

#: Seed URL the fixture site is served under (any host works with a
#: DirectoryFetcher; tests and docs use this one).
FIXTURE_SEED_URL = "https://fixture.test/"

#: Every page reachable from the seed, hand-enumerated.
FIXTURE_SITE_URLS = frozenset({
    "https://fixture.test/",
    "https://fixture.test/about.html",
    "https://fixture.test/history.html",
    "https://fixture.test/campus.html",
    "https://fixture.test/academics.html",
    "https://fixture.test/admissions.html",
    "https://fixture.test/clubs/ieee.html",
    "https://fixture.test/clubs/robotics.html",
    "https://fixture.test/news.html",
    "https://fixture.test/events/icwstcsc.html",
    "https://fixture.test/departments/mechanical.html",
    "https://fixture.test/departments/electronics.html",
})

PROFILE_KEYS = ("flan-t5-xxl", "flan-t5-base", "flan-t5-small")

PROFILE_MODEL_IDS = {
    "flan-t5-xxl": "google/flan-t5-xxl",
    "flan-t5-base": "google/flan-t5-base",
    "flan-t5-small": "google/flan-t5-small",
}

#: Published 1-5 star ratings per profile, keyed by question id.
REFERENCE_STAR_RATINGS = {
    "google/flan-t5-xxl": {1: 4, 2: 3, 3: 4, 4: 4, 5: 4, 6: 5},
    "google/flan-t5-base": {1: 4, 2: 3, 3: 1, 4: 2, 5: 4, 6: 4},
    "google/flan-t5-small": {1: 3, 2: 1, 3: 1, 4: 1, 5: 1, 6: 3},
}


def site_root() -> Path:
    """Directory holding the fixture site's HTML files."""
    return _HERE / "site"


def questions_path(profile_key: str) -> Path:
    """Path of the question set for one profile key, e.g. ``flan-t5-xxl``."""
    if profile_key not in PROFILE_KEYS:
        raise KeyError(f"unknown profile key {profile_key!r}; expected one of {PROFILE_KEYS}")
    return _HERE / "questions" / f"{profile_key.replace('-', '_')}.jsonl"
