"""Shipped word lists: stop words and the seed-token lexicon."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

STOPWORD_FILES = {"en": "stopwords_en.txt", "es": "stopwords_es.txt"}
LEXICON_FILE = "seeds.txt"


def _read_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def _packaged(name: str) -> str:
    return resources.files("laburst").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def load_stopwords(lang: str = "en") -> list[str]:
    return _read_lines(_packaged(STOPWORD_FILES[lang]))


def stopword_set(langs=("en", "es")) -> frozenset[str]:
    return frozenset(w for lang in langs for w in load_stopwords(lang))


def parse_lexicon(text: str) -> dict[str, list[str]]:
    """Group tokens under ``# heading`` lines; tokens before any heading go to ''."""
    groups: dict[str, list[str]] = {}
    current = ""
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            current = line.lstrip("#").strip()
            continue
        groups.setdefault(current, [])
        if line not in groups[current]:
            groups[current].append(line)
    return groups


def load_lexicon(path=None, group: str | None = None) -> list[str]:
    """Seed tokens from ``path`` (default: the shipped list), deduplicated.

    ``group`` restricts to one ``# heading`` section, e.g. "World Cup".
    """
    if path is None:
        text = _packaged(LEXICON_FILE)
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    groups = parse_lexicon(text)
    if group is not None:
        if group not in groups:
            raise KeyError(f"lexicon has no group {group!r}; have {sorted(groups)}")
        return list(groups[group])
    return list(dict.fromkeys(t for toks in groups.values() for t in toks))
