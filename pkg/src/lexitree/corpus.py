"""Wordlist ingestion and normalization.

A corpus is a fixed inventory of meanings (a Swadesh-style list) plus one
lexicon per language. Every stored word form lives in the restricted
alphabet of 26 lowercase letters and the space character; everything else
must be transliterated away at parse time via a user-supplied map.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CorpusFormatError, TransliterationError

logger = logging.getLogger(__name__)

ALPHABET = frozenset("abcdefghijklmnopqrstuvwxyz ")

# no leading/trailing/double spaces, only a-z and single interior spaces
WORDFORM_RE = re.compile(r"[a-z]( ?[a-z])*\Z")

_ASCII_UPPER_TO_LOWER = str.maketrans(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ", "abcdefghijklmnopqrstuvwxyz"
)

# bare ASCII control whitespace is read as a word separator; anything more
# exotic needs an explicit transliteration rule
_IMPLICIT_SPACE = frozenset("\t\n\r\x0b\x0c")


@dataclass(frozen=True)
class Meaning:
    """One slot of the meaning inventory: a 1-based id and its gloss."""

    id: int
    gloss: str


@dataclass
class Lexicon:
    """Word forms of one language, keyed by meaning id.

    ``entries`` holds the primary form per meaning; meanings without a
    usable form are simply absent. ``variants`` is only populated when a
    corpus is parsed with ``variant_policy="all"`` and then lists every
    normalized variant of a cell (primary first).
    """

    language: str
    entries: dict[int, str]
    variants: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def word(self, meaning_id: int) -> str | None:
        return self.entries.get(meaning_id)

    def forms(self, meaning_id: int) -> tuple[str, ...]:
        """All stored forms for a meaning (primary only unless variants were kept)."""
        alt = self.variants.get(meaning_id)
        if alt is not None:
            return alt
        primary = self.entries.get(meaning_id)
        return (primary,) if primary is not None else ()

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class Corpus:
    """A meaning inventory plus one lexicon per language.

    Treated as immutable after construction; safe to share across threads.
    """

    meanings: list[Meaning]
    lexicons: list[Lexicon]

    def __post_init__(self) -> None:
        if len(self.lexicons) < 2:
            raise CorpusFormatError("a corpus needs at least 2 languages")
        names = [lx.language for lx in self.lexicons]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise CorpusFormatError(f"duplicate language name(s): {', '.join(dup)}")
        ids = [m.id for m in self.meanings]
        if ids != list(range(1, len(ids) + 1)):
            raise CorpusFormatError("meaning ids must be contiguous starting at 1")
        known = set(ids)
        for lx in self.lexicons:
            stray = set(lx.entries) - known
            if stray:
                raise CorpusFormatError(
                    f"lexicon {lx.language!r} references unknown meaning ids {sorted(stray)}"
                )

    @property
    def languages(self) -> list[str]:
        return [lx.language for lx in self.lexicons]

    @property
    def n_languages(self) -> int:
        return len(self.lexicons)

    def lexicon(self, language: str) -> Lexicon:
        for lx in self.lexicons:
            if lx.language == language:
                return lx
        raise KeyError(language)


def parse_translit_map(lines: Iterable[str]) -> dict[str, str]:
    """Parse a transliteration map: one ``FROM<TAB>TO`` rule per line.

    TO may be empty (deletion) and must otherwise stay inside the
    restricted alphabet. Lines starting with ``#`` and blank lines are
    ignored.
    """
    rules: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n\r")
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise CorpusFormatError(
                f"translit map line {lineno}: expected FROM<TAB>TO, got {line!r}"
            )
        src, dst = line.split("\t", 1)
        if len(src) != 1:
            raise CorpusFormatError(
                f"translit map line {lineno}: FROM must be a single character, got {src!r}"
            )
        if src in rules:
            raise CorpusFormatError(f"translit map line {lineno}: duplicate rule for {src!r}")
        if not set(dst) <= ALPHABET:
            raise CorpusFormatError(
                f"translit map line {lineno}: TO must use only a-z and space, got {dst!r}"
            )
        rules[src] = dst
    return rules


def load_translit_map(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_translit_map(fh)


def normalize_form(raw: str, translit: Mapping[str, str] | None = None) -> str | None:
    """Normalize a raw cell into a word form over a-z + space.

    ASCII-lowercases, applies transliteration rules character by
    character, collapses space runs, and trims. Returns ``None`` when
    nothing survives (callers treat that as a missing entry). Raises
    :class:`TransliterationError` for characters with no rule.

    No Unicode folding happens here beyond ASCII lowercasing: accented
    input needs explicit map rules, which keeps runs reproducible.
    """
    translit = translit or {}
    lowered = raw.translate(_ASCII_UPPER_TO_LOWER)
    out: list[str] = []
    for pos, ch in enumerate(lowered):
        mapped = translit.get(ch)
        if mapped is not None:
            out.append(mapped)
        elif ch in ALPHABET:
            out.append(ch)
        elif ch in _IMPLICIT_SPACE:
            out.append(" ")
        else:
            raise TransliterationError(ch, pos)
    collapsed = " ".join(p for p in "".join(out).split(" ") if p)
    return collapsed or None


def _normalize_cell(
    raw: str,
    translit: Mapping[str, str],
    variant_policy: str,
) -> tuple[str, tuple[str, ...]] | None:
    """Normalize one cell, honoring the synonym policy.

    Comma-separated variants: the first usable one is the primary form;
    the rest are kept only under ``variant_policy="all"``.
    """
    pieces = raw.split(",") if "," in raw else [raw]
    forms: list[str] = []
    for piece in pieces:
        form = normalize_form(piece, translit)
        if form is not None and form not in forms:
            forms.append(form)
        if forms and variant_policy == "first":
            break
    if not forms:
        return None
    return forms[0], tuple(forms)


def parse_corpus(
    source: Iterable[str],
    translit: Mapping[str, str] | None = None,
    variant_policy: str = "first",
) -> Corpus:
    """Parse a tab-separated wordlist into a validated corpus.

    Expected layout: a header row ``meaning<TAB>lang1<TAB>lang2...``
    followed by one row per meaning. Empty cells become missing entries,
    as do cells that normalize to nothing (logged as a warning).

    Args:
        source: lines of the wordlist (an open file works).
        translit: character rules applied by :func:`normalize_form`.
        variant_policy: ``"first"`` keeps only the first comma-separated
            variant of a cell; ``"all"`` retains every variant.

    Raises:
        CorpusFormatError: structural problems (bad header, duplicate
            language, fewer than 2 languages, ragged rows).
        TransliterationError: a character with no rule, with the
            offending row/column attached.
    """
    if variant_policy not in ("first", "all"):
        raise ValueError(f"unknown variant_policy {variant_policy!r}")
    translit = translit or {}

    lines = iter(source)
    try:
        header = next(lines).rstrip("\n\r")
    except StopIteration:
        raise CorpusFormatError("empty wordlist") from None
    cols = header.split("\t")
    if not cols or cols[0] != "meaning":
        raise CorpusFormatError("header must start with a 'meaning' column")
    languages = cols[1:]
    if any(not name for name in languages):
        raise CorpusFormatError("empty language name in header")
    seen: set[str] = set()
    for name in languages:
        if name in seen:
            raise CorpusFormatError(f"duplicate language column: {name!r}")
        seen.add(name)
    if len(languages) < 2:
        raise CorpusFormatError("a wordlist needs at least 2 language columns")

    meanings: list[Meaning] = []
    entries: list[dict[int, str]] = [{} for _ in languages]
    variants: list[dict[int, tuple[str, ...]]] = [{} for _ in languages]
    glosses: set[str] = set()

    for rowno, raw_line in enumerate(lines, 2):
        line = raw_line.rstrip("\n\r")
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != len(cols):
            raise CorpusFormatError(
                f"row {rowno}: expected {len(cols)} columns, got {len(cells)}"
            )
        gloss = cells[0]
        if not gloss:
            raise CorpusFormatError(f"row {rowno}: empty meaning gloss")
        if gloss in glosses:
            raise CorpusFormatError(f"row {rowno}: duplicate meaning gloss {gloss!r}")
        glosses.add(gloss)
        mid = len(meanings) + 1
        meanings.append(Meaning(mid, gloss))
        for k, cell in enumerate(cells[1:]):
            if not cell:
                continue
            try:
                normalized = _normalize_cell(cell, translit, variant_policy)
            except TransliterationError as exc:
                raise TransliterationError(
                    exc.char, exc.position, row=rowno, column=languages[k]
                ) from None
            if normalized is None:
                logger.warning(
                    "row %d (%s), language %s: %r normalizes to nothing; treated as missing",
                    rowno, gloss, languages[k], cell,
                )
                continue
            primary, all_forms = normalized
            entries[k][mid] = primary
            if variant_policy == "all" and len(all_forms) > 1:
                variants[k][mid] = all_forms

    lexicons = [
        Lexicon(language=name, entries=entries[k], variants=variants[k])
        for k, name in enumerate(languages)
    ]
    return Corpus(meanings=meanings, lexicons=lexicons)


def load_corpus(
    wordlist_path: str | Path,
    translit_path: str | Path | None = None,
    variant_policy: str = "first",
) -> Corpus:
    """Read a wordlist file (and optional transliteration map) from disk."""
    translit = load_translit_map(translit_path) if translit_path else {}
    with open(wordlist_path, encoding="utf-8") as fh:
        return parse_corpus(fh, translit, variant_policy)


def serialize_corpus(corpus: Corpus) -> str:
    """Render a corpus back to the wordlist format (parse round-trips exactly)."""
    out = ["\t".join(["meaning"] + corpus.languages)]
    for meaning in corpus.meanings:
        row = [meaning.gloss]
        for lx in corpus.lexicons:
            forms = lx.forms(meaning.id)
            row.append(",".join(forms))
        out.append("\t".join(row))
    return "\n".join(out) + "\n"


def shared_meanings(a: Lexicon, b: Lexicon) -> frozenset[int]:
    """Meaning ids where both lexicons have a present form. Symmetric."""
    return frozenset(a.entries.keys() & b.entries.keys())


def remove_languages(corpus: Corpus, drop: Iterable[str]) -> Corpus:
    """A new corpus without the given languages (meaning inventory unchanged)."""
    dropset = set(drop)
    missing = dropset - set(corpus.languages)
    if missing:
        raise KeyError(f"not in corpus: {sorted(missing)}")
    kept = [lx for lx in corpus.lexicons if lx.language not in dropset]
    return Corpus(meanings=list(corpus.meanings), lexicons=kept)
