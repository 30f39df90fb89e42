"""Edit distances between word forms and lexical distances between languages.

The word-level distance is the plain Levenshtein edit count divided by the
length of the longer word, so it always lands in [0, 1] and a single
substitution weighs less in a long word than in a short one. The
language-level distance averages the word distances over exactly the
meanings present in both lexicons.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .corpus import Corpus, Lexicon, shared_meanings
from .errors import UndefinedPairError

logger = logging.getLogger(__name__)

DEFAULT_MIN_OVERLAP_WARN = 100


@lru_cache(maxsize=8192)
def _char_masks(word: str) -> tuple[dict[str, int], int, int]:
    """Per-character bit masks of `word`, plus the width mask and high bit."""
    peq: dict[str, int] = {}
    for i, ch in enumerate(word):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    m = len(word)
    return peq, (1 << m) - 1, 1 << (m - 1)


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character insertions, deletions, or
    substitutions transforming one string into the other.

    Uses the Myers/Hyyrö bit-parallel recurrence, which walks the dynamic
    programming matrix one column of machine words at a time; Python's
    big integers make it exact for any word length.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    peq, mask, high = _char_masks(a)
    get = peq.get
    vp = mask
    vn = 0
    score = len(a)
    for ch in b:
        eq = get(ch, 0)
        x = eq | vn
        d0 = (((eq & vp) + vp) ^ vp) | x
        hp = vn | (mask & ~(d0 | vp))
        hn = d0 & vp
        if hp & high:
            score += 1
        elif hn & high:
            score -= 1
        hp = ((hp << 1) | 1) & mask
        hn = (hn << 1) & mask
        vp = hn | (mask & ~(d0 | hp))
        vn = d0 & hp
    return score


def word_distance(a: str, b: str) -> float:
    """Levenshtein distance divided by the length of the longer word.

    Lengths count every character, spaces included. Always in [0, 1];
    0 exactly when the words are equal.
    """
    if a == b:
        return 0.0
    return levenshtein(a, b) / max(len(a), len(b))


def _meaning_distance(a: Lexicon, b: Lexicon, mid: int, use_variants: bool) -> float:
    if not use_variants:
        return word_distance(a.entries[mid], b.entries[mid])
    return min(
        word_distance(fa, fb) for fa in a.forms(mid) for fb in b.forms(mid)
    )


def lexical_distance(
    a: Lexicon, b: Lexicon, use_variants: bool = False
) -> tuple[float, int]:
    """Average word distance over the meanings shared by both lexicons.

    Returns ``(value, overlap)`` where overlap is the number of shared
    meanings actually averaged over; missing words simply drop out of the
    average. With no shared meanings the value is ``nan`` and the overlap
    0, which callers must treat as undefined.

    The average uses an exactly-rounded float sum, so the result does not
    depend on meaning order.
    """
    shared = shared_meanings(a, b)
    if not shared:
        return math.nan, 0
    dists = [_meaning_distance(a, b, mid, use_variants) for mid in shared]
    return math.fsum(dists) / len(dists), len(dists)


@dataclass
class DistanceMatrix:
    """Symmetric pairwise lexical distances plus per-pair overlap counts.

    ``values[i][j]`` is ``nan`` (undefined) exactly where
    ``overlaps[i][j] == 0`` for ``i != j``. ``imputed`` lists pairs whose
    value was filled in by :func:`impute_undefined`. Arrays are frozen
    after construction.
    """

    languages: list[str]
    values: np.ndarray
    overlaps: np.ndarray
    imputed: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.overlaps = np.asarray(self.overlaps, dtype=np.int64)
        n = len(self.languages)
        if self.values.shape != (n, n) or self.overlaps.shape != (n, n):
            raise ValueError("matrix shape does not match language count")
        self.values.setflags(write=False)
        self.overlaps.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.languages)

    def undefined_pairs(self) -> list[tuple[str, str]]:
        """Unordered language pairs with zero overlap (undefined distance)."""
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if self.overlaps[i, j] == 0:
                    out.append((self.languages[i], self.languages[j]))
        return out


def _pair_block(args) -> list[tuple[int, int, float, int]]:
    lexicons, pairs, use_variants = args
    out = []
    for i, j in pairs:
        value, overlap = lexical_distance(lexicons[i], lexicons[j], use_variants)
        out.append((i, j, value, overlap))
    return out


def distance_matrix(
    corpus: Corpus,
    use_variants: bool = False,
    n_jobs: int = 1,
    min_overlap_warn: int = DEFAULT_MIN_OVERLAP_WARN,
) -> DistanceMatrix:
    """All pairwise lexical distances of a corpus.

    Every unordered pair is computed once; for N languages that is
    N(N-1)/2 entries. With ``n_jobs > 1`` the pairs are split over worker
    processes; each pair lands in its own slot and every per-pair sum is
    exactly rounded, so the result is bit-identical to a serial run.

    Undefined pairs (zero overlap) are kept as ``nan`` with a summary
    warning; pairs whose overlap is positive but below
    ``min_overlap_warn`` are reported as statistically weak.
    """
    lexicons = corpus.lexicons
    n = len(lexicons)
    values = np.zeros((n, n), dtype=float)
    overlaps = np.zeros((n, n), dtype=np.int64)
    for i, lx in enumerate(lexicons):
        overlaps[i, i] = len(lx.entries)

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if n_jobs > 1 and len(pairs) > 1:
        blocks = [
            (lexicons, pairs[k::n_jobs], use_variants) for k in range(n_jobs)
        ]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = [entry for block in pool.map(_pair_block, blocks) for entry in block]
    else:
        results = _pair_block((lexicons, pairs, use_variants))

    for i, j, value, overlap in results:
        values[i, j] = values[j, i] = value
        overlaps[i, j] = overlaps[j, i] = overlap

    matrix = DistanceMatrix(list(corpus.languages), values, overlaps)
    undefined = matrix.undefined_pairs()
    if undefined:
        logger.warning(
            "%d language pair(s) share no meanings and have undefined distance: %s",
            len(undefined), ", ".join(f"{a}/{b}" for a, b in undefined),
        )
    weak = [
        (corpus.languages[i], corpus.languages[j], int(overlaps[i, j]))
        for i, j in pairs
        if 0 < overlaps[i, j] < min_overlap_warn
    ]
    if weak:
        logger.warning(
            "%d language pair(s) rest on fewer than %d shared meanings: %s",
            len(weak), min_overlap_warn,
            ", ".join(f"{a}/{b} ({k})" for a, b, k in weak),
        )
    return matrix


def impute_undefined(matrix: DistanceMatrix) -> DistanceMatrix:
    """Replace undefined entries with the mean of all defined distances.

    The imputed pairs are recorded on the result so downstream output can
    label them. Raises :class:`UndefinedPairError` when nothing is
    defined to average over.
    """
    undefined = matrix.undefined_pairs()
    if not undefined:
        return matrix
    n = matrix.n
    iu = np.triu_indices(n, k=1)
    defined = matrix.values[iu][matrix.overlaps[iu] > 0]
    if defined.size == 0:
        raise UndefinedPairError("no defined pairs to impute from")
    fill = float(defined.mean())
    values = matrix.values.copy()
    index = {name: k for k, name in enumerate(matrix.languages)}
    for a, b in undefined:
        i, j = index[a], index[b]
        values[i, j] = values[j, i] = fill
    return DistanceMatrix(
        list(matrix.languages), values, matrix.overlaps.copy(),
        imputed=tuple(undefined),
    )


# ---------------------------------------------------------------------------
# serialization

def _matrix_tsv(languages: list[str], cells: list[list[str]]) -> str:
    lines = ["\t".join([""] + languages)]
    for name, row in zip(languages, cells):
        lines.append("\t".join([name] + row))
    return "\n".join(lines) + "\n"


def distance_tsv(matrix: DistanceMatrix) -> str:
    """Full symmetric matrix as TSV, distances with 6 decimal digits."""
    cells = [
        ["nan" if math.isnan(v) else f"{v:.6f}" for v in row]
        for row in matrix.values
    ]
    return _matrix_tsv(matrix.languages, cells)


def overlap_tsv(matrix: DistanceMatrix) -> str:
    """Companion matrix of shared-meaning counts as TSV."""
    cells = [[str(int(v)) for v in row] for row in matrix.overlaps]
    return _matrix_tsv(matrix.languages, cells)


def matrix_to_json_dict(matrix: DistanceMatrix) -> dict:
    """Lossless JSON bundle ``{languages, values, overlaps}``; nan -> null."""
    values = [
        [None if math.isnan(v) else v for v in row] for row in matrix.values
    ]
    bundle = {
        "languages": list(matrix.languages),
        "values": values,
        "overlaps": [[int(v) for v in row] for row in matrix.overlaps],
    }
    if matrix.imputed:
        bundle["imputed"] = [list(pair) for pair in matrix.imputed]
    return bundle


def matrix_from_json_dict(bundle: dict) -> DistanceMatrix:
    values = np.array(
        [[math.nan if v is None else v for v in row] for row in bundle["values"]],
        dtype=float,
    )
    return DistanceMatrix(
        list(bundle["languages"]),
        values,
        np.array(bundle["overlaps"], dtype=np.int64),
        imputed=tuple((a, b) for a, b in bundle.get("imputed", [])),
    )


def write_distance_files(matrix: DistanceMatrix, out_dir: str | Path,
                         stem: str = "distance") -> list[Path]:
    """Write ``<stem>.tsv``, ``overlap.tsv``, and ``<stem>.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.tsv", out / "overlap.tsv", out / f"{stem}.json"]
    paths[0].write_text(distance_tsv(matrix), encoding="utf-8")
    paths[1].write_text(overlap_tsv(matrix), encoding="utf-8")
    paths[2].write_text(
        json.dumps(matrix_to_json_dict(matrix), indent=2) + "\n", encoding="utf-8"
    )
    return paths


def read_matrix_json(path: str | Path) -> DistanceMatrix:
    with open(path, encoding="utf-8") as fh:
        return matrix_from_json_dict(json.load(fh))
