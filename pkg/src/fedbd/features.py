"""Hashed bag-of-n-grams text features.

Maps text to fixed-width sparse vectors with a seeded multiplicative hash, so
the downstream classifier needs no vocabulary, no fitting and no external ML
tooling. Stateless and deterministic: the same text always produces the same
vector, regardless of what was featurized before.
"""

import string
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

_PUNCT = string.punctuation
_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_GOLDEN64 = 0x9E3779B97F4A7C15
_NGRAM_SEP = "\x1f"


@dataclass(frozen=True)
class FeaturizerConfig:
    dim: int = 4096
    ngram_max: int = 2
    lowercase: bool = True
    hash_seed: int = 0

    def __post_init__(self):
        if self.dim < 256 or self.dim & (self.dim - 1) != 0:
            raise ValueError(f"dim must be a power of two >= 256, got {self.dim}")
        if self.ngram_max not in (1, 2):
            raise ValueError(f"ngram_max must be 1 or 2, got {self.ngram_max}")


@dataclass
class FeatureVector:
    """Sparse L2-normalized term counts; empty text gives an empty vector."""

    dim: int
    indices: np.ndarray  # strictly increasing int64 positions < dim
    values: np.ndarray   # float64, unit L2 norm when non-empty


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on whitespace, strip surrounding ASCII punctuation, drop empties."""
    tokens = []
    for raw in text.split():
        tok = raw.strip(_PUNCT)
        if not tok:
            continue
        tokens.append(tok.lower() if lowercase else tok)
    return tokens


def _hash64(data: bytes, seed: int) -> int:
    # FNV-1a with a seed-perturbed offset basis.
    h = (_FNV_OFFSET ^ ((seed * _GOLDEN64) & _MASK64)) & _MASK64
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _ngram_index(tokens: tuple[str, ...], cfg: FeaturizerConfig) -> int:
    return _hash64(_NGRAM_SEP.join(tokens).encode("utf-8"), cfg.hash_seed) % cfg.dim


def _count_indices(text: str, cfg: FeaturizerConfig) -> Counter:
    toks = tokenize(text, cfg.lowercase)
    counts: Counter = Counter()
    for n in range(1, cfg.ngram_max + 1):
        for i in range(len(toks) - n + 1):
            counts[_ngram_index(tuple(toks[i : i + n]), cfg)] += 1
    return counts


def featurize(text: str, cfg: FeaturizerConfig) -> FeatureVector:
    counts = _count_indices(text, cfg)
    if not counts:
        return FeatureVector(
            dim=cfg.dim,
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
        )
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    values /= np.linalg.norm(values)
    return FeatureVector(dim=cfg.dim, indices=indices, values=values)


def featurize_texts(texts: list[str], cfg: FeaturizerConfig) -> sparse.csr_matrix:
    """Featurize many texts into one CSR matrix, row order preserved."""
    indptr = [0]
    col_indices: list[int] = []
    data: list[float] = []
    for text in texts:
        fv = featurize(text, cfg)
        col_indices.extend(fv.indices.tolist())
        data.extend(fv.values.tolist())
        indptr.append(len(col_indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(col_indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(texts), cfg.dim),
    )


def payload_feature_indices(payload: str, cfg: FeaturizerConfig) -> frozenset[int]:
    """Hashed indices of all n-grams lying wholly inside the trigger payload.

    Boundary n-grams that span the join between original text and payload are
    instance-dependent and excluded; this set is what every triggered instance
    is guaranteed to activate.
    """
    return frozenset(_count_indices(payload, cfg).keys())
