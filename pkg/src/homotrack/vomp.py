"""Variable-order Markov model over signed crossing letters.

Scores full crossing words by a chain-rule product of Laplace-smoothed
conditional letter probabilities (context = longest observed suffix up to
order D, words terminated by a sentinel symbol).  The conditional belief over
full words given a partial word keeps only training-support words whose
prefix matches, renormalized; an empty compatible set falls back to the full
training support so tracking survives misinferred partial words.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import is_compatible

TERMINAL = 0  # letters are nonzero signed ints, so 0 is free


@dataclass(frozen=True)
class HomotopicBelief:
    """Discrete distribution over full crossing words."""

    support: tuple            # tuple of words (tuples of ints)
    probs: np.ndarray         # (len(support),), sums to 1

    def __post_init__(self):
        assert abs(float(self.probs.sum()) - 1.0) < 1e-9, "belief not normalized"

    def prob_of(self, word) -> float:
        word = tuple(word)
        for w, p in zip(self.support, self.probs):
            if w == word:
                return float(p)
        return 0.0

    def as_dict(self) -> dict:
        return {w: float(p) for w, p in zip(self.support, self.probs)}

    def is_point_mass(self, tol: float = 1e-12) -> bool:
        return bool(self.probs.max() >= 1.0 - tol)


class VompModel:
    """Context-tree letter counts plus the training support."""

    def __init__(self, max_order: int = 3, alpha: float = 1.0):
        if max_order < 0:
            raise ValueError("max_order must be >= 0")
        self.max_order = max_order
        self.alpha = float(alpha)
        self.counts: dict[tuple, dict[int, float]] = {}
        self.support: dict[tuple, float] = {}   # word -> multiplicity
        self.vocab: tuple = ()

    # -- training ----------------------------------------------------------

    @classmethod
    def fit(cls, words, max_order: int = 3, alpha: float = 1.0,
            multiplicities=None) -> "VompModel":
        """Count letter continuations after every context suffix up to D."""
        model = cls(max_order, alpha)
        words = [tuple(w) for w in words]
        if not words:
            raise ValueError("empty training corpus")
        if multiplicities is None:
            multiplicities = [1.0] * len(words)
        letters = set()
        for word, mult in zip(words, multiplicities):
            model.support[word] = model.support.get(word, 0.0) + float(mult)
            letters.update(word)
            augmented = word + (TERMINAL,)
            for i, sym in enumerate(augmented):
                for ell in range(min(model.max_order, i) + 1):
                    ctx = word[i - ell:i]
                    slot = model.counts.setdefault(ctx, {})
                    slot[sym] = slot.get(sym, 0.0) + float(mult)
        model.vocab = tuple(sorted(letters)) + (TERMINAL,)
        return model

    # -- scoring -----------------------------------------------------------

    def _cond_prob(self, ctx: tuple, sym: int) -> float:
        V = len(self.vocab)
        slot = self.counts.get(ctx, {})
        total = sum(slot.values())
        num = slot.get(sym, 0.0) + self.alpha
        den = total + self.alpha * V
        if den == 0.0:
            return 0.0
        return num / den

    def sequence_prob(self, word) -> float:
        """Chain-rule probability of a full word (0 outside the support)."""
        word = tuple(word)
        if word not in self.support:
            return 0.0
        augmented = word + (TERMINAL,)
        prob = 1.0
        for i, sym in enumerate(augmented):
            ctx = word[max(0, i - self.max_order):i]
            prob *= self._cond_prob(ctx, sym)
        return prob

    def sorted_support(self) -> list[tuple]:
        return sorted(self.support, key=lambda w: (len(w), w))

    def homotopic_belief(self, rho) -> HomotopicBelief:
        """Belief over support words compatible with the partial word `rho`.

        Probability proportional to the word's sequence probability,
        renormalized over the compatible set; incompatible `rho` falls back
        to the full support.
        """
        rho = tuple(rho)
        compatible = [w for w in self.sorted_support() if is_compatible(w, rho)]
        if not compatible:
            compatible = self.sorted_support()
        probs = np.array([self.sequence_prob(w) for w in compatible], dtype=float)
        total = probs.sum()
        if total <= 0.0:
            probs = np.full(len(compatible), 1.0 / len(compatible))
        else:
            probs = probs / total
        return HomotopicBelief(tuple(compatible), probs)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "max_order": self.max_order,
            "alpha": self.alpha,
            "vocab": list(self.vocab),
            "counts": [[list(ctx), [[s, c] for s, c in sorted(slot.items())]]
                       for ctx, slot in sorted(self.counts.items())],
            "support": [[list(w), m] for w, m in sorted(self.support.items())],
        })

    @classmethod
    def from_json(cls, blob: str) -> "VompModel":
        data = json.loads(blob)
        model = cls(data["max_order"], data["alpha"])
        model.vocab = tuple(data["vocab"])
        model.counts = {tuple(ctx): {int(s): float(c) for s, c in slot}
                        for ctx, slot in data["counts"]}
        model.support = {tuple(w): float(m) for w, m in data["support"]}
        return model
