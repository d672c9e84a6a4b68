"""Word-level tokenizer with a frequency-built vocabulary.

Text is lowercased and split into tag atoms (<search>, </answer>, ...),
word characters runs, or single other characters.  The vocabulary keeps the
most frequent tokens up to the cap, with lexicographic tie-breaking so
rebuilds are deterministic.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from typing import Iterable

from ..errors import EmptyCorpus

PAD, BOS, EOS, UNK, SEP = "<pad>", "<bos>", "<eos>", "<unk>", "<sep>"
SPECIALS = (PAD, BOS, EOS, UNK, SEP)

_ATOMS = ("<search>", "</search>", "<answer>", "</answer>", "<information>", "</information>")
_TOKEN_RE = re.compile("|".join(re.escape(a) for a in _ATOMS) + r"|\w+|[^\w\s]")


def tokenize_text(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


class Tokenizer:
    def __init__(self, vocab: list[str]):
        if list(vocab[: len(SPECIALS)]) != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")
        self.vocab = list(vocab)
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        self.pad_id = self.index[PAD]
        self.bos_id = self.index[BOS]
        self.eos_id = self.index[EOS]
        self.unk_id = self.index[UNK]
        self.sep_id = self.index[SEP]

    def __len__(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        unk = self.unk_id
        return [self.index.get(tok, unk) for tok in tokenize_text(text)]

    def decode(self, ids: Iterable[int]) -> str:
        specials = set(range(len(SPECIALS)))
        return detokenize([self.vocab[i] for i in ids if i not in specials])

    def unk_rate(self, text: str) -> float:
        ids = self.encode(text)
        if not ids:
            return 0.0
        return sum(1 for i in ids if i == self.unk_id) / len(ids)

    def vocab_hash(self) -> str:
        payload = "\x00".join(self.vocab).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def build_vocab(texts: Iterable[str], max_vocab: int) -> Tokenizer:
    """Most frequent (then lexicographically first) tokens, after the specials."""
    counts: Counter[str] = Counter()
    seen_any = False
    for text in texts:
        seen_any = True
        counts.update(tokenize_text(text))
    if not seen_any or not counts:
        raise EmptyCorpus("cannot build a vocabulary from empty text")
    budget = max(0, max_vocab - len(SPECIALS))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = list(SPECIALS) + [tok for tok, _ in ranked[:budget]]
    return Tokenizer(vocab)
