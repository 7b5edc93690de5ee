"""Lowercase word-level tokenizer with character fallback."""

import json
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .constants import CHAR_PIECE_PREFIX, SPECIAL_TOKENS, UNK_ID
from .exceptions import EncoderError

_WORD_PATTERN = re.compile(r'\w+|[^\w\s]')


@dataclass(frozen=True)
class Piece:
    """A token id and the character range it covers in the source text."""

    id: int
    start: int
    end: int


class Tokenizer:
    """Maps text to vocabulary ids.

    Known words map to a single id. Unknown words fall back to one id per character,
    and characters never seen while building fall back to [UNK], so every produced id
    is inside the vocabulary."""

    def __init__(self, vocabulary: Sequence[str]) -> None:
        if tuple(vocabulary[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            msg = 'Vocabulary must start with the special tokens'
            raise EncoderError(msg)
        self.vocabulary = list(vocabulary)
        self._ids = {token: i for i, token in enumerate(self.vocabulary)}

    @classmethod
    def build(cls, texts: Iterable[str], max_vocabulary: int = 30000, min_count: int = 1) -> 'Tokenizer':
        """Build a vocabulary from a training corpus.

        :param texts: Corpus texts (queries and sentences).
        :param max_vocabulary: Upper bound on the vocabulary size, special and character pieces included.
        :param min_count: Words seen fewer times fall back to characters.
        :return: The tokenizer."""
        words: Counter[str] = Counter()
        chars: set[str] = set()
        for text in texts:
            for match in _WORD_PATTERN.finditer(text):
                word = match.group().lower()
                words[word] += 1
                chars.update(word)

        char_pieces = sorted(CHAR_PIECE_PREFIX + c for c in chars)
        budget = max(0, max_vocabulary - len(SPECIAL_TOKENS) - len(char_pieces))
        frequent = [w for w, n in sorted(words.items(), key=lambda item: (-item[1], item[0])) if n >= min_count]
        return cls([*SPECIAL_TOKENS, *char_pieces, *frequent[:budget]])

    @property
    def vocabulary_size(self) -> int:
        return len(self.vocabulary)

    def token_id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def tokenize(self, text: str) -> list[Piece]:
        pieces: list[Piece] = []
        for match in _WORD_PATTERN.finditer(text):
            word = match.group().lower()
            if word in self._ids:
                pieces.append(Piece(self._ids[word], match.start(), match.end()))
                continue
            for offset, char in enumerate(match.group()):
                start = match.start() + offset
                pieces.append(Piece(self.token_id(CHAR_PIECE_PREFIX + char.lower()), start, start + 1))
        return pieces

    def encode(self, text: str) -> list[int]:
        return [piece.id for piece in self.tokenize(text)]

    def to_json(self) -> str:
        return json.dumps({'vocabulary': self.vocabulary}, ensure_ascii=False)

    @classmethod
    def from_json(cls, data: str) -> 'Tokenizer':
        return cls(json.loads(data)['vocabulary'])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding='utf-8')

    @classmethod
    def load(cls, path: str | Path) -> 'Tokenizer':
        return cls.from_json(Path(path).read_text(encoding='utf-8'))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Tokenizer) and self.vocabulary == other.vocabulary

    __hash__ = None
