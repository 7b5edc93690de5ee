"""libirc - interpretable reading comprehension with a Can't-Answer label."""

from .constants import AnswerLabel
from .corpus import AnswerTarget, Example, Paragraph, Passage, Rationale, Sentence

__version__ = '0.0.1'

__all__ = [
    'AnswerLabel',
    'AnswerTarget',
    'Example',
    'Paragraph',
    'Passage',
    'Rationale',
    'Sentence',
]
