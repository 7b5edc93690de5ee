"""Constants used throughout libirc."""

from enum import StrEnum


class AnswerLabel(StrEnum):
    """Answer labels predicted by the answer module, in score-vector order."""

    YES = 'yes'
    NO = 'no'
    SPAN = 'span'
    CNA = 'cna'

    @property
    def index(self) -> int:
        return ANSWER_LABELS.index(self)


ANSWER_LABELS: tuple[AnswerLabel, ...] = tuple(AnswerLabel)
NUM_ANSWER_LABELS = len(ANSWER_LABELS)

# Answer string written for CNA in HotpotQA-schema prediction files
CNA_ANSWER = 'noanswer'

# Special tokens, fixed at the head of every vocabulary
PAD_TOKEN = '[PAD]'
UNK_TOKEN = '[UNK]'
CLS_TOKEN = '[CLS]'
SEP_TOKEN = '[SEP]'
CLS_Q_TOKEN = '[CLS_Q]'
SEP_Q_TOKEN = '[SEP_Q]'
CLS_S_TOKEN = '[CLS_S]'
SEP_S_TOKEN = '[SEP_S]'
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, CLS_Q_TOKEN, SEP_Q_TOKEN, CLS_S_TOKEN, SEP_S_TOKEN)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, CLS_Q_ID, SEP_Q_ID, CLS_S_ID, SEP_S_ID = range(len(SPECIAL_TOKENS))
CHAR_PIECE_PREFIX = '##'

# Segment map values for tokens that do not come from a sentence
SEGMENT_QUERY = -1
SEGMENT_MARKER = -2

# Packing limits
MAX_SEQUENCE_LENGTH = 512
MAX_QUERY_LENGTH = 64
MAX_SENTENCE_LENGTH = 160
MAX_SENTENCES = 20
MAX_PARAGRAPHS = 10

# Training defaults
LAMBDA_R = 0.1
LAMBDA_NA = 1.0
GUMBEL_TAU = 0.5
BATCH_SIZE = 72
PRETRAIN_EPOCHS = 5
E2E_EPOCHS = 2
LEARNING_RATE = 5e-5
WEIGHT_DECAY = 0.0
MAX_RATIONALES = 5
PARAGRAPH_PAIRS = 3
MAX_ANSWER_TOKENS = 30
PROB_EPSILON = 1e-7
LOGIT_CAP = 30.0

# Hyperparameter sweep grid for alpha / beta
SWEEP_START = 0.0
SWEEP_STOP = 0.9
SWEEP_STEP = 0.1

# Absent-gold-SF classes
ABSENT_SF_CLASSES = ('0', '1', '2', '3+')

# Example flags
FLAG_UNRESOLVABLE_SF = 'unresolvable_sf'
FLAG_SPAN_UNALIGNABLE = 'span_unalignable'
FLAG_AUGMENTED_CNA = 'augmented_cna'

# Checkpoint store layout
EXTRACTOR_FILE = 'extractor.pt'
ANSWERER_FILE = 'answerer.pt'
RANKER_FILE = 'ranker.pt'
VOCAB_FILE = 'vocab.json'
TRAINER_STATE_FILE = 'trainer_state.pt'
