"""Corpus engineering and evaluation toolkit for legal-document NER.

The package covers the full desk-scale loop: annotation ingestion and
validation, Cyrillic-to-Latin transliteration, sentence segmentation,
tagging-scheme encoding/decoding, WordPiece tokenization with label
alignment, stratified document partitioning for cross-validation,
baseline taggers, exact-match evaluation with macro-averaged metrics,
noise-robustness testing, and a calculator for replaced-token-detection
pre-training losses.
"""

from .corpus import (
    CATEGORY_NAMES,
    CharSpan,
    Corpus,
    Document,
    ENTITY_ORDER,
    EntityType,
    Sentence,
    filter_spanless,
    parse_annotations,
    serialize_annotations,
    type_counts,
    validate_spans,
)
from .crossval import CVReport, TaggerSpec, cross_validate
from .electra import ElectraBatch, combined_loss, discriminator_loss, generator_loss
from .errors import (
    AdapterError,
    AlignmentError,
    CodecError,
    LegalNerError,
    ModelIOError,
    ParseError,
    ValidationError,
)
from .metrics import (
    ConfusionMatrix,
    entity_exact_match,
    macro_average,
    micro_average,
    per_class_metrics,
)
from .partition import (
    Partition,
    balance_report,
    deduplicate_subsets,
    feature_vector,
    kmeans_lp,
    stratified_partition,
)
from .robustness import NoiseSpec, inject_noise, robustness_eval
from .schemes import (
    Label,
    TagScheme,
    convert_scheme,
    decode_labels,
    encode_labels,
    label_inventory,
    validate_labels,
)
from .segment import split_sentences
from .seeds import derive_seed
from .taggers import (
    DictionaryTagger,
    ExternalTagger,
    OracleTagger,
    PerceptronTagger,
    load_model,
    save_model,
    train_dictionary,
    train_linear,
)
from .tokens import Token, pretokenize
from .translit import transliterate, transliterate_corpus, transliterate_sentence
from .wordpiece import (
    TokenizedSentence,
    Vocab,
    align_labels,
    build_vocab,
    chunk_sequences,
    wordpiece_tokenize,
)

__version__ = "0.1.0"
