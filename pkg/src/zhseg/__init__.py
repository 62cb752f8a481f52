"""Chinese word segmentation with a perplexity-aware CRF decoder."""

from ._kernels import backend_name
from .corpus import (
    B,
    DatasetStats,
    E,
    M,
    S,
    TAG_NAMES,
    TaggedSentence,
    apply_char_map,
    bmes_decode,
    bmes_encode,
    dataset_stats,
    legal_tag_path,
    load_char_map,
    load_corpus,
    normalize,
)
from .decode import (
    EXHAUSTIVE,
    DecodeResult,
    DecoderConfig,
    Pipeline,
    brute_force_decode,
    pcrf_decode,
    segment,
    softmax_decode,
    viterbi,
)
from .emission import (
    EmissionMatrix,
    EmissionModel,
    TransitionMatrix,
    estimate_transitions_mle,
    extract_features,
    load_emissions,
    load_model,
    save_emissions,
    save_model,
    score_sentence,
    train_perceptron,
)
from .errors import (
    DegenerateVocab,
    EmptyCorpus,
    EmptyInput,
    EmptyWord,
    FormatError,
    LengthMismatch,
    LmMissing,
    OrderMismatch,
    RowCountMismatch,
    SegError,
    TooLong,
    Utf8Error,
)
from .evaluate import (
    BenchReport,
    ConsistencyReport,
    EvalReport,
    bench_throughput,
    dataset_distance,
    f1_score,
    label_consistency,
    map_sentences,
)
from .lm import NGramLM, PplResult, PplState, load_arpa, save_arpa, train_lm

__version__ = "0.1.0"

__all__ = [
    "B", "M", "E", "S", "TAG_NAMES",
    "TaggedSentence", "DatasetStats",
    "normalize", "apply_char_map", "load_char_map",
    "bmes_encode", "bmes_decode", "legal_tag_path",
    "load_corpus", "dataset_stats",
    "NGramLM", "PplResult", "PplState", "train_lm", "save_arpa", "load_arpa",
    "EmissionMatrix", "EmissionModel", "TransitionMatrix",
    "extract_features", "score_sentence", "train_perceptron",
    "estimate_transitions_mle",
    "save_model", "load_model", "save_emissions", "load_emissions",
    "DecoderConfig", "DecodeResult", "Pipeline", "EXHAUSTIVE",
    "softmax_decode", "viterbi", "pcrf_decode", "brute_force_decode", "segment",
    "EvalReport", "ConsistencyReport", "BenchReport",
    "f1_score", "label_consistency", "dataset_distance", "bench_throughput",
    "map_sentences",
    "SegError", "EmptyWord", "Utf8Error", "EmptyCorpus", "DegenerateVocab",
    "EmptyInput", "FormatError", "OrderMismatch", "RowCountMismatch",
    "LengthMismatch", "LmMissing", "TooLong",
    "backend_name",
    "__version__",
]
