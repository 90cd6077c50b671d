"""Patent-to-patent similarity search, CPC classification, and evaluation."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .ann import AnnIndex, load_index, recall_vs_exact, save_index
from .classifier import (
    PredictionResult,
    predict,
    predict_batch_loo,
    predict_from_neighbors,
    predict_topn,
)
from .errors import (
    CorpusError,
    FormatError,
    IngestError,
    PairScoringError,
    PatsimError,
    SearchError,
)
from .metrics import (
    MetricsReport,
    evaluate_split,
    score,
    section_level_metrics,
    sweep_k,
    sweep_to_csv,
    top_n_accuracy,
)
from .pairs import (
    SamplingPlan,
    SamplingReport,
    SentencePair,
    TfidfPairScorer,
    count_pairs,
    export_sts,
    label_pairs,
    read_sts,
    sample_pairs,
)
from .similarity import NeighborList, batch_top_k, cosine, euclidean, top_k_exact
from .store import (
    CorpusStore,
    FilterReport,
    IngestReport,
    LabelDistribution,
    LabelVocabulary,
    PatentRecord,
    cpc_section,
    filter_by_label_support,
    ingest_jsonl,
    is_cpc_code,
    label_distribution,
    load_binary,
    normalize,
    save_binary,
    validate_cpc_code,
)

__version__ = "0.1.0"
