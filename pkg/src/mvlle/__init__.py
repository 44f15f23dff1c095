"""Multi-view locally linear embedding with graph-consensus regularization."""

from .data import MultiViewDataset, SplitIndices, load_views, split, synth_multiview, write_views
from .evaluate import (
    ClassificationReport,
    RetrievalReport,
    accuracy,
    baseline_le,
    baseline_lle,
    classify_embedding,
    classify_protocol,
    concat_embeddings,
    one_nn,
    retrieval_metrics,
    retrieval_protocol,
)
from .graphs import (
    ConsensusVariant,
    KernelSpec,
    consensus_matrix,
    embedding_cost,
    kernel_matrix,
    knn,
    lle_weights,
    quadratic_form,
)
from .solver import (
    FitConfig,
    FitResult,
    ViewState,
    fit,
    init_view,
    objective,
    refresh_consensus,
    subproblem_matrix,
    symmetric_eig_smallest,
    update_view,
)

__version__ = "0.1.0"
