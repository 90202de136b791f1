"""Removal-based attribution and amortized explanation for GNNs."""

__version__ = "0.1.0"

from .errors import DataError, NumericError
from .graph import (
    Graph,
    InducedSubgraph,
    as_node_set,
    induce,
    khop_neighbors,
    load_graphs,
    remove_nodes,
    sample_subset_with_anchor,
    save_graphs,
)
from .gcn import (
    GcnModel,
    LossSpec,
    TrainConfig,
    backward,
    gcn_forward,
    gradcheck,
    init_gcn,
    load_model,
    predict_scalar,
    save_model,
    train_target,
)
from .seeding import child_sequence, derive_rng, derive_seed
from .datasets import (
    GENERATORS,
    GeneratedDataset,
    gen_ba,
    gen_ba_2motifs,
    gen_ba_community,
    gen_ba_shapes,
    gen_big_ba,
    gen_tree_cycles,
    load_dataset,
    save_dataset,
)
from .attribution import (
    TargetContext,
    delta_fidelity,
    exact_attribution,
    exact_attribution_all,
    kept_value,
    mc_estimate,
    mi_value,
    subset_delta,
    target_context,
)
from .explainer import (
    Explanation,
    ExplainerConfig,
    ExplainerModel,
    embed,
    estimate_max_hop,
    explain,
    explainer_gradcheck,
    init_explainer,
    load_explainer,
    save_explainer,
    score_graph,
    score_node,
    single_embedding_ablation,
    train_explainer,
    train_mi_baseline,
)
from .evaluation import (
    CorrelationStudy,
    FidelityReport,
    ThroughputReport,
    auc_ground_truth,
    bench_throughput,
    correlation_study,
    fidelity_minus,
    fidelity_plus,
    fidelity_report,
    fidelity_to_csv,
    mean_fidelity,
    pearson,
    random_explanations,
    sparsity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
