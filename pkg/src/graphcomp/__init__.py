"""Graph complementation: discriminate edge tendency, synthesize the missing
half of the topology, and classify nodes with complemented graph convolution."""

__version__ = "0.1.0"

from .bench import (
    PRESETS,
    HomophilyReport,
    SyntheticSpec,
    erdos_renyi,
    filter_sweep,
    homophily_ratio,
    knn_graph,
    preset,
    spearman,
    synth_graph,
)
from .cgc import (
    CGCClassifier,
    CgcParams,
    ComplementedGraph,
    TrainReport,
    assemble_complemented_graph,
    cgc_forward,
    cgc_loss_and_grad,
    decompose_objective,
    objective_value,
    train_cgc,
)
from .complementation import (
    BackboneConfig,
    ComplementEdges,
    ComplementModel,
    PairSamplingConfig,
    RankingList,
    TopologyComplementer,
    build_ranking_list,
    grouping_loss,
    listnet_loss,
    pretrain_backbone,
    synthesize_topology,
    train_complement_model,
)
from .discrimination import (
    HETEROPHILY_PRONE,
    HOMOPHILY_PRONE,
    DiscriminationReport,
    GraphDiscriminator,
    cosine_similarity,
    discriminate,
    ks_statistic,
)
from .exceptions import GraphCompError, NumericalError, ValidationError
from .graph import Graph, NormalizedAdjacency, laplacian, normalize_adjacency, spmm
from .io import DatasetOnDisk, load_dataset, save_dataset, split_nodes
from .pipeline import RunConfig, dumps_report, pipeline
from .spectral import HIGH_PASS, LOW_PASS, SpectralFilter, filter_kernel, psd_check, verify_proposition1

__all__ = [name for name in dir() if not name.startswith("_")]
