"""Graph embedding toolkit.

Random-walk point embeddings (DeepWalk, node2vec, LINE), Gaussian
embeddings with uncertainty (attributed encoder and knowledge-graph
training), and an evaluation harness for link prediction, node
classification, clustering, uncertainty, and snapshot stability.
"""

from .graph import (EdgeSplit, Graph, IdMap, KnowledgeTriples, ParseError,
                    SnapshotSequence, TemporalGraph, ValidationError,
                    dump_edge_list, is_temporally_valid_walk,
                    k_hop_neighborhoods, load_attributes, load_edge_list,
                    load_knowledge_triples, load_labels, load_snapshots,
                    load_temporal_edges, shortest_path_length, split_edges)
from .walks import (TransitionTable, WalkConfig, WalkCorpus, context_pairs,
                    preprocess_transition_probs, simulate_walks)
from .sgns import (NoiseDistribution, PointEmbedding, SgnsConfig,
                   init_embeddings, line_first_order_loss,
                   line_second_order_loss, negative_sample, sgns_pair_loss,
                   train_line, train_skipgram)
from .gauss import (AdamState, EncoderParams, G2GConfig, G2GResult,
                    GaussianEmbedding, Kg2eConfig, KgEmbedding, Triplet,
                    TripletSet, adam_step, corrupt_triple, el_energy, encode,
                    kl_energy, margin_ranking_loss, sample_triplets,
                    square_exp_loss, train_g2g, train_kg2e, w2_distance)
from .evaluate import (MetricsReport, intrinsic_dimension_estimate, kmeans,
                       link_prediction, nmi_and_accuracy, node_classification,
                       pca_project, silhouette, similarity,
                       stability_constant, uncertainty_per_dimension)

__version__ = "0.1.0"
