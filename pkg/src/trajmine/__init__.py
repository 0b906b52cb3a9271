"""Sequential pattern mining of categorical event trajectories."""

from trajmine.clustering import Dendrogram, GroupTree, StepwiseParams, bisect_group, cut, group_stats, stepwise_cluster, ward_linkage
from trajmine.distance import CondensedDistanceMatrix, dissimilarity, distance_matrix, distance_stats, lcs_length
from trajmine.markov import ChainGraph, PositionedState, TransitionModel, extract_chains, fit_transitions, position_histogram, to_dot
from trajmine.model import EventAlphabet, EventRecord, EventType, Sequence, SequenceBank, build_sequence, ingest, remap_rvad_explant
from trajmine.subseq import contains, discriminate, mine_frequent

__version__ = "0.1.0"
