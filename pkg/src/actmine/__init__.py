"""Introspection toolkit for trained graph convolutional networks.

Mines subjectively interesting activation rules from hidden layers, turns
them into instance-level explanation masks scored with fidelity metrics, and
redescribes them with interpretable subgraph and numeric subgroup patterns.
"""

from .background import BackgroundModel, fit, ic, update
from .explain import (Explanation, MetricReport, build_explanations,
                      build_mask, fidelity, infidelity, mimic_tree,
                      polarized_fidelity, sparsity)
from .gcn import (ActivationMatrix, GcnModel, Mask, activation_matrix,
                  apply_mask, forward, load_model, save_model)
from .graphs import (EgoGraph, GraphDataset, LabeledGraph, ego_graph,
                     geodesic_distances, load_dataset, save_dataset)
from .mining import (ActivationRule, MinerParams, SearchNode, closure,
                     description_length, load_rules, mine_all, mine_best,
                     save_rules, si_sg, subjective_interest, ub_si)
from .numeric import (IntervalPattern, NodeFeatureTable,
                      mine_numeric_subgroup, propositionalize)
from .subgraph import (GraphPattern, SubgroupDataset, build_ego_dataset,
                       mine_top_subgraph, min_dfs_code, subgraph_isomorphic,
                       wracc)

__version__ = "0.1.0"
