"""Automatic derivation, closure and validation of moment equations for network dynamics."""

from .closure import ClosureFormula, ClosureOptions, closure_alternatives, close_system, decomposition_plan, denormalize
from .config import CapacityError, ValidationError
from .derivation import LinComb, MomentSystem, RateModel, build_hierarchy, conservation_relations, derive_equation, eliminate, sis_rates
from .estimator import MeanFieldModel
from .graph_core import SmallGraph, canonical_form, enumerate_connected_graphs, junction_graph, power_graph
from .motif_algebra import Motif, enumerate_motifs, parse_motif
from .network_models import Network, NetworkSpec, SubgraphCensus, census_exhaustive, generate
from .odesys import ClosedSystem, analytic_reference, bifurcation_scan, integrate, steady_states
from .pipeline import derive_system, mean_field_model

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ClosedSystem",
    "ClosureFormula",
    "ClosureOptions",
    "LinComb",
    "MeanFieldModel",
    "MomentSystem",
    "Motif",
    "Network",
    "NetworkSpec",
    "RateModel",
    "SmallGraph",
    "SubgraphCensus",
    "ValidationError",
    "analytic_reference",
    "bifurcation_scan",
    "build_hierarchy",
    "canonical_form",
    "census_exhaustive",
    "close_system",
    "closure_alternatives",
    "conservation_relations",
    "decomposition_plan",
    "denormalize",
    "derive_equation",
    "derive_system",
    "eliminate",
    "enumerate_connected_graphs",
    "enumerate_motifs",
    "generate",
    "integrate",
    "junction_graph",
    "mean_field_model",
    "parse_motif",
    "power_graph",
    "sis_rates",
    "steady_states",
]
