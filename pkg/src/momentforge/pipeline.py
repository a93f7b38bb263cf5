"""End-to-end assembly: hierarchy, conservation, elimination, closure."""

from .closure import ClosureOptions, close_system
from .config import ValidationError
from .derivation import build_hierarchy, conservation_relations, eliminate, sis_rates
from .motif_algebra import parse_motif
from .network_models import NetworkSpec, census_analytic, census_for_spec


def census_classes(census, kmax):
    """Graph classes with nonzero count up to order kmax."""
    return [g for g in census.classes() if g.order <= kmax]


def derive_system(k, rates, census, degree_homogeneous=True, targets=None):
    """Pruned, eliminated (unclosed) hierarchy of order k on a network with `census`."""
    if census.kmax < k + 1:
        raise ValidationError(f"census covers order {census.kmax}, need {k + 1}")
    classes = census_classes(census, k + 1)
    system = build_hierarchy(k, rates, classes)
    rels = conservation_relations(k, rates.n, census, classes, degree_homogeneous)
    if isinstance(targets, (list, tuple)):
        targets = [parse_motif(t, rates.species) if isinstance(t, str) else t for t in targets]
    return eliminate(system, rels, targets)


def mean_field_model(k, rates, census, degree_homogeneous=True, route="auto", targets=None, overrides=None):
    """Closed MFk system (an odesys.ClosedSystem)."""
    system = derive_system(k, rates, census, degree_homogeneous, targets)
    options = ClosureOptions(route=route, overrides=dict(overrides or {}))
    return close_system(system, census, options)


def sis_model(k, network="lattice:2:32", route="auto", seed=0, targets=None):
    """Convenience: SIS MFk for a network spec string or a census object."""
    if isinstance(network, str):
        spec = NetworkSpec.parse(network)
        census = census_for_spec(spec, k + 1, seed)
        homogeneous = spec.kind in ("lattice", "random_regular", "complete")
    else:
        census, homogeneous = network, True
    return mean_field_model(k, sis_rates(), census, homogeneous, route, targets)


def regular_census(kappa, kmax=3, phi=0):
    return census_analytic("regular", kappa, 1, phi, kmax)


def er_census(kappa, kmax=3):
    return census_analytic("er", kappa, 1, 0, kmax)
