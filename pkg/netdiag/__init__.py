import typing as t
from importlib import import_module

if t.TYPE_CHECKING:
    from netdiag.algebraic import (
        GenericVerdict,
        certify_initial_state,
        generic_detectable_mc,
        generic_isolable_mc,
        is_detectable,
        is_distinguishable,
        is_isolable,
        transfer_check,
        unobservable_subspace,
        witness_initial_state,
    )
    from netdiag.config import AnalysisConfig, configure_logging
    from netdiag.description import NetworkDescription
    from netdiag.netgraph import (
        FREE,
        FailureScenario,
        FailureSet,
        NetworkModel,
        node_failure_to_links,
        shortest_distance,
    )
    from netdiag.placement import (
        HittingSetInstance,
        PlacementResult,
        build_detect_instance,
        build_isolate_instance,
        detect_sensor_locations,
        exact_hitting_set,
        greedy_hitting_set,
    )
    from netdiag.sim import detection_time, export_csv, propagate, residual
    from netdiag.structural import (
        StructuralVerdict,
        TransferIndex,
        generically_detectable,
        generically_isolable,
        transfer_index,
    )
    from netdiag.sysmodel import (
        SubsystemDynamics,
        WeightRealization,
        assemble_lumped,
        realize_pattern,
        sample_weights,
    )

__all__ = (
    "FREE",
    "AnalysisConfig",
    "FailureScenario",
    "FailureSet",
    "GenericVerdict",
    "HittingSetInstance",
    "NetworkDescription",
    "NetworkModel",
    "PlacementResult",
    "StructuralVerdict",
    "SubsystemDynamics",
    "TransferIndex",
    "WeightRealization",
    "assemble_lumped",
    "build_detect_instance",
    "build_isolate_instance",
    "certify_initial_state",
    "configure_logging",
    "detect_sensor_locations",
    "detection_time",
    "exact_hitting_set",
    "export_csv",
    "generic_detectable_mc",
    "generic_isolable_mc",
    "generically_detectable",
    "generically_isolable",
    "greedy_hitting_set",
    "is_detectable",
    "is_distinguishable",
    "is_isolable",
    "node_failure_to_links",
    "propagate",
    "realize_pattern",
    "residual",
    "sample_weights",
    "shortest_distance",
    "transfer_check",
    "transfer_index",
    "unobservable_subspace",
    "witness_initial_state",
)

_dynamic_imports: dict[str, tuple[str | None, str]] = {
    "FREE": (__spec__.parent, ".netgraph"),
    "AnalysisConfig": (__spec__.parent, ".config"),
    "FailureScenario": (__spec__.parent, ".netgraph"),
    "FailureSet": (__spec__.parent, ".netgraph"),
    "GenericVerdict": (__spec__.parent, ".algebraic"),
    "HittingSetInstance": (__spec__.parent, ".placement"),
    "NetworkDescription": (__spec__.parent, ".description"),
    "NetworkModel": (__spec__.parent, ".netgraph"),
    "PlacementResult": (__spec__.parent, ".placement"),
    "StructuralVerdict": (__spec__.parent, ".structural"),
    "SubsystemDynamics": (__spec__.parent, ".sysmodel"),
    "TransferIndex": (__spec__.parent, ".structural"),
    "WeightRealization": (__spec__.parent, ".sysmodel"),
    "assemble_lumped": (__spec__.parent, ".sysmodel"),
    "build_detect_instance": (__spec__.parent, ".placement"),
    "build_isolate_instance": (__spec__.parent, ".placement"),
    "certify_initial_state": (__spec__.parent, ".algebraic"),
    "configure_logging": (__spec__.parent, ".config"),
    "detect_sensor_locations": (__spec__.parent, ".placement"),
    "detection_time": (__spec__.parent, ".sim"),
    "exact_hitting_set": (__spec__.parent, ".placement"),
    "export_csv": (__spec__.parent, ".sim"),
    "generic_detectable_mc": (__spec__.parent, ".algebraic"),
    "generic_isolable_mc": (__spec__.parent, ".algebraic"),
    "generically_detectable": (__spec__.parent, ".structural"),
    "generically_isolable": (__spec__.parent, ".structural"),
    "greedy_hitting_set": (__spec__.parent, ".placement"),
    "is_detectable": (__spec__.parent, ".algebraic"),
    "is_distinguishable": (__spec__.parent, ".algebraic"),
    "is_isolable": (__spec__.parent, ".algebraic"),
    "node_failure_to_links": (__spec__.parent, ".netgraph"),
    "propagate": (__spec__.parent, ".sim"),
    "realize_pattern": (__spec__.parent, ".sysmodel"),
    "residual": (__spec__.parent, ".sim"),
    "sample_weights": (__spec__.parent, ".sysmodel"),
    "shortest_distance": (__spec__.parent, ".netgraph"),
    "transfer_check": (__spec__.parent, ".algebraic"),
    "transfer_index": (__spec__.parent, ".structural"),
    "unobservable_subspace": (__spec__.parent, ".algebraic"),
    "witness_initial_state": (__spec__.parent, ".algebraic"),
}


def __getattr__(attr: str) -> object:
    """
    Loads the public API lazily so importing the package does not pull in
    scipy and networkx
    """

    dynamic_attr = _dynamic_imports.get(attr)
    if dynamic_attr is None:
        raise AttributeError(f"module {__name__!r} has no attribute {attr!r}")

    package, module_name = dynamic_attr
    module = import_module(module_name, package=package)
    result = getattr(module, attr)

    g = globals()
    for k, (_, other) in _dynamic_imports.items():
        if other == module_name:
            g[k] = getattr(module, k)
    return result


def __dir__() -> list[str]:
    return list(__all__)
