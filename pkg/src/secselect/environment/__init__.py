from secselect.environment.env import (
    AcceptRecord,
    EpisodeState,
    ServiceSelectionEnv,
    Status,
    Task,
    TaskSampler,
)
from secselect.environment.ingest import Amp, Path, haversine_m, ingest_paths
from secselect.environment.scenario import (
    OperationUniverse,
    Provider,
    Scenario,
    ServiceDescriptor,
    generate_scenario_skr,
    generate_scenario_udr,
    regenerate,
    zipf_weights,
)

__all__ = [
    "AcceptRecord",
    "Amp",
    "EpisodeState",
    "OperationUniverse",
    "Path",
    "Provider",
    "Scenario",
    "ServiceDescriptor",
    "ServiceSelectionEnv",
    "Status",
    "Task",
    "TaskSampler",
    "generate_scenario_skr",
    "generate_scenario_udr",
    "haversine_m",
    "ingest_paths",
    "regenerate",
    "zipf_weights",
]
