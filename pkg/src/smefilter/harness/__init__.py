from .figures import figure_scenarios, run_figure
from .io import export_csv, read_csv
from .runner import AggregateResult, run_scenario, run_scenarios
from .scenario import Reference, Scenario, load_scenario, scenario_from_config

__all__ = [
    "AggregateResult", "Reference", "Scenario", "export_csv", "figure_scenarios", "load_scenario",
    "read_csv", "run_figure", "run_scenario", "run_scenarios", "scenario_from_config",
]
