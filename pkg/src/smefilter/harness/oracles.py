"""Property suites comparing the stochastic schemes against independent references."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..integrators import SchemeKind, StepScheme, lindblad_propagate
from ..metrics import trace_distance
from ..model import two_qubit_model
from .runner import run_scenario
from .scenario import Reference, Scenario


@dataclass
class OracleReport:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.6g} (threshold {self.threshold:g})"


def lindblad_snapshots(rho0, model, times_cycles, substeps_per_cycle=10_000):
    """Unconditioned solution at each snapshot time, integrated piecewise with RK4."""
    out = [np.array(rho0, dtype=complex)]
    for t0, t1 in zip(times_cycles[:-1], times_cycles[1:]):
        span = t1 - t0
        out.append(lindblad_propagate(out[-1], model, 2 * math.pi * span,
                                      max(1, round(span * substeps_per_cycle))))
    return np.array(out)


def ensemble_vs_lindblad(realizations=1000, steps_per_cycle=250, cycles=10, initial_state="mixed",
                         seed=1, tolerance=0.02, workers=None) -> OracleReport:
    s = Scenario(name="oracle_ensemble", initial_state=initial_state, scheme=StepScheme(SchemeKind.KRAUS),
                 steps_per_cycle=steps_per_cycle, cycles=cycles, realizations=realizations, seed=seed)
    result = run_scenario(s, workers)
    exact = lindblad_snapshots(s.initial_rho(), two_qubit_model(s.model_params), result.times)
    worst = float(np.max(trace_distance(result.mean_state, exact)))
    return OracleReport(f"ensemble mean vs Lindblad ({initial_state} start)", worst, tolerance, worst <= tolerance)


def scheme_agreement(realizations=20, steps_per_cycle=5000, seed=1, threshold=0.9999,
                     workers=None) -> OracleReport:
    s = Scenario(name="oracle_agreement", scheme=StepScheme(SchemeKind.KRAUS), steps_per_cycle=steps_per_cycle,
                 cycles=1, realizations=realizations, seed=seed, snapshot_stride=steps_per_cycle,
                 reference=Reference(StepScheme(SchemeKind.EULER_MILSTEIN), steps_per_cycle))
    result = run_scenario(s, workers)
    worst = float(np.min(result.samples["fidelity"][:, -1]))
    return OracleReport("Milstein vs Kraus fidelity after one cycle", worst, threshold, worst >= threshold)
