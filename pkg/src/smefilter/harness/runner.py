"""Monte Carlo execution of scenarios.

Realizations are processed in fixed-size chunks, each chunk advancing all
of its realizations in lockstep as one numpy batch.  Chunks are farmed out
to a process pool and reduced in chunk order, so results do not depend on
the worker count.

Scenarios that share everything except the test scheme, grid and
quantization are run together: the reference trajectory is computed once
and every test trajectory is driven by sums of the same fine-grid Wiener
increments.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..control import Controller
from ..errors import PositivityBreach
from ..integrators import ConditionedFilter
from ..measurement import wiener_batch
from ..metrics import concurrence, fidelity, negativity, purity
from ..model import steps_to_dt, two_qubit_model
from ..qmat import hermitize
from .scenario import Scenario

CHUNK_SIZE = 250
WORKERS_ENV = "SMEFILTER_WORKERS"
POSITIVITY_FLOOR = 1e-8
POSITIVITY_BREACH = 1e-6
PURITY_SLACK = 1e-10


@dataclass
class AggregateResult:
    """Per-snapshot ensemble statistics for one scenario.

    ``metrics`` maps a metric name to ``(mean, stderr)`` arrays over
    ``times`` (cycles); ``samples`` keeps the per-realization values,
    shape ``(realizations, len(times))``.
    """

    scenario: Scenario
    times: np.ndarray
    metrics: dict
    samples: dict
    mean_state: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def mean(self, metric: str) -> np.ndarray:
        return self.metrics[metric][0]

    def stderr(self, metric: str) -> np.ndarray:
        return self.metrics[metric][1]

    def window(self, fraction: float = 0.2) -> slice:
        """Snapshots in the final ``fraction`` of the run (t > (1 - fraction) * T)."""
        cutoff = (1.0 - fraction) * self.times[-1]
        return slice(int(np.searchsorted(self.times, cutoff, side="right")), None)

    def steady(self, metric: str, fraction: float = 0.2) -> tuple[float, float]:
        """Mean over the steady-state window and its standard error across realizations."""
        per_real = self.samples[metric][:, self.window(fraction)].mean(axis=1)
        return float(per_real.mean()), _stderr(per_real)

    def time_average(self, metric: str) -> tuple[float, float]:
        """Average over all snapshots after t = 0, with standard error across realizations."""
        per_real = self.samples[metric][:, 1:].mean(axis=1)
        return float(per_real.mean()), _stderr(per_real)

    def steady_state(self, fraction: float = 0.2) -> np.ndarray:
        return self.mean_state[self.window(fraction)].mean(axis=0)


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------


def _group_key(s: Scenario):
    own_grid = s.steps_per_cycle if s.reference is None else None
    return (s.model_params, s.initial_state, s.initial_bloch, s.controller, s.cycles, s.realizations,
            s.seed, s.reference, s.snapshot_interval, own_grid)


def _state_metrics(rho, record_driven):
    w = np.linalg.eigvalsh(hermitize(rho))
    lowest = w[..., 0]
    if record_driven and np.any(lowest < -POSITIVITY_BREACH):
        raise PositivityBreach(f"Kraus-scheme state with eigenvalue {np.min(lowest):.3g}")
    return {
        "purity": purity(rho),
        "concurrence": concurrence(rho),
        "negativity": negativity(rho),
        "min_eigenvalue": lowest,
    }


class _Collector:
    def __init__(self, n_real, n_snap, dim):
        self.values = {}
        self.state_sum = np.zeros((n_snap, dim, dim), dtype=complex)
        self.n_real, self.n_snap = n_real, n_snap

    def put(self, k, metrics, rho):
        for name, v in metrics.items():
            self.values.setdefault(name, np.empty((self.n_real, self.n_snap)))[:, k] = v
        self.state_sum[k] = rho.sum(axis=0)


def _run_chunk(scenarios, realizations):
    """Run one chunk of realizations for a group of scenarios sharing a noise source."""
    head = scenarios[0]
    n_real = len(realizations)
    ref = head.reference
    fine_n = ref.steps_per_cycle if ref is not None else head.steps_per_cycle
    dt_fine = steps_to_dt(fine_n)
    interval = head.snapshot_interval
    fine_per_snap = int(interval * fine_n)
    n_snaps = int(Fraction(head.cycles) / interval)
    model = two_qubit_model(head.model_params)
    controller = Controller(head.controller)
    rho0 = np.broadcast_to(head.initial_rho(), (n_real, 4, 4)).copy()

    tests = []
    for s in scenarios:
        filt = ConditionedFilter(model, s.scheme, steps_to_dt(s.steps_per_cycle), controller, s.quant_bits)
        tests.append([s, filt, fine_n // s.steps_per_cycle, rho0.copy(), _Collector(n_real, n_snaps + 1, 4)])
    ref_filter = ref_col = None
    rho_ref = rho0.copy()
    if ref is not None:
        ref_filter = ConditionedFilter(model, ref.scheme, dt_fine, controller)
        ref_col = _Collector(n_real, n_snaps + 1, 4)

    def snapshot(k):
        ref_metrics = None
        if ref is not None:
            ref_metrics = _state_metrics(rho_ref, ref.scheme.kind.record_driven)
            ref_col.put(k, ref_metrics, rho_ref)
        for s, _, _, rho, col in tests:
            m = _state_metrics(rho, s.scheme.kind.record_driven)
            if ref is not None:
                m["fidelity"] = fidelity(rho_ref, rho, strict=False)
            col.put(k, m, rho)

    snapshot(0)
    for k in range(n_snaps):
        dW = wiener_batch(head.seed, realizations, model.channel_count, k * fine_per_snap, fine_per_snap, dt_fine)
        if ref_filter is not None:
            rho_ref, _ = ref_filter.run_noise(rho_ref, dW)
        for t in tests:
            q = t[2]
            dw = dW if q == 1 else dW.reshape(n_real, fine_per_snap // q, q, dW.shape[-1]).sum(axis=2)
            t[3], _ = t[1].run_noise(t[3], dw)
        snapshot(k + 1)

    out = []
    for s, filt, _, _, col in tests:
        values = dict(col.values)
        if ref_col is not None:
            for name in ("purity", "concurrence", "negativity"):
                values[f"reference_{name}"] = ref_col.values[name]
        out.append((values, col.state_sum, filt.renormalizations))
    return out


def _chunks(n, size=None):
    size = size or CHUNK_SIZE
    return [list(range(i, min(i + size, n))) for i in range(0, n, size)]


def _aggregate(s, times, chunk_results):
    values = {name: np.concatenate([c[0][name] for c in chunk_results]) for name in chunk_results[0][0]}
    state_sum = chunk_results[0][1].copy()
    for c in chunk_results[1:]:
        state_sum += c[1]
    n = s.realizations
    metrics = {}
    for name, v in values.items():
        mean = v.mean(axis=0)
        err = v.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
        metrics[name] = (mean, err)
    minimum = values["min_eigenvalue"]
    diagnostics = {
        "min_eigenvalue": float(minimum.min()),
        "max_purity": float(values["purity"].max()),
        "positivity_violations": int(np.count_nonzero(minimum < -POSITIVITY_FLOOR)),
        "purity_overshoots": int(np.count_nonzero(values["purity"] > 1 + PURITY_SLACK)),
        "trace_renormalizations": int(sum(c[2] for c in chunk_results)),
    }
    return AggregateResult(s, times, metrics, values, state_sum / n, diagnostics)


def run_scenarios(scenarios, workers: int | None = None) -> list[AggregateResult]:
    """Run several scenarios, sharing reference trajectories where possible."""
    scenarios = [s.validate() for s in scenarios]
    workers = default_workers() if workers is None else workers
    groups = {}
    for i, s in enumerate(scenarios):
        groups.setdefault(_group_key(s), []).append(i)

    results = [None] * len(scenarios)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for idx in groups.values():
            members = [scenarios[i] for i in idx]
            head = members[0]
            chunks = _chunks(head.realizations)
            if pool is None:
                chunk_out = [_run_chunk(members, c) for c in chunks]
            else:
                chunk_out = list(pool.map(_run_chunk, [members] * len(chunks), chunks))
            n_snaps = int(Fraction(head.cycles) / head.snapshot_interval)
            times = np.array([float(k * head.snapshot_interval) for k in range(n_snaps + 1)])
            for j, i in enumerate(idx):
                results[i] = _aggregate(scenarios[i], times, [c[j] for c in chunk_out])
    finally:
        if pool is not None:
            pool.shutdown()
    return results


def run_scenario(s: Scenario, workers: int | None = None) -> AggregateResult:
    return run_scenarios([s], workers)[0]
