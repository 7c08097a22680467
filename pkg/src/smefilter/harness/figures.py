"""Preset scenario batteries for the five figures of the two-qubit study."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..control import ControlStrategy
from ..integrators import SchemeKind, StepScheme
from .runner import run_scenarios
from .scenario import Reference, Scenario, scenario_from_config

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5")
FIG3_OMEGAS = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))

_MILSTEIN = StepScheme(SchemeKind.EULER_MILSTEIN)
_KRAUS = StepScheme(SchemeKind.KRAUS)
_APPROX = StepScheme(SchemeKind.KRAUS_APPROX)


def _five_per_cycle(n):
    return max(1, n // 5)


def fig1() -> list[Scenario]:
    ref = Reference(_MILSTEIN, 5000)
    out = []
    for init in ("mixed", "pure"):
        for scheme, steps in [(_MILSTEIN, 1000), (_MILSTEIN, 500), (_MILSTEIN, 250),
                              (_KRAUS, 250), (_KRAUS, 100), (_KRAUS, 50)]:
            out.append(Scenario(
                name=f"fig1_{init}_{scheme.kind.value}_{steps}", initial_state=init, scheme=scheme,
                steps_per_cycle=steps, snapshot_stride=_five_per_cycle(steps), cycles=50,
                realizations=1000, reference=ref,
            ))
    return out


def fig2() -> list[Scenario]:
    return [
        Scenario(name=f"fig2_{name}", controller=ControlStrategy.from_name(name), scheme=_KRAUS,
                 steps_per_cycle=250, cycles=50, realizations=500)
        for name in ("none", "x1", "y1y2")
    ]


def fig3(omegas=FIG3_OMEGAS) -> list[Scenario]:
    base = Scenario().model_params
    return [
        Scenario(name=f"fig3_{name}_omega{omega:.2f}", model_params=replace(base, omega=float(omega)),
                 controller=ControlStrategy.from_name(name), scheme=_KRAUS, steps_per_cycle=250,
                 cycles=50, realizations=500)
        for name in ("y1y2", "x1y2", "x1x2")
        for omega in omegas
    ]


def fig4() -> list[Scenario]:
    ref = Reference(_KRAUS, 500)
    return [
        Scenario(name=f"fig4_kraus_approx_{n}", scheme=_APPROX, steps_per_cycle=n,
                 snapshot_stride=_five_per_cycle(n), controller=ControlStrategy.from_name("y1y2"),
                 cycles=50, realizations=500, reference=ref)
        for n in (500, 50, 20, 10, 5)
    ]


def fig5() -> list[Scenario]:
    ref = Reference(_KRAUS, 500)
    return [
        Scenario(name=f"fig5_bits_{bits if bits else 'none'}", scheme=_APPROX, steps_per_cycle=50,
                 snapshot_stride=10, quant_bits=bits, controller=ControlStrategy.from_name("y1y2"),
                 cycles=50, realizations=500, reference=ref)
        for bits in (6, 4, 3, 2, None)
    ]


_PRESETS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}


def figure_scenarios(fig: str, overrides: dict | None = None) -> list[Scenario]:
    """The preset battery for ``fig`` with flat config ``overrides`` applied to every member."""
    try:
        preset = _PRESETS[fig.lower()]
    except KeyError:
        raise ValueError(f"unknown figure {fig!r}; expected one of {FIGURES}") from None
    return [scenario_from_config(overrides or {}, base=s) for s in preset()]


def run_figure(fig: str, overrides: dict | None = None, workers: int | None = None):
    scenarios = figure_scenarios(fig, overrides)
    return run_scenarios(scenarios, workers)
