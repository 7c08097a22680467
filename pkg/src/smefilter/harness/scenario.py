"""Scenario definition and the flat ``dotted.key = value`` config format.

Example::

    # Fig. 2 style run
    name = y1y2
    model.omega = 1.0
    initial_state = mixed
    scheme = kraus
    steps_per_cycle = 250
    cycles = 50
    realizations = 500
    controller = y1y2
    seed = 1

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..control import ControlStrategy
from ..errors import ConfigInvalid, ModelError
from ..integrators import HamiltonianOrder, SchemeKind, StepScheme
from ..model import TwoQubitParams
from ..state import maximally_mixed, pure_product

DEFAULT_SEED = 20150801


@dataclass(frozen=True)
class Reference:
    """Fine-grid trajectory that test runs are scored against."""

    scheme: StepScheme
    steps_per_cycle: int


@dataclass(frozen=True)
class Scenario:
    model_params: TwoQubitParams = TwoQubitParams()
    initial_state: str = "mixed"
    initial_bloch: tuple = ((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))
    scheme: StepScheme = StepScheme(SchemeKind.KRAUS)
    steps_per_cycle: int = 250
    cycles: int = 50
    realizations: int = 100
    controller: ControlStrategy = ControlStrategy()
    quant_bits: int | None = None
    reference: Reference | None = None
    seed: int = DEFAULT_SEED
    snapshot_stride: int | None = None
    name: str = "scenario"

    @property
    def stride(self) -> int:
        """Snapshot stride in steps; defaults to five snapshots per cycle when possible."""
        if self.snapshot_stride is not None:
            return self.snapshot_stride
        return self.steps_per_cycle // 5 if self.steps_per_cycle % 5 == 0 else self.steps_per_cycle

    @property
    def total_steps(self) -> int:
        return self.cycles * self.steps_per_cycle

    @property
    def snapshot_interval(self) -> Fraction:
        """Cycles between snapshots."""
        return Fraction(self.stride, self.steps_per_cycle)

    def initial_rho(self) -> np.ndarray:
        if self.initial_state == "mixed":
            return maximally_mixed(4)
        return pure_product(*self.initial_bloch)

    def validate(self) -> "Scenario":
        def bad(field, msg):
            raise ConfigInvalid(f"{field}: {msg}")

        if self.initial_state not in ("mixed", "pure"):
            bad("initial_state", f"expected 'mixed' or 'pure', got {self.initial_state!r}")
        if self.initial_state == "pure":
            for i, b in enumerate(self.initial_bloch, start=1):
                if len(b) != 3 or abs(float(np.linalg.norm(b)) - 1.0) > 1e-9:
                    bad(f"initial_state.b{i}", "must be a unit 3-vector")
        for field in ("steps_per_cycle", "cycles", "realizations"):
            if getattr(self, field) < 1:
                bad(field, "must be >= 1")
        if self.stride < 1:
            bad("snapshot_stride", "must be >= 1")
        if self.total_steps % self.stride:
            bad("snapshot_stride", f"must divide the {self.total_steps} total steps")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must be a 64-bit unsigned integer")
        if self.quant_bits is not None:
            if self.quant_bits < 1:
                bad("quant_bits", "must be >= 1")
            if not self.scheme.kind.record_driven:
                bad("quant_bits", f"scheme {self.scheme.kind.value} is not record driven")
        if self.reference is not None:
            ref_n = self.reference.steps_per_cycle
            if ref_n < 1 or ref_n % self.steps_per_cycle:
                bad("reference.steps_per_cycle",
                    f"{ref_n} is not a multiple of steps_per_cycle={self.steps_per_cycle}")
        return self

    # -- flat config --------------------------------------------------------

    def to_config(self) -> dict:
        """Every field as ``{dotted_key: text}``; round-trips through :func:`scenario_from_config`."""
        p = self.model_params
        ref = self.reference

        def num(x):
            return repr(float(x))

        def order(scheme):
            return scheme.hamiltonian_order.value if scheme.hamiltonian_order else "auto"

        return {
            "name": self.name,
            "model.omega": num(p.omega),
            "model.kappa": num(p.kappa),
            "model.k1": num(p.k1),
            "model.k2": num(p.k2),
            "model.eta1": num(p.eta1),
            "model.eta2": num(p.eta2),
            "initial_state": self.initial_state,
            "initial_state.b1": ",".join(num(c) for c in self.initial_bloch[0]),
            "initial_state.b2": ",".join(num(c) for c in self.initial_bloch[1]),
            "scheme": self.scheme.kind.value,
            "scheme.hamiltonian_order": order(self.scheme),
            "steps_per_cycle": str(self.steps_per_cycle),
            "cycles": str(self.cycles),
            "realizations": str(self.realizations),
            "controller": self.controller.name,
            "quant_bits": "none" if self.quant_bits is None else str(self.quant_bits),
            "reference": "none" if ref is None else ref.scheme.kind.value,
            "reference.steps_per_cycle": "none" if ref is None else str(ref.steps_per_cycle),
            "reference.hamiltonian_order": "auto" if ref is None else order(ref.scheme),
            "seed": str(self.seed),
            "snapshot_stride": "auto" if self.snapshot_stride is None else str(self.snapshot_stride),
        }


CONFIG_KEYS = tuple(Scenario().to_config())


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key in out:
            raise ConfigInvalid(f"{key}: given more than once")
        out[key] = value.strip()
    return out


def _get(cfg, key, conv, default):
    if key not in cfg:
        return default
    text = str(cfg[key]).strip()
    try:
        return conv(text)
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(f"{key}: cannot parse {text!r} ({exc})") from None


def _opt(conv):
    def inner(text):
        return None if text.lower() in ("none", "auto", "") else conv(text)
    return inner


def _vector(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(parts)


def _scheme(kind_text, order_text):
    try:
        kind = SchemeKind(kind_text)
    except ValueError:
        raise ConfigInvalid(f"scheme: unknown scheme {kind_text!r}") from None
    order = None
    if order_text not in (None, "auto"):
        try:
            order = HamiltonianOrder(order_text)
        except ValueError:
            raise ConfigInvalid(f"hamiltonian_order: unknown order {order_text!r}") from None
    return StepScheme(kind, order)


def scenario_from_config(cfg: dict, base: Scenario | None = None) -> Scenario:
    """Build and validate a scenario from flat keys, starting from ``base`` (or the defaults)."""
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigInvalid(f"{unknown[0]}: unknown key")
    merged = (base or Scenario()).to_config()
    merged.update({k: str(v) for k, v in cfg.items()})
    cfg = merged

    params = {}
    for f in dataclasses.fields(TwoQubitParams):
        params[f.name] = _get(cfg, f"model.{f.name}", float, None)
    try:
        model_params = TwoQubitParams(**params)
    except ModelError as exc:
        raise ConfigInvalid(f"model.{exc}") from None

    ref_kind = cfg["reference"].strip().lower()
    reference = None
    if ref_kind != "none":
        ref_steps = _get(cfg, "reference.steps_per_cycle", _opt(int), None)
        if ref_steps is None:
            raise ConfigInvalid("reference.steps_per_cycle: required when a reference is set")
        reference = Reference(_scheme(ref_kind, cfg["reference.hamiltonian_order"].lower()), ref_steps)

    scenario = Scenario(
        model_params=model_params,
        initial_state=cfg["initial_state"].lower(),
        initial_bloch=(_get(cfg, "initial_state.b1", _vector, None), _get(cfg, "initial_state.b2", _vector, None)),
        scheme=_scheme(cfg["scheme"].lower(), cfg["scheme.hamiltonian_order"].lower()),
        steps_per_cycle=_get(cfg, "steps_per_cycle", int, None),
        cycles=_get(cfg, "cycles", int, None),
        realizations=_get(cfg, "realizations", int, None),
        controller=ControlStrategy.from_name(cfg["controller"]),
        quant_bits=_get(cfg, "quant_bits", _opt(int), None),
        reference=reference,
        seed=_get(cfg, "seed", int, None),
        snapshot_stride=_get(cfg, "snapshot_stride", _opt(int), None),
        name=cfg["name"],
    )
    return scenario.validate()


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"config: cannot read {path} ({exc.strerror})") from None
    return scenario_from_config(parse_config_text(text))


def scenario_to_text(s: Scenario) -> str:
    return "".join(f"{k} = {v}\n" for k, v in s.to_config().items())
