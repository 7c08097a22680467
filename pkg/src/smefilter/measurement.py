"""Wiener increments, measurement records and record quantization.

Gaussian draws come from the Philox counter-based generator: realization
``r`` of seed ``s`` uses the 128-bit key ``s + r * 2**64`` and step ``n``
owns counter block ``n`` (four 64-bit words, one per channel, a further
block per extra four channels).  A draw is therefore a pure function of
``(seed, realization, step, channel)``, which is what makes realizations
independent of scheduling and lets coarse grids reuse fine-grid paths.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import RecordMismatch
from .model import SmeModel
from .qmat import dagger

_WORDS_PER_BLOCK = 4
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseStream:
    seed: int
    realization_index: int
    channel_count: int

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.realization_index < 0 or self.channel_count < 1:
            raise ValueError("realization_index must be >= 0 and channel_count >= 1")

    @property
    def _blocks_per_step(self) -> int:
        return -(-self.channel_count // _WORDS_PER_BLOCK)

    def standard_normals(self, start_step: int, n_steps: int) -> np.ndarray:
        """Unit-variance draws for steps ``start_step .. start_step + n_steps - 1``, shape ``(n, C)``."""
        bps = self._blocks_per_step
        gen = np.random.Philox(
            key=self.seed + (self.realization_index << 64), counter=start_step * bps
        )
        raw = gen.random_raw(n_steps * bps * _WORDS_PER_BLOCK)
        words = raw.reshape(n_steps, bps * _WORDS_PER_BLOCK)[:, : self.channel_count]
        u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)

    def wiener(self, start_step: int, n_steps: int, dt: float) -> np.ndarray:
        return math.sqrt(dt) * self.standard_normals(start_step, n_steps)


def draw_wiener(stream: NoiseStream, step: int, dt: float) -> np.ndarray:
    """One N(0, dt) increment per channel for ``step``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return stream.wiener(step, 1, dt)[0]


def wiener_batch(seed: int, realizations, channel_count: int, start_step: int, n_steps: int,
                 dt: float) -> np.ndarray:
    """Increments for several realizations, shape ``(R, n_steps, C)``."""
    return np.stack([
        NoiseStream(seed, int(r), channel_count).wiener(start_step, n_steps, dt)
        for r in realizations
    ])


def signal_weights(model: SmeModel) -> np.ndarray:
    """``sqrt(eta_r) (L_r + L_r†)`` stacked as ``(C, d, d)``."""
    if not model.monitored:
        return np.zeros((0, model.dim, model.dim), dtype=complex)
    ops = np.stack(model.monitored)
    return np.sqrt(np.asarray(model.efficiencies))[:, None, None] * (ops + dagger(ops))


def expected_signal(rho: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sqrt(eta_r) Tr(L_r rho + rho L_r†)`` for each channel, shape ``(..., C)``."""
    # Tr(A rho) = sum_ij A_ji rho_ij
    a_t = np.swapaxes(weights, -1, -2)
    return np.sum(rho[..., None, :, :] * a_t, axis=(-2, -1)).real


def synthesize_record(rho: np.ndarray, model: SmeModel, dW, dt: float) -> np.ndarray:
    """Integrated detector output over one step for each channel."""
    return expected_signal(np.asarray(rho, dtype=complex), signal_weights(model)) * dt + np.asarray(dW)


def quantize(dy, bits: int, dt: float):
    """Map each value to the midpoint of its bin on a uniform ``2**bits`` grid over ``±3 sqrt(dt)``.

    Values outside the span land in the outer bins.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    half_span = 3.0 * math.sqrt(dt)
    levels = 1 << bits
    width = 2.0 * half_span / levels
    k = np.clip(np.floor((np.asarray(dy, dtype=float) + half_span) / width), 0, levels - 1)
    out = -half_span + (k + 0.5) * width
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MeasurementRecord:
    """Per-step, per-channel integrated records ``samples[n, r]``."""

    dt: float
    samples: np.ndarray
    bits: int | None = None
    seed: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2:
            raise RecordMismatch(f"samples must be (steps, channels), got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise RecordMismatch("record contains non-finite samples")

    @property
    def steps(self) -> int:
        return self.samples.shape[0]

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_record_csv(record: MeasurementRecord, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# dt={_fmt(record.dt)}\n")
        fh.write(f"# seed={'' if record.seed is None else record.seed}\n")
        fh.write(f"# bits={'' if record.bits is None else record.bits}\n")
        w = csv.writer(fh)
        w.writerow(["step"] + [f"channel_{c}" for c in range(record.channel_count)])
        for n, row in enumerate(record.samples):
            w.writerow([n] + [_fmt(v) for v in row])


def read_record_csv(path) -> MeasurementRecord:
    meta = {}
    rows = []
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(ln)
    reader = csv.reader(body)
    header = next(reader)
    channels = len(header) - 1
    for row in reader:
        rows.append([float(v) for v in row[1:]])
    samples = np.array(rows, dtype=float).reshape(len(rows), channels)
    return MeasurementRecord(
        dt=float(meta["dt"]),
        samples=samples,
        bits=int(meta["bits"]) if meta.get("bits") else None,
        seed=int(meta["seed"]) if meta.get("seed") else None,
    )
