"""Spiking adaptive compensator: LIF populations with online PES decoders.

Each population encodes one scalar into ``n`` leaky integrate-and-fire
neurons, low-pass filters the spikes into post-synaptic currents and decodes
them with a weight vector that is trained online against an error signal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .vehicle import Twist

DEFAULT_N_NEURONS = 100
DEFAULT_NEURON_DT = 1e-3


@dataclass(frozen=True)
class LifParams:
    tau_d: float = 0.02
    r_m: float = 1.0
    v_th: float = 1.0
    v_reset: float = 0.0
    tau_ref: float = 0.002
    tau_p: float = 0.1

    def __post_init__(self):
        if min(self.tau_d, self.tau_p, self.r_m) <= 0 or self.tau_ref < 0:
            raise ValueError("time constants and resistance must be positive")
        if not self.v_th > self.v_reset:
            raise ValueError("threshold must exceed the reset voltage")

    def rate(self, current):
        """Steady firing rate (spikes/s) for a constant input current."""
        drive = self.r_m * np.asarray(current, dtype=float)
        out = np.zeros_like(drive)
        on = drive > self.v_th
        out[on] = 1.0 / (self.tau_ref + self.tau_d * np.log(
            (drive[on] - self.v_reset) / (drive[on] - self.v_th)))
        return out

    def current_for_rate(self, rate):
        """Input current that makes the neuron fire at ``rate``."""
        e = np.exp((1.0 / np.asarray(rate, dtype=float) - self.tau_ref) / self.tau_d)
        return (self.v_th * e - self.v_reset) / (e - 1.0) / self.r_m


@dataclass
class SnnPopulation:
    """Mutable state of one population; owned by a single control loop."""

    encoders: np.ndarray
    bias: np.ndarray
    decoders: np.ndarray
    params: LifParams = field(default_factory=LifParams)
    rng_seed: int = 0
    voltage: np.ndarray = None
    synapse: np.ndarray = None
    refractory: np.ndarray = None
    time: float = 0.0
    raster: list | None = None

    def __post_init__(self):
        n = len(self.encoders)
        if n == 0:
            raise ValueError("population needs at least one neuron")
        if self.voltage is None:
            self.voltage = np.full(n, self.params.v_reset)
        if self.synapse is None:
            self.synapse = np.zeros(n)
        if self.refractory is None:
            self.refractory = np.zeros(n)

    @property
    def n(self) -> int:
        return len(self.encoders)

    def copy(self) -> "SnnPopulation":
        return SnnPopulation(
            self.encoders.copy(), self.bias.copy(), self.decoders.copy(),
            self.params, self.rng_seed, self.voltage.copy(),
            self.synapse.copy(), self.refractory.copy(), self.time,
            None if self.raster is None else list(self.raster))


@dataclass(frozen=True)
class PesRule:
    gamma: float = 1e-6
    enabled: bool = True
    per_substep: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("learning rate must be >= 0")


def init_population(n: int = DEFAULT_N_NEURONS, seed: int = 0,
                    params: LifParams | None = None,
                    max_rates=(100.0, 200.0),
                    intercepts=(-1.0, 1.0)) -> SnnPopulation:
    """Random tuning curves over the normalized input range [-1, 1].

    Every neuron gets an encoder of +1 or -1, a firing onset (intercept)
    drawn uniformly from ``intercepts`` and a rate at |input| = 1 drawn
    uniformly from ``max_rates``. Decoders start at zero.
    """
    if n < 1:
        raise ValueError("population needs at least one neuron")
    params = params or LifParams()
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    onset = rng.uniform(*intercepts, size=n)
    peak = rng.uniform(*max_rates, size=n)
    j_th = params.v_th / params.r_m
    j_max = params.current_for_rate(peak)
    gain = (j_max - j_th) / (1.0 - onset)
    bias = j_th - gain * onset
    return SnnPopulation(encoders=gain * signs, bias=bias,
                         decoders=np.zeros(n), params=params, rng_seed=seed)


def input_current(pop: SnnPopulation, a: float) -> np.ndarray:
    return pop.encoders * a + pop.bias


def lif_step(pop: SnnPopulation, a: float, dt: float = DEFAULT_NEURON_DT) -> np.ndarray:
    """Advance membrane voltages by ``dt`` under input ``a``.

    The subthreshold update is the exact exponential solution over the part
    of the step not spent refractory. Threshold crossings are located within
    the step so the refractory period starts at the true spike time; this
    keeps firing rates exact for any ``dt``. Returns spikes as 1/dt impulses.
    """
    p = pop.params
    drive = p.r_m * input_current(pop, a)
    active = np.clip(dt - pop.refractory, 0.0, dt)
    np.maximum(pop.refractory - dt, 0.0, out=pop.refractory)
    v = pop.voltage
    v -= (v - drive) * -np.expm1(-active / p.tau_d)
    spiked = v >= p.v_th
    spikes = np.zeros(pop.n)
    if spiked.any():
        # time elapsed since the crossing, inside this step
        since = p.tau_d * np.log((drive[spiked] - p.v_th) / (drive[spiked] - v[spiked]))
        since = np.clip(np.nan_to_num(since, nan=0.0), 0.0, active[spiked])
        v[spiked] = p.v_reset
        pop.refractory[spiked] = p.tau_ref - since
        spikes[spiked] = 1.0 / dt
        if pop.raster is not None:
            t_end = pop.time + dt
            pop.raster.extend((t_end, int(i)) for i in np.flatnonzero(spiked))
    pop.time += dt
    return spikes


def synapse_step(pop: SnnPopulation, spikes: np.ndarray,
                 dt: float = DEFAULT_NEURON_DT) -> np.ndarray:
    """Exponential synapse with unit-area kernel exp(-t/tau_p)/tau_p."""
    tau = pop.params.tau_p
    pop.synapse *= math.exp(-dt / tau)
    pop.synapse += spikes * (dt / tau)
    return pop.synapse


def decode(pop: SnnPopulation) -> float:
    return float(pop.decoders @ pop.synapse)


def pes_update(pop: SnnPopulation, error: float, rule: PesRule) -> np.ndarray:
    """w <- w - gamma * s * error, using the current filtered activities."""
    if rule.enabled and rule.gamma != 0.0 and error != 0.0:
        pop.decoders -= rule.gamma * error * pop.synapse
    return pop.decoders


def run_period(pop: SnnPopulation, a: float, period: float,
               dt: float = DEFAULT_NEURON_DT, error: float = 0.0,
               rule: PesRule | None = None) -> float:
    """Run neuron substeps for one controller period and decode.

    Returns the decoded output at the end of the period, before any
    learning. With ``rule.per_substep`` the decoders are also nudged at
    every substep; otherwise one PES update is applied after decoding.
    """
    steps = max(1, int(round(period / dt)))
    for _ in range(steps):
        spikes = lif_step(pop, a, dt)
        synapse_step(pop, spikes, dt)
        if rule is not None and rule.per_substep:
            pes_update(pop, error, rule)
    out = decode(pop)
    if rule is not None and not rule.per_substep:
        pes_update(pop, error, rule)
    return out


def encode_errors(e_p: float, e_theta: float,
                  position_scale: float = 1.0) -> tuple[float, float]:
    """Normalized population inputs: e_p / scale and e_theta / pi, clipped."""
    a_v = min(max(e_p / position_scale, -1.0), 1.0)
    a_w = min(max(e_theta / math.pi, -1.0), 1.0)
    return a_v, a_w


def adaptive_control(pop_v: SnnPopulation, pop_w: SnnPopulation,
                     e_p: float, e_theta: float, input_v: float,
                     input_w: float, dt: float,
                     rule: PesRule | tuple[PesRule, PesRule],
                     neuron_dt: float = DEFAULT_NEURON_DT) -> Twist:
    """Adaptive twist u_a from the speed and turn-rate populations.

    The speed population learns from the position error and the turn-rate
    population from the heading error. ``rule`` may be one rule shared by
    both or a ``(speed_rule, turn_rule)`` pair.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rule_v, rule_w = rule if isinstance(rule, tuple) else (rule, rule)
    u_v = run_period(pop_v, input_v, dt, neuron_dt, e_p, rule_v)
    u_w = run_period(pop_w, input_w, dt, neuron_dt, e_theta, rule_w)
    return Twist(u_v, u_w)


def write_raster(path, raster) -> None:
    """Spike raster CSV: one ``t,neuron_index`` row per spike."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "neuron_index"])
        for t, i in raster:
            out.writerow([repr(float(t)), i])
