"""Event-driven core: AER packet codec, FIFOs, controller, and the three
event handlers.

Spikes enter and leave as AER packets, a (neuron id, timestamp) pair
serialized as 6 little-endian bytes (u16 id, u32 timestamp). The engine
pulls packets from an input FIFO and drives a controller cycle per
timestep:

    integrate  one activation per packet of the current timestep: add the
               packet's weight row to the excitatory voltages, depress that
               row by the post-synaptic traces, then bump the input trace.
    leak       all voltages decay one iterative step toward rest, queued
               lateral inhibition is subtracted (floored at v_floor) and
               cleared, all traces decay.
    fire       every neuron at or above threshold spikes: its weight
               column is potentiated by the input traces, the voltage
               resets to rest, the trace is bumped, inhibition is queued
               against all the others, and an output packet is emitted.
               Simultaneous crossings all fire, in ascending id order.

A packet with a later timestamp than the current one closes the current
step and every empty step before that packet: one leak+fire cycle per
elapsed timestep, so gaps decay state exactly as if the quiet steps had
been driven individually. Input timestamps must be non-decreasing;
anything else is a protocol error and aborts the run.

Arithmetically the handlers match the scalar transitions of the dynamics
and plasticity modules, applied vectorized per weight row or column, in
the float or fixed semantics of the numerics module depending on the
store's numeric mode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from .dynamics import LifParams, TraceParams
from .numerics import (
    COEF_FORMAT,
    DecayParams,
    convert_raw_array,
    leak_decay_raw,
    leak_toward_raw,
    to_fixed,
    trunc_shift_raw,
)
from .plasticity import StdpParams
from .topology import StateStore, TopologyParams, queue_inhibition

__all__ = [
    "AerPacket",
    "EventFifo",
    "Phase",
    "ControllerState",
    "EngineStats",
    "EventEngine",
    "RunResult",
    "EngineError",
    "ProtocolError",
    "FifoOverflowError",
    "encode_packet",
    "decode_packet",
    "write_aer_file",
    "read_aer_file",
    "write_aer_text",
    "read_aer_text",
]

_PACKET = struct.Struct("<HI")
PACKET_BYTES = _PACKET.size  # 6


class EngineError(Exception):
    pass


class ProtocolError(EngineError):
    """Input stream violated the AER contract (e.g. decreasing timestamps)."""


class FifoOverflowError(EngineError):
    """A FIFO was pushed beyond its capacity."""


@dataclass(frozen=True)
class AerPacket:
    neuron_id: int
    timestamp: int

    def __post_init__(self) -> None:
        if not 0 <= self.neuron_id <= 0xFFFF:
            raise ValueError(f"neuron_id must fit 16 bits, got {self.neuron_id}")
        if not 0 <= self.timestamp <= 0xFFFFFFFF:
            raise ValueError(f"timestamp must fit 32 bits, got {self.timestamp}")


def encode_packet(p: AerPacket) -> bytes:
    return _PACKET.pack(p.neuron_id, p.timestamp)


def decode_packet(data: bytes) -> AerPacket:
    if len(data) != PACKET_BYTES:
        raise ValueError(f"AER packet must be {PACKET_BYTES} bytes, got {len(data)}")
    neuron_id, timestamp = _PACKET.unpack(data)
    return AerPacket(neuron_id, timestamp)


def write_aer_file(path, packets: Iterable[AerPacket]) -> int:
    """Binary trace: a flat stream of encoded packets. Returns the count."""
    n = 0
    with open(path, "wb") as fh:
        for p in packets:
            fh.write(encode_packet(p))
            n += 1
    return n


def read_aer_file(path) -> list[AerPacket]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) % PACKET_BYTES:
        raise ValueError(
            f"trace length {len(data)} is not a multiple of {PACKET_BYTES}"
        )
    return [
        AerPacket(*_PACKET.unpack_from(data, off))
        for off in range(0, len(data), PACKET_BYTES)
    ]


def write_aer_text(path, packets: Iterable[AerPacket]) -> int:
    """Debug form: one ``timestamp,neuron_id`` pair per line."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in packets:
            fh.write(f"{p.timestamp},{p.neuron_id}\n")
            n += 1
    return n


def read_aer_text(path) -> list[AerPacket]:
    packets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ts, nid = line.split(",")
            packets.append(AerPacket(int(nid), int(ts)))
    return packets


class EventFifo:
    """Bounded FIFO; pop order equals push order."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: list[AerPacket] = []
        self._head = 0

    def __len__(self) -> int:
        return len(self._items) - self._head

    @property
    def is_full(self) -> bool:
        return len(self) >= self.capacity

    def push(self, packet: AerPacket) -> None:
        if self.is_full:
            raise FifoOverflowError(f"FIFO full at capacity {self.capacity}")
        self._items.append(packet)

    def pop(self) -> AerPacket:
        if len(self) == 0:
            raise IndexError("pop from empty FIFO")
        packet = self._items[self._head]
        self._head += 1
        if self._head > 4096 and self._head * 2 > len(self._items):
            del self._items[: self._head]
            self._head = 0
        return packet


class Phase(Enum):
    IDLE = "idle"
    INTEGRATING = "integrate"
    LEAKING = "leak"
    FIRING = "fire"


@dataclass
class ControllerState:
    current_timestamp: int = 0
    phase: Phase = Phase.IDLE


@dataclass
class EngineStats:
    packets_in: int = 0
    packets_integrated: int = 0
    packets_dropped: int = 0
    packets_out: int = 0
    integrate_activations: int = 0
    leak_activations: int = 0
    fire_activations: int = 0
    timesteps: int = 0
    idle_steps: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    outputs: list[AerPacket]
    stats: EngineStats


class EventEngine:
    """Owns one state store and drives it packet by packet.

    One engine instance is strictly sequential, mirroring the
    time-multiplexed hardware; run independent stores for parallelism.
    ``learning`` can be toggled between runs (inference leaves weights
    bit-identical). With ``accumulate_updates`` the depression and
    potentiation amounts collect in a side buffer instead of the live
    weights until ``apply_accumulated_updates`` is called, which is how
    multi-sample learning batches are realized.
    """

    def __init__(
        self,
        store: StateStore,
        lif: LifParams,
        trace: TraceParams,
        stdp: StdpParams,
        topology: TopologyParams,
        *,
        learning: bool = True,
        v_floor: float | None = None,
        fifo_capacity: int = 4096,
        accumulate_updates: bool = False,
        log_activations: bool = False,
    ):
        if topology.n_input != store.n_input or topology.n_exc != store.n_exc:
            raise ValueError(
                f"topology {topology.n_input}x{topology.n_exc} does not match "
                f"store {store.n_input}x{store.n_exc}"
            )
        self.store = store
        self.lif = lif
        self.trace = trace
        self.stdp = stdp
        self.topology = topology
        self.learning = learning
        self.v_floor = -lif.v_thresh if v_floor is None else float(v_floor)
        self.input_fifo = EventFifo(fifo_capacity)
        self.output_fifo = EventFifo(fifo_capacity)
        self.accumulate_updates = accumulate_updates
        self.controller = ControllerState()
        self.stats = EngineStats()
        self.activation_log: list[tuple[int, str, int]] | None = (
            [] if log_activations else None
        )
        self._fixed = store.numeric.is_fixed
        self._w_delta = None
        if accumulate_updates:
            self._w_delta = np.zeros_like(store.w)
        self._step_packets = 0

        decay_v = DecayParams(tau=lif.tau_v, dt=lif.dt)
        decay_x = DecayParams(tau=trace.tau_x, dt=trace.dt)
        if self._fixed:
            vf = store.numeric.v_format
            wf = store.numeric.w_format
            self._v_fmt = vf
            self._w_fmt = wf
            self._coef_v = decay_v.decay_raw(COEF_FORMAT)
            self._coef_x = decay_x.decay_raw(COEF_FORMAT)
            self._thresh = to_fixed(lif.v_thresh, vf).raw
            self._rest = to_fixed(lif.v_rest, vf).raw
            self._floor = to_fixed(self.v_floor, vf).raw
            self._alpha = to_fixed(trace.alpha, vf).raw
            self._x_max = to_fixed(trace.x_max, vf).raw
            self._a_pre = to_fixed(stdp.alpha_pre, COEF_FORMAT).raw
            self._a_post = to_fixed(stdp.alpha_post, COEF_FORMAT).raw
            self._w_min = to_fixed(stdp.w_min, wf).raw
            self._w_max = to_fixed(stdp.w_max, wf).raw
            # learning-rate coef (frac 14) x trace (frac v) -> weight (frac w)
            self._rate_shift = COEF_FORMAT.frac_bits + vf.frac_bits - wf.frac_bits
        else:
            self._decay_v = decay_v.decay
            self._decay_x = decay_x.decay
            self._thresh = lif.v_thresh
            self._rest = lif.v_rest
            self._floor = self.v_floor
            self._alpha = trace.alpha
            self._x_max = trace.x_max
            self._a_pre = stdp.alpha_pre
            self._a_post = stdp.alpha_post
            self._w_min = stdp.w_min
            self._w_max = stdp.w_max

    # -- handlers ---------------------------------------------------------

    def integrate_handler(self, packet: AerPacket) -> bool:
        """Apply one input spike. Returns False (dropped) for a neuron id
        outside the input layer; the packet is counted, never raised."""
        store = self.store
        pre = packet.neuron_id
        if pre >= store.n_input:
            self.stats.packets_dropped += 1
            return False
        self.stats.packets_integrated += 1
        self.stats.integrate_activations += 1
        self._step_packets += 1
        row = store.w[pre]
        if self._fixed:
            np.clip(
                store.exc_v + convert_raw_array(row, self._w_fmt, self._v_fmt),
                self._v_fmt.raw_min,
                self._v_fmt.raw_max,
                out=store.exc_v,
            )
            if self.learning:
                drop = trunc_shift_raw(self._a_post * store.exc_x, self._rate_shift)
                if self._w_delta is not None:
                    self._w_delta[pre] -= drop
                else:
                    np.clip(row - drop, self._w_min, self._w_max, out=row)
            # x_max is quantized into the voltage format, so the ceiling
            # clamp also covers saturation
            store.input_x[pre] = min(store.input_x[pre] + self._alpha, self._x_max)
        else:
            store.exc_v += row
            if self.learning:
                drop = self._a_post * store.exc_x
                if self._w_delta is not None:
                    self._w_delta[pre] -= drop
                else:
                    np.clip(row - drop, self._w_min, self._w_max, out=row)
            store.input_x[pre] = min(store.input_x[pre] + self._alpha, self._x_max)
        return True

    def leak_handler(self) -> None:
        store = self.store
        self.stats.leak_activations += 1
        if self._fixed:
            v = leak_toward_raw(store.exc_v, self._rest, self._coef_v)
            v = np.clip(v - store.pending, self._v_fmt.raw_min, self._v_fmt.raw_max)
            np.maximum(v, self._floor, out=store.exc_v)
            store.exc_x[:] = leak_decay_raw(store.exc_x, self._coef_x)
            store.input_x[:] = leak_decay_raw(store.input_x, self._coef_x)
        else:
            v = store.exc_v
            v -= (v - self._rest) * self._decay_v
            v -= store.pending
            np.maximum(v, self._floor, out=v)
            store.exc_x -= store.exc_x * self._decay_x
            store.input_x -= store.input_x * self._decay_x
        store.pending[:] = 0

    def fire_handler(self, ts: int) -> list[AerPacket]:
        store = self.store
        self.stats.fire_activations += 1
        fired = np.nonzero(store.exc_v >= self._thresh)[0]
        out = []
        for j in fired:
            if self.learning:
                col = store.w[:, j]
                if self._fixed:
                    gain = trunc_shift_raw(
                        self._a_pre * store.input_x, self._rate_shift
                    )
                else:
                    gain = self._a_pre * store.input_x
                if self._w_delta is not None:
                    self._w_delta[:, j] += gain
                else:
                    np.clip(col + gain, self._w_min, self._w_max, out=col)
            store.exc_v[j] = self._rest
            store.exc_x[j] = min(store.exc_x[j] + self._alpha, self._x_max)
            packet = AerPacket(int(j), ts)
            self.output_fifo.push(packet)
            out.append(packet)
        if fired.size:
            queue_inhibition(store, fired.tolist(), self.topology.w_inh)
        self.stats.packets_out += len(out)
        return out

    def apply_accumulated_updates(self) -> None:
        """Fold the batched weight deltas into the live weights (clamped)."""
        if self._w_delta is None:
            return
        np.clip(
            self.store.w + self._w_delta, self._w_min, self._w_max, out=self.store.w
        )
        self._w_delta[:] = 0

    # -- controller -------------------------------------------------------

    def _log(self, ts: int, phase: Phase, count: int) -> None:
        if self.activation_log is not None:
            self.activation_log.append((ts, phase.value, count))

    def run_timestep_boundary(self, from_ts: int, to_ts: int) -> list[AerPacket]:
        """Close steps ``from_ts .. to_ts - 1``: one leak+fire cycle each,
        output packets stamped with the step they fired in."""
        outputs = []
        for t in range(from_ts, to_ts):
            self.controller.current_timestamp = t
            self._log(t, Phase.INTEGRATING, self._step_packets)
            if self._step_packets == 0:
                self.stats.idle_steps += 1
            self.controller.phase = Phase.LEAKING
            self.leak_handler()
            self._log(t, Phase.LEAKING, self.store.n_exc)
            self.controller.phase = Phase.FIRING
            fired = self.fire_handler(t)
            self._log(t, Phase.FIRING, len(fired))
            self.stats.timesteps += 1
            self._step_packets = 0
            # drain the output buffer like an attached consumer would
            while len(self.output_fifo):
                outputs.append(self.output_fifo.pop())
            self.controller.phase = Phase.INTEGRATING
        return outputs

    def run(self, packets: Iterable[AerPacket], stop_ts: int) -> RunResult:
        """Drive the full controller loop over an input stream.

        Simulates timesteps ``0 .. stop_ts - 1``. Packets must arrive with
        non-decreasing timestamps below ``stop_ts``; a violation raises
        ``ProtocolError``. Packets for a future timestep first close every
        step up to it. After the stream ends the remaining steps run dry.
        """
        self.stats = EngineStats()
        self.controller = ControllerState(current_timestamp=0, phase=Phase.IDLE)
        if self.activation_log is not None:
            self.activation_log = []
        self._step_packets = 0
        outputs: list[AerPacket] = []
        current = 0
        started = False
        source: Iterator[AerPacket] = iter(packets)
        exhausted = False
        while True:
            while not exhausted and not self.input_fifo.is_full:
                nxt = next(source, None)
                if nxt is None:
                    exhausted = True
                    break
                self.input_fifo.push(nxt)
                self.stats.packets_in += 1
            if len(self.input_fifo) == 0:
                break
            packet = self.input_fifo.pop()
            if packet.timestamp < current:
                raise ProtocolError(
                    f"timestamp went backwards: {packet.timestamp} after {current}"
                )
            if packet.timestamp >= stop_ts:
                raise ProtocolError(
                    f"packet timestamp {packet.timestamp} is past stop_ts {stop_ts}"
                )
            if not started:
                self.controller.phase = Phase.INTEGRATING
                started = True
            if packet.timestamp > current:
                outputs.extend(self.run_timestep_boundary(current, packet.timestamp))
                current = packet.timestamp
            self.controller.current_timestamp = current
            self.integrate_handler(packet)
        if current < stop_ts:
            if not started and stop_ts > 0:
                self.controller.phase = Phase.INTEGRATING
            outputs.extend(self.run_timestep_boundary(current, stop_ts))
        self.controller.current_timestamp = stop_ts
        self.controller.phase = Phase.IDLE
        return RunResult(outputs=outputs, stats=self.stats)


def write_activation_log(path, entries: Iterable[tuple[int, str, int]]) -> None:
    """Dump an activation log as ``ts,phase,count`` lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ts, phase, count in entries:
            fh.write(f"{ts},{phase},{count}\n")
