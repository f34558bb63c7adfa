"""Pauli-frame simulation of noisy Clifford circuits.

Two engines share one sampling contract:

* a reference simulator that walks circuits gate by gate, drawing exactly
  one uniform per noise site in a canonical order (gates in layer order,
  then idling qubits ascending), and
* a compiled engine that precomputes, for every noise site and incoming
  frame component, its linear effect on the recorded bits and the final
  frame, then replays rounds as a handful of XORs.

With full generator selection the two consume identical uniform streams
and produce identical results; a signed stabilizer tableau provides an
independent ground truth for fixed fault patterns.

Frames ignore signs (syndromes are sign-blind); Y means both masks set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import CNOT, H, MEAS_X, MEAS_Z, PREP_X, PREP_Z, S, Circuit

_PAULI_1Q = ("X", "Y", "Z")


@dataclass(frozen=True)
class NoiseModel:
    """Two-qubit depolarizing strength p; single-qubit and idle channels
    are ten times weaker; measurement and reset flip with probability p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def p_1q(self) -> float:
        return self.p / 10.0

    @property
    def p_idle(self) -> float:
        return self.p / 10.0

    @property
    def p_2q(self) -> float:
        return self.p

    @property
    def p_meas(self) -> float:
        return self.p

    @property
    def p_reset(self) -> float:
        return self.p


def make_shot_rng(master_seed: int, shot: int) -> np.random.Generator:
    """Counter-based stream keyed by (master seed, shot index).

    Streams are independent and replayable, so shots can be distributed
    over workers in any order with bit-identical results.
    """
    key = (int(master_seed) << 64) ^ int(shot)
    return np.random.Generator(np.random.Philox(key=key))


class PauliFrame:
    """X and Z error masks over all qubits of a circuit."""

    __slots__ = ("x", "z")

    def __init__(self, n_qubits: int):
        self.x = np.zeros(n_qubits, dtype=np.uint8)
        self.z = np.zeros(n_qubits, dtype=np.uint8)

    @property
    def n_qubits(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "PauliFrame":
        out = PauliFrame(self.n_qubits)
        out.x[:] = self.x
        out.z[:] = self.z
        return out

    def inject(self, q: int, pauli: str) -> None:
        if pauli in ("X", "Y"):
            self.x[q] ^= 1
        if pauli in ("Z", "Y"):
            self.z[q] ^= 1


def _channel_index(u: float, prob: float, n_outcomes: int) -> int:
    return min(int(u * n_outcomes / prob), n_outcomes - 1)


def _two_qubit_paulis(index: int):
    code = index + 1
    return "IXYZ"[code >> 2], "IXYZ"[code & 3]


def propagate(frame: PauliFrame, gate) -> None:
    """Conjugate the frame through one gate (no noise)."""
    op, qubits = gate[0], gate[1]
    if op == CNOT:
        c, t = qubits
        frame.x[t] ^= frame.x[c]
        frame.z[c] ^= frame.z[t]
    elif op == H:
        q = qubits[0]
        frame.x[q], frame.z[q] = frame.z[q], frame.x[q]
    elif op == S:
        q = qubits[0]
        frame.z[q] ^= frame.x[q]
    elif op in (PREP_Z, PREP_X):
        q = qubits[0]
        frame.x[q] = 0
        frame.z[q] = 0
    elif op in (MEAS_Z, MEAS_X):
        pass
    else:
        raise ValueError(f"unsupported gate {op!r}")


def apply_noise(frame: PauliFrame, kind: str, qubits, model: NoiseModel, rng) -> None:
    """Draw one uniform and apply the channel for this location kind."""
    u = rng.random()
    if kind == "1q" or kind == "idle":
        prob = model.p_1q if kind == "1q" else model.p_idle
        if u < prob:
            frame.inject(qubits[0], _PAULI_1Q[_channel_index(u, prob, 3)])
    elif kind == "2q":
        if u < model.p_2q:
            pa, pb = _two_qubit_paulis(_channel_index(u, model.p_2q, 15))
            if pa != "I":
                frame.inject(qubits[0], pa)
            if pb != "I":
                frame.inject(qubits[1], pb)
    elif kind == "reset":
        if u < model.p_reset:
            frame.inject(qubits[0], "X" if qubits[1] == "Z" else "Z")
    elif kind == "measure":
        pass  # handled by the caller on the recorded bit
    else:
        raise ValueError(f"unknown noise location kind {kind!r}")
    return u


def measure(frame: PauliFrame, q: int, basis: str, model: NoiseModel, rng,
            noisy: bool = True) -> int:
    """Measurement outcome flip relative to the ideal circuit: Z readout is
    flipped by the X mask, X readout by the Z mask."""
    bit = int(frame.x[q] if basis == "Z" else frame.z[q])
    if noisy:
        u = rng.random()
        if u < model.p_meas:
            bit ^= 1
    return bit


def run_circuit(circuit: Circuit, frame: PauliFrame, model: NoiseModel, rng,
                injections=(), trace=None) -> np.ndarray:
    """Reference executor: layers in order, one uniform per noise site.

    injections is an iterable of (after_layer, qubit, pauli) fixed faults;
    after_layer 0 applies before the first layer. Passing a list as trace
    collects one "layer qubit[,qubit] pauli[,pauli]" line per sampled fault
    (the stable debugging format).
    """
    by_slot = {}
    for t, q, p in injections:
        by_slot.setdefault(t, []).append((q, p))
    for q, p in by_slot.get(0, ()):
        frame.inject(q, p)

    def log(li, qubits, paulis):
        if trace is not None and any(p != "I" for p in paulis):
            trace.append(f"{li} {','.join(str(q) for q in qubits)} "
                         f"{','.join(paulis)}")

    bits = []
    all_qubits = range(circuit.n_qubits)
    for li, layer in enumerate(circuit.layers, start=1):
        touched = set()
        for gate in layer:
            op, qubits = gate[0], gate[1]
            touched.update(qubits)
            if op in (MEAS_Z, MEAS_X):
                basis = "Z" if op == MEAS_Z else "X"
                bits.append(measure(frame, qubits[0], basis, model, rng))
                continue
            propagate(frame, gate)
            if op == CNOT:
                u = apply_noise(frame, "2q", qubits, model, rng)
                if u < model.p_2q:
                    log(li, qubits,
                        _two_qubit_paulis(_channel_index(u, model.p_2q, 15)))
            elif op in (PREP_Z, PREP_X):
                u = apply_noise(frame, "reset", (qubits[0], "Z" if op == PREP_Z else "X"),
                                model, rng)
                if u < model.p_reset:
                    log(li, qubits[:1], ("X" if op == PREP_Z else "Z",))
            else:
                u = apply_noise(frame, "1q", qubits, model, rng)
                if u < model.p_1q:
                    log(li, qubits, (_PAULI_1Q[_channel_index(u, model.p_1q, 3)],))
        for q in all_qubits:
            if q not in touched:
                u = apply_noise(frame, "idle", (q,), model, rng)
                if u < model.p_idle:
                    log(li, (q,), (_PAULI_1Q[_channel_index(u, model.p_idle, 3)],))
        for q, p in by_slot.get(li, ()):
            frame.inject(q, p)
    return np.array(bits, dtype=np.uint8)


def readout_z(frame: PauliFrame, qubits) -> np.ndarray:
    """Noiseless destructive Z-basis readout flips."""
    return frame.x[list(qubits)].copy()


# Compiled engine.

_KIND_1Q, _KIND_2Q, _KIND_IDLE, _KIND_MEAS, _KIND_RESET = range(5)
_KIND_MULT = {_KIND_1Q: 0.1, _KIND_2Q: 1.0, _KIND_IDLE: 0.1,
              _KIND_MEAS: 1.0, _KIND_RESET: 1.0}
_KIND_OUTCOMES = {_KIND_1Q: 3, _KIND_2Q: 15, _KIND_IDLE: 3,
                  _KIND_MEAS: 1, _KIND_RESET: 1}


class CompiledCircuit:
    """Precomputed linear action of a circuit on frames and recorded bits.

    Rows pack [bit flips | X-frame | Z-frame] as uint64 words. Row blocks
    exist for every (noise site, channel outcome) and for every incoming
    frame component; executing one round is sampling uniforms, comparing
    against per-site probabilities, and XORing the selected rows.

    Sites belonging to a deselected generator (site_gen >= 0 and inactive)
    are replaced by their alternates: data-qubit couplings degrade to data
    idling and ancilla activity disappears. Effects never cross generators
    on the frame side, so masking is exact.
    """

    def __init__(self, circuit: Circuit, n_data: int, anc_gen=None):
        self.circuit = circuit
        self.n_data = n_data
        self.n_qubits = circuit.n_qubits
        self.n_bits = len(circuit.meas_tags)
        self.meas_tags = circuit.meas_tags
        self._anc_gen = dict(anc_gen or {})
        self._compile()

    # word layout: [bits | fx | fz]
    def _compile(self):
        nq = self.n_qubits
        self.bw = (self.n_bits + 63) // 64 if self.n_bits else 0
        self.fw = (nq + 63) // 64
        self.w_total = self.bw + 2 * self.fw
        layers = self.circuit.layers
        L = len(layers)

        T = np.zeros((nq, 2, self.w_total), dtype=np.uint64)
        for q in range(nq):
            T[q, 0, self.bw + (q >> 6)] = np.uint64(1) << np.uint64(q & 63)
            T[q, 1, self.bw + self.fw + (q >> 6)] = np.uint64(1) << np.uint64(q & 63)
        snapshots = [None] * (L + 1)
        snapshots[L] = T.copy()

        bit_counter = self.n_bits
        bit_of_gate = {}
        for li in range(L - 1, -1, -1):
            for gi in range(len(layers[li]) - 1, -1, -1):
                op = layers[li][gi][0]
                if op in (MEAS_Z, MEAS_X):
                    bit_counter -= 1
                    bit_of_gate[(li, gi)] = bit_counter
        # bits are numbered in forward gate order; rewind assigned them
        # backward, so remap to forward order
        ordered = sorted(bit_of_gate)
        for j, key in enumerate(ordered):
            bit_of_gate[key] = j

        for li in range(L - 1, -1, -1):
            T = snapshots[li + 1].copy()
            for gi, gate in enumerate(layers[li]):
                op, qubits = gate[0], gate[1]
                if op == CNOT:
                    c, t = qubits
                    T[c, 0] = snapshots[li + 1][c, 0] ^ snapshots[li + 1][t, 0]
                    T[t, 1] = snapshots[li + 1][t, 1] ^ snapshots[li + 1][c, 1]
                elif op == H:
                    q = qubits[0]
                    T[q, 0] = snapshots[li + 1][q, 1]
                    T[q, 1] = snapshots[li + 1][q, 0]
                elif op == S:
                    q = qubits[0]
                    T[q, 0] = snapshots[li + 1][q, 0] ^ snapshots[li + 1][q, 1]
                elif op in (PREP_Z, PREP_X):
                    q = qubits[0]
                    T[q] = 0
                elif op in (MEAS_Z, MEAS_X):
                    q = qubits[0]
                    j = bit_of_gate[(li, gi)]
                    comp = 0 if op == MEAS_Z else 1
                    T[q, comp] = T[q, comp].copy()
                    T[q, comp, j >> 6] ^= np.uint64(1) << np.uint64(j & 63)
            snapshots[li] = T
        self.snapshots = snapshots
        self.in_effects = snapshots[0]

        rows = []
        site_kind, site_start, site_gen = [], [], []
        site_alt_start, site_slot = [], []

        def add_rows(effects):
            start = len(rows)
            rows.extend(effects)
            return start

        def idle_rows(q, slot):
            snap = snapshots[slot]
            ex, ez = snap[q, 0], snap[q, 1]
            return [ex, ex ^ ez, ez]

        for li, layer in enumerate(self.circuit.layers, start=1):
            touched = set()
            for gi, gate in enumerate(layer):
                op, qubits = gate[0], gate[1]
                gen = gate[2] if len(gate) > 2 else -1
                touched.update(qubits)
                snap = snapshots[li]
                if op == CNOT:
                    a, b = qubits
                    eff = []
                    for k in range(15):
                        pa, pb = _two_qubit_paulis(k)
                        row = np.zeros(self.w_total, dtype=np.uint64)
                        for q, pp in ((a, pa), (b, pb)):
                            if pp in ("X", "Y"):
                                row ^= snap[q, 0]
                            if pp in ("Z", "Y"):
                                row ^= snap[q, 1]
                        eff.append(row)
                    site_kind.append(_KIND_2Q)
                    site_start.append(add_rows(eff))
                    site_gen.append(gen)
                    site_slot.append(li)
                    if gen >= 0:
                        data_q = a if a < self.n_data else b
                        site_alt_start.append(add_rows(idle_rows(data_q, li)))
                    else:
                        site_alt_start.append(-1)
                elif op in (H, S):
                    site_kind.append(_KIND_1Q)
                    site_start.append(add_rows(idle_rows(qubits[0], li)))
                    site_gen.append(gen)
                    site_slot.append(li)
                    site_alt_start.append(-1)
                elif op in (PREP_Z, PREP_X):
                    q = qubits[0]
                    comp = 0 if op == PREP_Z else 1
                    site_kind.append(_KIND_RESET)
                    site_start.append(add_rows([snapshots[li][q, comp]]))
                    site_gen.append(gen)
                    site_slot.append(li)
                    site_alt_start.append(-1)
                else:  # measurement flip
                    j = bit_of_gate[(li - 1, gi)]
                    row = np.zeros(self.w_total, dtype=np.uint64)
                    row[j >> 6] ^= np.uint64(1) << np.uint64(j & 63)
                    site_kind.append(_KIND_MEAS)
                    site_start.append(add_rows([row]))
                    site_gen.append(gen)
                    site_slot.append(li)
                    site_alt_start.append(-1)
            for q in range(self.n_qubits):
                if q in touched:
                    continue
                site_kind.append(_KIND_IDLE)
                site_start.append(add_rows(idle_rows(q, li)))
                site_gen.append(self._anc_gen.get(q, -1))
                site_slot.append(li)
                site_alt_start.append(-1)

        self.rows = (np.array(rows, dtype=np.uint64) if rows
                     else np.zeros((0, self.w_total), dtype=np.uint64))
        self.site_kind = np.array(site_kind, dtype=np.int8)
        self.site_start = np.array(site_start, dtype=np.int64)
        self.site_gen = np.array(site_gen, dtype=np.int64)
        self.site_alt_start = np.array(site_alt_start, dtype=np.int64)
        self.site_mult = np.array([_KIND_MULT[k] for k in site_kind])
        self.site_k = np.array([_KIND_OUTCOMES[k] for k in site_kind], dtype=np.int64)
        self.site_slot = np.array(site_slot, dtype=np.int64)
        self.n_sites = len(site_kind)
        self._maskable = self.site_gen >= 0
        self._idle_like = (self.site_kind == _KIND_IDLE)
        # last coupling layer per generator, for duration-scaled idling
        gen_last = {}
        for k, g, s in zip(site_kind, site_gen, site_slot):
            if g >= 0 and k == _KIND_2Q:
                gen_last[g] = max(gen_last.get(g, 0), s)
        if gen_last:
            self.gen_last_slot = np.zeros(max(gen_last) + 1, dtype=np.int64)
            for g, s in gen_last.items():
                self.gen_last_slot[g] = s
        else:
            self.gen_last_slot = np.zeros(0, dtype=np.int64)

        gens = [t.gen for t in self.meas_tags]
        self.bit_gen = np.array(gens, dtype=np.int64)

    def sample(self, fx: np.ndarray, fz: np.ndarray, model: NoiseModel, rng,
               active=None, idle_cutoff=None):
        """One noisy execution. fx, fz are uint8 masks over all qubits;
        returns (bits, fx_out, fz_out). active is a boolean array over
        generator ids; None means everything runs. idle_cutoff drops idle
        noise in layers after the selected measurements have completed."""
        acc = np.zeros(self.w_total, dtype=np.uint64)
        for comp, mask in ((0, fx), (1, fz)):
            for q in np.flatnonzero(mask):
                acc ^= self.in_effects[q, comp]

        if self.n_sites:
            u = rng.random(self.n_sites)
            p_site = self.site_mult * model.p
            starts = self.site_start
            ks = self.site_k
            if active is not None and self._maskable.any():
                masked = self._maskable & ~active[np.where(self._maskable,
                                                           self.site_gen, 0)]
                has_alt = self.site_alt_start >= 0
                p_site = np.where(masked & ~has_alt, 0.0, p_site)
                p_site = np.where(masked & has_alt, model.p_idle, p_site)
                starts = np.where(masked & has_alt, self.site_alt_start, starts)
                ks = np.where(masked & has_alt, 3, ks)
            if idle_cutoff is not None:
                late_idle = self._idle_like & (self.site_slot > idle_cutoff)
                p_site = np.where(late_idle, 0.0, p_site)
                if active is not None and self._maskable.any():
                    late_alt = masked & (self.site_alt_start >= 0) & \
                        (self.site_slot > idle_cutoff)
                    p_site = np.where(late_alt, 0.0, p_site)
            hits = np.flatnonzero(u < p_site)
            for i in hits:
                k = _channel_index(u[i], p_site[i], int(ks[i]))
                acc ^= self.rows[starts[i] + k]

        bits = np.unpackbits(acc[: self.bw].view(np.uint8), bitorder="little")[: self.n_bits]
        fx_out = np.unpackbits(
            acc[self.bw: self.bw + self.fw].view(np.uint8), bitorder="little"
        )[: self.n_qubits]
        fz_out = np.unpackbits(
            acc[self.bw + self.fw:].view(np.uint8), bitorder="little"
        )[: self.n_qubits]
        if active is not None:
            measured = (self.bit_gen < 0) | active[np.maximum(self.bit_gen, 0)]
            bits &= measured.astype(np.uint8)
        return bits, fx_out, fz_out

    def apply_fixed_faults(self, fx, fz, injections, active=None):
        """Noiseless pass with fixed (after_layer, qubit, pauli) faults;
        mirrors run_circuit injections for equivalence testing."""
        acc = np.zeros(self.w_total, dtype=np.uint64)
        for comp, mask in ((0, fx), (1, fz)):
            for q in np.flatnonzero(mask):
                acc ^= self.in_effects[q, comp]
        for t, q, p in injections:
            if p in ("X", "Y"):
                acc ^= self.snapshots[t][q, 0]
            if p in ("Z", "Y"):
                acc ^= self.snapshots[t][q, 1]
        bits = np.unpackbits(acc[: self.bw].view(np.uint8), bitorder="little")[: self.n_bits]
        fx_out = np.unpackbits(
            acc[self.bw: self.bw + self.fw].view(np.uint8), bitorder="little"
        )[: self.n_qubits]
        fz_out = np.unpackbits(
            acc[self.bw + self.fw:].view(np.uint8), bitorder="little"
        )[: self.n_qubits]
        if active is not None:
            measured = (self.bit_gen < 0) | active[np.maximum(self.bit_gen, 0)]
            bits &= measured.astype(np.uint8)
        return bits, fx_out, fz_out


class TableauSim:
    """Signed stabilizer tableau (destabilizer form) for small circuits.

    Ground truth for the frame engines: tracks phases exactly, supports
    Pauli fault injection, and refuses nondeterministic measurements so
    disagreements cannot hide behind randomness.
    """

    def __init__(self, n: int):
        if n > 32:
            raise ValueError("tableau oracle is limited to 32 qubits")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        for i in range(n):
            self.x[i, i] = 1
            self.z[n + i, i] = 1

    def h(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def cnot(self, c, t):
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ 1)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def inject(self, q, pauli):
        if pauli == "X":
            self.r ^= self.z[:, q]
        elif pauli == "Z":
            self.r ^= self.x[:, q]
        elif pauli == "Y":
            self.r ^= self.x[:, q] ^ self.z[:, q]
        else:
            raise ValueError(f"bad Pauli {pauli!r}")

    def _g(self, x1, z1, x2, z2):
        # exponent of i contributed when multiplying single-qubit Paulis
        if x1 == z1 == 0:
            return 0
        if x1 and z1:
            return int(z2) - int(x2)
        if x1:
            return int(z2) * (2 * int(x2) - 1)
        return int(x2) * (1 - 2 * int(z2))

    def _rowsum(self, h, i):
        phase = 2 * self.r[h] + 2 * self.r[i]
        for q in range(self.n):
            phase += self._g(self.x[i, q], self.z[i, q], self.x[h, q], self.z[h, q])
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]
        self.r[h] = (phase % 4) // 2

    def measure_z(self, q, forced=None):
        n = self.n
        piv = next((i for i in range(n, 2 * n) if self.x[i, q]), None)
        if piv is not None:
            if forced is None:
                raise ValueError("nondeterministic measurement needs a forced outcome")
            outcome = forced
            for i in range(2 * n):
                if i != piv and self.x[i, q]:
                    self._rowsum(i, piv)
            self.x[piv - n] = self.x[piv]
            self.z[piv - n] = self.z[piv]
            self.r[piv - n] = self.r[piv]
            self.x[piv] = 0
            self.z[piv] = 0
            self.z[piv, q] = 1
            self.r[piv] = outcome
            return outcome
        # deterministic: accumulate stabilizer combination into scratch
        sx = np.zeros(self.n, dtype=np.uint8)
        sz = np.zeros(self.n, dtype=np.uint8)
        phase = 0
        for i in range(n):
            if self.x[i, q]:
                phase += 2 * self.r[n + i]
                for qq in range(self.n):
                    phase += self._g(self.x[n + i, qq], self.z[n + i, qq],
                                     sx[qq], sz[qq])
                sx ^= self.x[n + i]
                sz ^= self.z[n + i]
        return (phase % 4) // 2

    def measure_x(self, q, forced=None):
        self.h(q)
        out = self.measure_z(q, forced)
        self.h(q)
        return out

    def prep_z(self, q):
        try:
            out = self.measure_z(q)
        except ValueError:
            out = self.measure_z(q, forced=0)
        if out:
            self.inject(q, "X")

    def prep_x(self, q):
        self.prep_z(q)
        self.h(q)

    def stabilizer_rows(self):
        return [(self.r[i], self.x[i].copy(), self.z[i].copy())
                for i in range(self.n, 2 * self.n)]


def tableau_oracle(circuit: Circuit, injections=()) -> np.ndarray:
    """Noiseless tableau execution with fixed Pauli faults; returns the
    recorded bits. Measurements must be deterministic."""
    sim = TableauSim(circuit.n_qubits)
    by_slot = {}
    for t, q, p in injections:
        by_slot.setdefault(t, []).append((q, p))
    for q, p in by_slot.get(0, ()):
        sim.inject(q, p)
    bits = []
    for li, layer in enumerate(circuit.layers, start=1):
        for gate in layer:
            op, qubits = gate[0], gate[1]
            if op == CNOT:
                sim.cnot(*qubits)
            elif op == H:
                sim.h(qubits[0])
            elif op == S:
                sim.s(qubits[0])
            elif op == PREP_Z:
                sim.prep_z(qubits[0])
            elif op == PREP_X:
                sim.prep_x(qubits[0])
            elif op == MEAS_Z:
                bits.append(sim.measure_z(qubits[0]))
            elif op == MEAS_X:
                bits.append(sim.measure_x(qubits[0]))
            else:
                raise ValueError(f"unsupported gate {op!r}")
        for q, p in by_slot.get(li, ()):
            sim.inject(q, p)
    return np.array(bits, dtype=np.uint8)
