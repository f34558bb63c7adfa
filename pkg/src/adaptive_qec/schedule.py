"""Syndrome-extraction circuits: Tanner-graph edge coloring, bare-ancilla
measurement rounds, flagged block readout, hook-safe concatenated-generator
schedules, and the adaptive generator-selection rule.

Gates are (op, qubits, gen) triples; gen is -1 for gates that always run
and otherwise names the outer generator a gate belongs to, which is how
adaptive rounds drop deselected generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import INNER_X, INNER_Z, ConcatenatedCode, CssCode

PREP_Z, PREP_X, H, S, CNOT, MEAS_Z, MEAS_X = "PZ", "PX", "H", "S", "CNOT", "MZ", "MX"
_ONE_QUBIT_UNITARIES = (H, S)
_PREPS = (PREP_Z, PREP_X)
_MEASURES = (MEAS_Z, MEAS_X)


@dataclass(frozen=True)
class MeasTag:
    kind: str          # iceberg-syndrome | iceberg-flag | hgp-syndrome | data-readout
    block: int = -1
    gen: int = -1      # global outer-generator index for hgp-syndrome bits
    pauli: str = ""    # generator type the bit reports on ("X" or "Z")


@dataclass
class Circuit:
    n_qubits: int
    layers: list = field(default_factory=list)
    meas_tags: list = field(default_factory=list)
    anc_gen: dict = field(default_factory=dict)  # ancilla qubit -> generator id

    def add_layer(self, gates) -> None:
        self.layers.append(list(gates))

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self):
        for layer in self.layers:
            yield from layer

    def count_ops(self, op: str) -> int:
        return sum(1 for g in self.gates() if g[0] == op)

    def validate(self) -> None:
        """Layer disjointness plus re-preparation before qubit reuse."""
        measured = set()
        n_meas = 0
        for li, layer in enumerate(self.layers):
            seen = set()
            for op, qubits, _ in layer:
                for q in qubits:
                    if q in seen:
                        raise ValueError(f"qubit {q} used twice in layer {li}")
                    if not 0 <= q < self.n_qubits:
                        raise ValueError(f"qubit {q} out of range")
                    seen.add(q)
                    if q in measured and op not in _PREPS:
                        raise ValueError(f"qubit {q} reused after measurement without prep")
                if op in _MEASURES:
                    n_meas += 1
                    measured.update(qubits)
                elif op in _PREPS:
                    measured.difference_update(qubits)
        if n_meas != len(self.meas_tags):
            raise ValueError("measurement count disagrees with tag registry")

    def dumps(self) -> str:
        lines = []
        for layer in self.layers:
            lines.append(" ".join(f"{op} {','.join(str(q) for q in qubits)}"
                                  for op, qubits, _ in layer))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, n_qubits: int) -> "Circuit":
        circ = cls(n_qubits)
        for line in text.strip("\n").split("\n"):
            gates = []
            toks = line.split()
            for op, qs in zip(toks[::2], toks[1::2]):
                gates.append((op, tuple(int(q) for q in qs.split(",")), -1))
            circ.add_layer(gates)
        return circ


class EdgeColoring:
    """Proper edge coloring of a bipartite graph with max-degree colors."""

    def __init__(self, edges):
        self.edges = list(edges)
        self.color = {}
        self.n_colors = 0
        self._build()

    def _build(self):
        if not self.edges:
            return
        degree = {}
        for c, q in self.edges:
            for vk in ((0, c), (1, q)):
                degree[vk] = degree.get(vk, 0) + 1
        max_deg = max(degree.values())
        adj = {vk: {} for vk in degree}  # vertex -> color -> neighbor

        def free_color(vk):
            for col in range(max_deg):
                if col not in adj[vk]:
                    return col
            raise AssertionError("no free color below the degree bound")

        for c, q in self.edges:
            ck, qk = (0, c), (1, q)
            a, b = free_color(ck), free_color(qk)
            if a != b:
                # free color a at q by flipping the alternating a/b path
                cur, want = qk, a
                path = []
                while want in adj[cur]:
                    nxt = adj[cur][want]
                    path.append((cur, nxt, want))
                    cur, want = nxt, (b if want == a else a)
                for x, y, col in path:
                    del adj[x][col]
                    del adj[y][col]
                for x, y, col in path:
                    new = b if col == a else a
                    adj[x][new] = y
                    adj[y][new] = x
                    edge = (x[1], y[1]) if x[0] == 0 else (y[1], x[1])
                    self.color[edge] = new
            adj[ck][a] = qk
            adj[qk][a] = ck
            self.color[(c, q)] = a
        self.n_colors = max(self.color.values()) + 1

        # properness audit
        seen = set()
        for (c, q), col in self.color.items():
            for vk in ((0, c, col), (1, q, col)):
                if vk in seen:
                    raise AssertionError("edge coloring is not proper")
                seen.add(vk)


def edge_color(edges) -> EdgeColoring:
    return EdgeColoring(edges)


def tanner_edges(pcm) -> list:
    return [(r, q) for r in range(pcm.rows) for q in pcm.row_support(r)]


def build_hgp_circuit(code: CssCode, gen_offset_x: int = 0, gen_offset_z: int | None = None) -> Circuit:
    """One full measurement round for a CSS code with one bare ancilla per
    generator: a shared prep layer, the X-check CNOT layers from an edge
    coloring, the Z-check layers, then a shared measurement layer.
    """
    mx, mz = code.hx.rows, code.hz.rows
    if gen_offset_z is None:
        gen_offset_z = gen_offset_x + mx
    n = code.n
    anc_x = {g: n + g for g in range(mx)}
    anc_z = {g: n + mx + g for g in range(mz)}
    cx = edge_color(tanner_edges(code.hx))
    cz = edge_color(tanner_edges(code.hz))

    circ = Circuit(n + mx + mz)
    prep = [(PREP_X, (anc_x[g],), gen_offset_x + g) for g in range(mx)]
    prep += [(PREP_Z, (anc_z[g],), gen_offset_z + g) for g in range(mz)]
    circ.add_layer(prep)
    for col in range(cx.n_colors):
        circ.add_layer(
            (CNOT, (anc_x[g], q), gen_offset_x + g)
            for (g, q), c in cx.color.items() if c == col
        )
    for col in range(cz.n_colors):
        circ.add_layer(
            (CNOT, (q, anc_z[g]), gen_offset_z + g)
            for (g, q), c in cz.color.items() if c == col
        )
    meas = [(MEAS_X, (anc_x[g],), gen_offset_x + g) for g in range(mx)]
    meas += [(MEAS_Z, (anc_z[g],), gen_offset_z + g) for g in range(mz)]
    circ.add_layer(meas)
    for g in range(mx):
        circ.meas_tags.append(MeasTag("hgp-syndrome", gen=gen_offset_x + g, pauli="X"))
    for g in range(mz):
        circ.meas_tags.append(MeasTag("hgp-syndrome", gen=gen_offset_z + g, pauli="Z"))
    circ.validate()
    return circ


def _block_layers(data, anc_x, anc_z, block):
    """Nine layers measuring both weight-4 block generators at once.

    The X ancilla drives the data while the Z ancilla collects from it,
    pipelined one step apart; the two ancilla-ancilla couplings wrap the
    sequence so that any mid-circuit ancilla fault whose hook would reach
    two data qubits also flips the opposite ancilla's readout. The two
    syndrome bits therefore double as each other's flags.
    """
    d = data
    layers = [
        [(PREP_X, (anc_x,), -1), (PREP_Z, (anc_z,), -1)],
        [(CNOT, (anc_x, anc_z), -1)],
        [(CNOT, (anc_x, d[0]), -1)],
        [(CNOT, (anc_x, d[1]), -1), (CNOT, (d[0], anc_z), -1)],
        [(CNOT, (anc_x, d[2]), -1), (CNOT, (d[1], anc_z), -1)],
        [(CNOT, (anc_x, d[3]), -1), (CNOT, (d[2], anc_z), -1)],
        [(CNOT, (d[3], anc_z), -1)],
        [(CNOT, (anc_x, anc_z), -1)],
        [(MEAS_X, (anc_x,), -1), (MEAS_Z, (anc_z,), -1)],
    ]
    tags = [
        MeasTag("iceberg-syndrome", block=block, pauli="X"),
        MeasTag("iceberg-syndrome", block=block, pauli="Z"),
    ]
    return layers, tags


def build_iceberg_circuit(data_qubits, anc_x, anc_z, n_qubits, block: int = 0) -> Circuit:
    """Joint flagged readout of one [[4,2,2]] block: 8 data CNOTs plus 2
    ancilla-ancilla flag couplings, 2 recorded bits."""
    circ = Circuit(n_qubits)
    layers, tags = _block_layers(tuple(data_qubits), anc_x, anc_z, block)
    for layer in layers:
        circ.add_layer(layer)
    circ.meas_tags = tags
    circ.validate()
    return circ


def build_iceberg_stage(code: ConcatenatedCode) -> Circuit:
    """All blocks measured in parallel, nine layers total."""
    B = code.n_blocks
    n = code.n
    circ = Circuit(n + 2 * B)
    per_block = []
    for b in range(B):
        data = tuple(range(4 * b, 4 * b + 4))
        layers, tags = _block_layers(data, n + 2 * b, n + 2 * b + 1, b)
        per_block.append((layers, tags))
    n_layers = len(per_block[0][0])
    for li in range(n_layers):
        merged = []
        for layers, _ in per_block:
            merged.extend(layers[li])
        circ.add_layer(merged)
    for b in range(B):
        circ.meas_tags.extend(per_block[b][1])
    circ.validate()
    return circ


def _gen_pairs(code: ConcatenatedCode, gen: int):
    """Per touched block, the (first, second) physical qubits of the inner
    logical the generator acts through; first = lower index."""
    sup = code.hgp_supports[gen]
    by_block = {}
    for q in sup:
        by_block.setdefault(q // 4, []).append(q)
    pairs = []
    for b in sorted(by_block):
        qs = sorted(by_block[b])
        if len(qs) != 2:
            raise ValueError("generator does not act through weight-2 block logicals")
        pairs.append((qs[0], qs[1]))
    return pairs


def build_concat_generator_circuit(code: ConcatenatedCode, gen: int,
                                   ordering: str = "safe") -> Circuit:
    """Bare-ancilla readout of one outer-derived generator.

    The safe ordering couples every block's first qubit before any block's
    second qubit, so a mid-circuit ancilla fault leaves at least one
    odd-weight block (detectable) unless the residual is a full stabilizer.
    The blockwise ordering exists to demonstrate the hook failure.
    """
    pairs = _gen_pairs(code, gen)
    if ordering == "safe":
        order = [p[0] for p in pairs] + [p[1] for p in pairs]
    elif ordering == "blockwise":
        order = [q for p in pairs for q in p]
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    anc = code.n
    circ = Circuit(code.n + 1)
    gtype = code.hgp_types[gen]
    if gtype == "X":
        circ.add_layer([(PREP_X, (anc,), gen)])
        for q in order:
            circ.add_layer([(CNOT, (anc, q), gen)])
        circ.add_layer([(MEAS_X, (anc,), gen)])
    else:
        circ.add_layer([(PREP_Z, (anc,), gen)])
        for q in order:
            circ.add_layer([(CNOT, (q, anc), gen)])
        circ.add_layer([(MEAS_Z, (anc,), gen)])
    circ.meas_tags.append(MeasTag("hgp-syndrome", gen=gen, pauli=gtype))
    circ.validate()
    return circ


def _staircase_order(pairs):
    """Coupling order f1 f2 s1 f3 s2 ... fB s(B-1) sB: every block's first
    qubit precedes its second, and blocks complete as early as possible,
    which keeps the reach of a mid-circuit ancilla fault short."""
    if len(pairs) == 1:
        return [pairs[0][0], pairs[0][1]]
    order = [pairs[0][0]]
    for j in range(1, len(pairs)):
        order.append(pairs[j][0])
        order.append(pairs[j - 1][1])
    order.append(pairs[-1][1])
    return order


def build_concat_hgp_stage(code: ConcatenatedCode) -> Circuit:
    """Full outer-generator stage, hook-safe and greedily packed.

    Each generator's couplings follow the staircase order; a greedy layered
    scheduler places every coupling in the earliest layer that respects the
    per-generator order and qubit disjointness. Early packing matters for
    adaptive rounds: a small selected set finishes in few layers, bounding
    how long the rest of the code idles.
    """
    n = code.n
    x_gens = [g for g, t in enumerate(code.hgp_types) if t == "X"]
    z_gens = [g for g, t in enumerate(code.hgp_types) if t == "Z"]
    anc = {g: n + i for i, g in enumerate(x_gens + z_gens)}
    seqs = {g: _staircase_order(_gen_pairs(code, g)) for g in anc}

    circ = Circuit(n + len(anc))
    prep = [(PREP_X, (anc[g],), g) for g in x_gens]
    prep += [(PREP_Z, (anc[g],), g) for g in z_gens]
    circ.add_layer(prep)
    pos = {g: 0 for g in anc}
    while any(pos[g] < len(seqs[g]) for g in anc):
        busy = set()
        layer = []
        for g in sorted(anc):
            if pos[g] >= len(seqs[g]):
                continue
            q, a = seqs[g][pos[g]], anc[g]
            if q in busy or a in busy:
                continue
            layer.append((CNOT, (a, q), g) if code.hgp_types[g] == "X"
                         else (CNOT, (q, a), g))
            busy.add(q)
            busy.add(a)
            pos[g] += 1
        circ.add_layer(layer)
    meas = [(MEAS_X, (anc[g],), g) for g in x_gens]
    meas += [(MEAS_Z, (anc[g],), g) for g in z_gens]
    circ.add_layer(meas)
    for g in x_gens:
        circ.meas_tags.append(MeasTag("hgp-syndrome", gen=g, pauli="X"))
    for g in z_gens:
        circ.meas_tags.append(MeasTag("hgp-syndrome", gen=g, pauli="Z"))
    circ.anc_gen = {a: g for g, a in anc.items()}
    circ.validate()
    return circ


def filter_selected(circuit: Circuit, active) -> Circuit:
    """Explicit circuit for a selection: gates and bits of deselected
    generators are removed (their qubits simply idle). Reference-simulator
    counterpart of compiled masking, used for equivalence checks."""
    out = Circuit(circuit.n_qubits)
    for layer in circuit.layers:
        out.add_layer(g for g in layer if g[2] < 0 or active[g[2]])
    out.meas_tags = [t for t in circuit.meas_tags if t.gen < 0 or active[t.gen]]
    out.anc_gen = {a: g for a, g in circuit.anc_gen.items() if active[g]}
    out.validate()
    return out


def make_barrier(n_qubits: int) -> Circuit:
    """One gate-free layer: every qubit idles while selection is decided."""
    circ = Circuit(n_qubits)
    circ.add_layer([])
    return circ


def select_generators(code: ConcatenatedCode, sigma_ib, flags, matched: bool = True) -> set:
    """Outer generators to measure, given the block syndrome and flag bits.

    sigma_ib and flags hold the X-type bits for blocks 0..B-1 followed by
    the Z-type bits. A fired X-type bit reports a Z error, so it selects
    the X-type outer generators overlapping that block (matched mode);
    flags herald hook errors of the opposite kind and select accordingly.
    Unmatched mode selects every overlapping generator regardless of type.
    """
    B = code.n_blocks
    sigma_ib = np.asarray(sigma_ib)
    flags = np.asarray(flags)
    if sigma_ib.shape != (2 * B,):
        raise ValueError("expected one syndrome bit per block generator")
    out: set = set()
    for b in range(B):
        sx, sz = sigma_ib[b], sigma_ib[B + b]
        fx, fz = flags[b], flags[B + b]
        if not matched:
            if sx or sz or fx or fz:
                out.update(code.phi_all[b])
            continue
        if sx:
            out.update(code.phi_x[b])
        if sz:
            out.update(code.phi_z[b])
        if fx:  # flagged hook during the X-type readout: X-type data error
            out.update(code.phi_z[b])
        if fz:
            out.update(code.phi_x[b])
    return out


def unmask_interval(p: float, base: int = 10, ref_p: float = 1e-3) -> int:
    """Rounds between full-generator measurements; inverse in p, clamped.
    A noiseless experiment never needs unmasking."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return 1000
    return int(min(1000, max(1, int(base * ref_p / p + 0.5))))


def unmask_round(p: float, round_index: int, base: int = 10, ref_p: float = 1e-3) -> bool:
    """True when the 1-based round index is a full-measurement round."""
    return round_index % unmask_interval(p, base, ref_p) == 0
