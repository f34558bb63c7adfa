"""Code constructions: classical seeds, hypergraph products, the [[4,2,2]]
error-detecting code, grid layouts, block assignment, concatenation, and
randomized distance estimation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gf2 import BinMatrix, in_rowspan, nullspace_basis, rank, rref_packed

# Local supports of the [[4,2,2]] logical operators, 0-based within a block.
# X logicals share qubit 0; Z logicals share qubit 3.
INNER_X = ((0, 1), (0, 2))
INNER_Z = ((1, 3), (2, 3))

# Reference seeds for the (3,4)-biregular family; chosen once so that the
# n=8 instance is a [8,2,4] code and the n=16 instance is a [16,4,6] code.
REFERENCE_EXPANDER_SEEDS = {8: 4, 16: 2}


@dataclass(frozen=True)
class ClassicalCode:
    pcm: BinMatrix
    n: int
    k: int
    d_estimate: int | None = None

    def __post_init__(self):
        if self.k != self.n - rank(self.pcm):
            raise ValueError("k must equal n - rank(pcm)")


@dataclass(frozen=True)
class CssCode:
    """CSS stabilizer code given by its X- and Z-type parity checks."""

    hx: BinMatrix
    hz: BinMatrix
    n: int
    k: int
    d_estimate: int | None = None
    logical_x: tuple = ()  # tuples of qubit indices, one per logical qubit
    logical_z: tuple = ()

    def __post_init__(self):
        if self.hx.cols != self.n or self.hz.cols != self.n:
            raise ValueError("parity checks must have n columns")

    def check_commutation(self) -> bool:
        """Every X row overlaps every Z row on an even number of columns."""
        for r in range(self.hx.rows):
            sup = set(self.hx.row_support(r))
            for s in range(self.hz.rows):
                if len(sup.intersection(self.hz.row_support(s))) % 2:
                    return False
        return True


@dataclass
class GridLayout:
    """Two-sector grid geometry of a square hypergraph product code.

    Sector L is n x n, sector R is m x m, where the seed pcm is m x n.
    Qubit q < n*n sits at (q // n, q % n, L); the rest sit row-major in R.
    """

    seed: BinMatrix
    n: int
    m: int
    pivots: tuple = ()       # pivot qubit per logical, set by the basis builder
    x_supports: tuple = ()   # X logical supports (rows of the L sector)
    z_supports: tuple = ()   # Z logical supports (columns of the L sector)
    logical_pairs: tuple = ()  # (a, b) free-coordinate labels per logical

    @property
    def n_phys(self) -> int:
        return self.n * self.n + self.m * self.m

    def coord(self, q: int):
        n2 = self.n * self.n
        if q < n2:
            return q // self.n, q % self.n, "L"
        q -= n2
        return q // self.m, q % self.m, "R"

    def index(self, r: int, c: int, sector: str) -> int:
        if sector == "L":
            return r * self.n + c
        return self.n * self.n + r * self.m + c

    def is_diagonal(self, q: int) -> bool:
        r, c, _ = self.coord(q)
        return r == c

    def twin(self, q: int) -> int | None:
        """Mirror partner (c, r) of an off-diagonal qubit (r, c)."""
        r, c, s = self.coord(q)
        if r == c:
            return None
        return self.index(c, r, s)


@dataclass(frozen=True)
class Assignment:
    """Mapping of outer-code qubits onto two-logical blocks."""

    block_of: np.ndarray
    slot_of: np.ndarray
    blocks: tuple  # (qubit at slot 0, qubit at slot 1) per block

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


@dataclass
class ConcatenatedCode:
    """Outer HGP code whose qubits are encoded pairwise in [[4,2,2]] blocks."""

    outer: CssCode
    layout: GridLayout
    assignment: Assignment
    hx: BinMatrix
    hz: BinMatrix
    n: int
    k: int
    n_blocks: int
    # S_HGP bookkeeping: one entry per outer generator, X type first
    hgp_types: tuple = ()     # "X" or "Z"
    hgp_weights: tuple = ()
    hgp_blocks: tuple = ()    # touched block tuples per generator
    hgp_supports: tuple = ()  # physical supports per generator
    phi_all: tuple = ()       # per block: global S_HGP indices sharing support
    phi_x: tuple = ()         # per block: X-type S_HGP indices
    phi_z: tuple = ()
    logical_x: tuple = ()
    logical_z: tuple = ()
    d_estimate: int | None = None

    @property
    def n_hgp_x(self) -> int:
        return sum(1 for t in self.hgp_types if t == "X")

    @property
    def n_hgp_z(self) -> int:
        return sum(1 for t in self.hgp_types if t == "Z")


def make_regular_ldpc(n: int, dv: int, dc: int, seed: int) -> ClassicalCode:
    """Random (dv, dc)-biregular code from a stub-matching configuration model.

    Double edges left by the matching are removed by random edge swaps, so
    the final Tanner graph is simple. Deterministic for a fixed seed.
    """
    if (n * dv) % dc:
        raise ValueError(f"n*dv = {n * dv} not divisible by dc = {dc}")
    m = n * dv // dc
    rng = np.random.default_rng(seed)
    for _ in range(200):
        bit_stubs = np.repeat(np.arange(n), dv)
        chk_stubs = np.repeat(np.arange(m), dc)
        rng.shuffle(bit_stubs)
        edges = list(zip(bit_stubs.tolist(), chk_stubs.tolist()))
        if _swap_out_double_edges(edges, rng):
            entries = [(c, b) for b, c in edges]
            pcm = BinMatrix(m, n, entries)
            k = n - rank(pcm)
            return ClassicalCode(pcm, n, k, d_estimate=_exact_classical_distance(pcm, k))
    raise RuntimeError("could not produce a simple biregular graph")


def _swap_out_double_edges(edges: list, rng, max_steps: int = 10_000) -> bool:
    counts = {}
    for e in edges:
        counts[e] = counts.get(e, 0) + 1
    for _ in range(max_steps):
        dups = [e for e, c in counts.items() if c > 1]
        if not dups:
            return True
        b, c = dups[0]
        i = next(i for i, e in enumerate(edges) if e == (b, c))
        j = int(rng.integers(len(edges)))
        b2, c2 = edges[j]
        if j == i or b2 == b or c2 == c:
            continue
        new1, new2 = (b, c2), (b2, c)
        if counts.get(new1, 0) or counts.get(new2, 0):
            continue
        for old, new in (((b, c), new1), ((b2, c2), new2)):
            counts[old] -= 1
            if not counts[old]:
                del counts[old]
            counts[new] = counts.get(new, 0) + 1
        edges[i], edges[j] = new1, new2
    return False


def _exact_classical_distance(pcm: BinMatrix, k: int, max_k: int = 16) -> int | None:
    """Exhaustive minimum codeword weight; only attempted for small k."""
    if k == 0 or k > max_k:
        return None
    basis = nullspace_basis(pcm)
    best = pcm.cols + 1
    for mask in range(1, 1 << k):
        v = np.zeros(pcm.cols, dtype=np.uint8)
        for i in range(k):
            if (mask >> i) & 1:
                v ^= basis[i]
        w = int(v.sum())
        if 0 < w < best:
            best = w
    return best


def make_lacross(n: int, z: int) -> ClassicalCode:
    """Truncated circulant code: row r has ones at columns r, r+1, r+z."""
    if z >= n:
        raise ValueError(f"z = {z} must be smaller than n = {n}")
    rows = [(r, r + 1, r + z) for r in range(n - z)]
    pcm = BinMatrix.from_rows(rows, n)
    k = n - rank(pcm)
    if k != z:
        raise ValueError("truncated circulant pcm is not full row rank")
    return ClassicalCode(pcm, n, k, d_estimate=_exact_classical_distance(pcm, k))


def make_repetition(n: int) -> ClassicalCode:
    """Bidiagonal parity checks of the length-n repetition code."""
    if n < 2:
        raise ValueError("repetition code needs n >= 2")
    pcm = BinMatrix.from_rows([(i, i + 1) for i in range(n - 1)], n)
    return ClassicalCode(pcm, n, 1, d_estimate=n)


def make_reference_expander(n: int) -> ClassicalCode:
    """(3,4)-biregular instance with a pinned seed for reproducibility."""
    if n not in REFERENCE_EXPANDER_SEEDS:
        raise ValueError(f"no reference seed pinned for n = {n}")
    return make_regular_ldpc(n, 3, 4, REFERENCE_EXPANDER_SEEDS[n])


def hgp(code: ClassicalCode) -> tuple[CssCode, GridLayout]:
    """Square hypergraph product of a full-row-rank seed with itself.

    With an m x n seed H, X checks are (H kron I, I kron H^T) and Z checks
    are (I kron H, H^T kron I); qubits form an n x n and an m x m grid.
    An X check labeled (c, j) covers column j of the left grid with row
    pattern H[c, :] and row c of the right grid with pattern H[:, j].
    """
    H = code.pcm
    m, n = H.rows, H.cols
    if rank(H) != m:
        raise ValueError("seed pcm must have full row rank")
    layout = GridLayout(seed=H, n=n, m=m)
    n2 = n * n

    hx_rows = []
    for c in range(m):
        for j in range(n):
            sup = [i * n + j for i in H.row_support(c)]
            sup += [n2 + c * m + l for l in H.col_support(j)]
            hx_rows.append(tuple(sorted(sup)))
    hz_rows = []
    for i in range(n):
        for c in range(m):
            sup = [i * n + j for j in H.row_support(c)]
            sup += [n2 + kk * m + c for kk in H.col_support(i)]
            hz_rows.append(tuple(sorted(sup)))

    n_phys = n2 + m * m
    hx = BinMatrix.from_rows(hx_rows, n_phys)
    hz = BinMatrix.from_rows(hz_rows, n_phys)
    k = code.k * code.k
    css = CssCode(hx, hz, n_phys, k, d_estimate=code.d_estimate)
    css = canonical_logical_basis(css, layout)
    return css, layout


def canonical_logical_basis(code: CssCode, layout: GridLayout) -> CssCode:
    """Logical basis with row/column supports and single-qubit pivots.

    Systematic codewords of the seed give, for free coordinates a and b,
    an X logical on row a of the left grid with column pattern g_b and a
    Z logical on column b with row pattern g_a. The pair overlaps only at
    grid point (a, b), its pivot. All contracts are verified before return.
    """
    H = layout.seed
    n = layout.n
    red, pivots = rref_packed(H.to_packed(), H.cols)
    pivot_set = set(pivots)
    free = [c for c in range(H.cols) if c not in pivot_set]
    codewords = {}
    for f in free:
        g = np.zeros(H.cols, dtype=np.uint8)
        g[f] = 1
        w, b = f >> 6, np.uint64(f & 63)
        for i, p in enumerate(pivots):
            if (red[i, w] >> b) & np.uint64(1):
                g[p] = 1
        codewords[f] = np.flatnonzero(g)

    xs, zs, pivs, labels = [], [], [], []
    for a in free:
        for b in free:
            x_sup = tuple(int(a) * n + int(j) for j in codewords[b])
            z_sup = tuple(int(i) * n + int(b) for i in codewords[a])
            xs.append(tuple(sorted(x_sup)))
            zs.append(tuple(sorted(z_sup)))
            pivs.append(a * n + b)
            labels.append((a, b))

    if len(xs) != code.k:
        raise ValueError("canonical basis size does not match k")
    _verify_logical_basis(code, xs, zs, pivs)
    layout.pivots = tuple(pivs)
    layout.x_supports = tuple(xs)
    layout.z_supports = tuple(zs)
    layout.logical_pairs = tuple(labels)
    return CssCode(code.hx, code.hz, code.n, code.k, code.d_estimate,
                   logical_x=tuple(xs), logical_z=tuple(zs))


def _verify_logical_basis(code: CssCode, xs, zs, pivs) -> None:
    for r in range(code.hz.rows):
        zrow = set(code.hz.row_support(r))
        for x in xs:
            if len(zrow.intersection(x)) % 2:
                raise ValueError("X logical anticommutes with a Z check")
    for r in range(code.hx.rows):
        xrow = set(code.hx.row_support(r))
        for z in zs:
            if len(xrow.intersection(z)) % 2:
                raise ValueError("Z logical anticommutes with an X check")
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            inter = set(x).intersection(z)
            if i == j:
                if len(inter) != 1 or inter.pop() != pivs[i]:
                    raise ValueError("logical pair does not cross at its pivot")
            elif inter:
                raise ValueError("distinct logical pairs share support")


def iceberg(n1: int) -> CssCode:
    """[[n1, n1-2, 2]] code with two weight-n1 generators.

    X logicals pair qubit 0 with qubit i+1; Z logicals pair qubit i+1 with
    the last qubit.
    """
    if n1 < 4 or n1 % 2:
        raise ValueError("block length must be even and at least 4")
    full = tuple(range(n1))
    lx = tuple((0, i + 1) for i in range(n1 - 2))
    lz = tuple((i + 1, n1 - 1) for i in range(n1 - 2))
    return CssCode(
        BinMatrix.from_rows([full], n1),
        BinMatrix.from_rows([full], n1),
        n1,
        n1 - 2,
        d_estimate=2,
        logical_x=lx,
        logical_z=lz,
    )


def assign_iceberg_blocks(layout: GridLayout) -> Assignment:
    """Pair outer qubits into blocks: twins together, diagonals consecutively.

    A sector with an odd diagonal donates its last diagonal qubit to a
    cross-sector pair with the first diagonal qubit of the other sector.
    """
    if layout.n_phys % 2:
        raise ValueError("total qubit count must be even")
    pairs = []
    l_diag = [layout.index(t, t, "L") for t in range(layout.n)]
    r_diag = [layout.index(t, t, "R") for t in range(layout.m)]
    if layout.n % 2:
        if layout.m % 2 == 0:
            raise ValueError("sector diagonals have mismatched parity")
        pairs.append((l_diag[-1], r_diag[0]))
        l_diag = l_diag[:-1]
        r_diag = r_diag[1:]
    for diag in (l_diag, r_diag):
        for t in range(0, len(diag), 2):
            pairs.append((diag[t], diag[t + 1]))
    for dim, sector in ((layout.n, "L"), (layout.m, "R")):
        for r in range(dim):
            for c in range(r + 1, dim):
                pairs.append((layout.index(r, c, sector), layout.index(c, r, sector)))

    pairs = [tuple(sorted(p)) for p in pairs]
    pairs.sort(key=min)
    block_of = np.full(layout.n_phys, -1, dtype=np.int64)
    slot_of = np.full(layout.n_phys, -1, dtype=np.int64)
    for b, (q0, q1) in enumerate(pairs):
        if block_of[q0] != -1 or block_of[q1] != -1:
            raise ValueError("qubit assigned to two blocks")
        block_of[q0], block_of[q1] = b, b
        slot_of[q0], slot_of[q1] = 0, 1
    if (block_of < 0).any():
        raise ValueError("assignment does not cover all qubits")
    return Assignment(block_of, slot_of, tuple(pairs))


def concatenate(outer: CssCode, layout: GridLayout, assignment: Assignment) -> ConcatenatedCode:
    """Encode each outer-qubit pair into a [[4,2,2]] block.

    Generators are the per-block all-ones rows plus every outer generator
    with each qubit replaced by its block-logical support. Physical qubit
    4b + t is qubit t of block b.
    """
    n2 = outer.n
    n_blocks = assignment.n_blocks
    if 2 * n_blocks != n2:
        raise ValueError("assignment is inconsistent with the outer code")
    n_phys = 4 * n_blocks

    def lift(outer_support, inner):
        acc = {}
        for q in outer_support:
            b, s = int(assignment.block_of[q]), int(assignment.slot_of[q])
            for t in inner[s]:
                phys = 4 * b + t
                acc[phys] = acc.get(phys, 0) ^ 1
        return tuple(sorted(p for p, v in acc.items() if v))

    ib_rows = [tuple(range(4 * b, 4 * b + 4)) for b in range(n_blocks)]
    hx_rows = list(ib_rows)
    hz_rows = list(ib_rows)
    types, weights, blocks_touched, supports = [], [], [], []
    for r in range(outer.hx.rows):
        sup = lift(outer.hx.row_support(r), INNER_X)
        hx_rows.append(sup)
        types.append("X")
        weights.append(len(sup))
        blocks_touched.append(tuple(sorted({p // 4 for p in sup})))
        supports.append(sup)
    for r in range(outer.hz.rows):
        sup = lift(outer.hz.row_support(r), INNER_Z)
        hz_rows.append(sup)
        types.append("Z")
        weights.append(len(sup))
        blocks_touched.append(tuple(sorted({p // 4 for p in sup})))
        supports.append(sup)

    hx = BinMatrix.from_rows(hx_rows, n_phys)
    hz = BinMatrix.from_rows(hz_rows, n_phys)
    k = n_phys - rank(hx) - rank(hz)
    if k != outer.k:
        raise ValueError("concatenated code does not preserve the outer k")

    phi_all, phi_x, phi_z = [], [], []
    for b in range(n_blocks):
        hits = [g for g, t in enumerate(blocks_touched) if b in t]
        phi_all.append(tuple(hits))
        phi_x.append(tuple(g for g in hits if types[g] == "X"))
        phi_z.append(tuple(g for g in hits if types[g] == "Z"))

    lx = tuple(lift(s, INNER_X) for s in outer.logical_x)
    lz = tuple(lift(s, INNER_Z) for s in outer.logical_z)
    d_est = None if outer.d_estimate is None else 2 * outer.d_estimate
    return ConcatenatedCode(
        outer=outer, layout=layout, assignment=assignment,
        hx=hx, hz=hz, n=n_phys, k=k, n_blocks=n_blocks,
        hgp_types=tuple(types), hgp_weights=tuple(weights),
        hgp_blocks=tuple(blocks_touched), hgp_supports=tuple(supports),
        phi_all=tuple(phi_all), phi_x=tuple(phi_x), phi_z=tuple(phi_z),
        logical_x=lx, logical_z=lz, d_estimate=d_est,
    )


def overlap_map(code: ConcatenatedCode) -> tuple:
    """phi over block generators: outer-derived generators sharing support.

    Indexed by block generator (X rows for blocks 0..B-1, then Z rows);
    both rows of a block share all four qubits, so they share one phi set.
    """
    return tuple(code.phi_all[i % code.n_blocks] for i in range(2 * code.n_blocks))


@dataclass(frozen=True)
class DistanceEstimate:
    dx: int
    dz: int
    trials: int

    @property
    def d(self) -> int:
        return min(self.dx, self.dz)


def estimate_distance(code, trials: int, seed: int) -> DistanceEstimate:
    """Randomized upper bound on the X and Z logical distances.

    Each trial permutes columns, row-reduces a basis of the relevant kernel,
    and keeps the lightest reduced row that is not a stabilizer product.
    The bound is monotone non-increasing in the number of trials.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    dz = _distance_one_side(code.hx, code.hz, trials, rng)
    dx = _distance_one_side(code.hz, code.hx, trials, rng)
    return DistanceEstimate(dx=dx, dz=dz, trials=trials)


def _distance_one_side(h_commute: BinMatrix, h_stab: BinMatrix, trials: int, rng) -> int:
    n = h_commute.cols
    kernel = nullspace_basis(h_commute)
    if not kernel:
        return 0
    dense = np.array(kernel, dtype=np.uint8)
    stab_red, stab_piv = rref_packed(h_stab.to_packed(), n)
    pad = (-n) % 64
    best = n + 1
    for _ in range(trials):
        perm = rng.permutation(n)
        permuted = dense[:, perm]
        packed = np.ascontiguousarray(
            np.packbits(
                np.pad(permuted, ((0, 0), (0, pad)), constant_values=0),
                axis=1, bitorder="little",
            )
        ).view(np.uint64)
        red, _ = rref_packed(packed, n)
        wts = np.bitwise_count(red).sum(axis=1)
        for i in np.flatnonzero(wts < best):
            bits = np.unpackbits(red[int(i)].view(np.uint8), bitorder="little")[:n]
            orig = np.zeros(n, dtype=np.uint8)
            orig[perm] = bits
            packed_orig = np.packbits(
                np.pad(orig, (0, pad), constant_values=0), bitorder="little"
            ).view(np.uint64)
            if not in_rowspan(stab_red, stab_piv, packed_orig):
                best = int(wts[i])
    return best


# Descriptor files: a small JSON document that pins family, size parameters,
# and seed, and so fully determines a rebuild.

@dataclass
class CodeBundle:
    code_id: str
    classical: ClassicalCode
    css: CssCode
    layout: GridLayout
    assignment: Assignment | None = None
    concat: ConcatenatedCode | None = None
    descriptor: dict | None = None

    @property
    def sim_code(self):
        return self.concat if self.concat is not None else self.css


def build_code(desc: dict) -> CodeBundle:
    family = desc.get("family")
    concat_flag = bool(desc.get("concat", False))
    if family == "expander":
        n = int(desc["n"])
        dv = int(desc.get("dv", 3))
        dc = int(desc.get("dc", 4))
        seed = desc.get("seed")
        seed = REFERENCE_EXPANDER_SEEDS.get(n, 0) if seed is None else int(seed)
        classical = make_regular_ldpc(n, dv, dc, seed)
        code_id = f"expander-n{n}-dv{dv}-dc{dc}-s{seed}"
    elif family == "lacross":
        n, z = int(desc["n"]), int(desc["z"])
        classical = make_lacross(n, z)
        code_id = f"lacross-n{n}-z{z}"
    elif family == "repetition":
        n = int(desc["n"])
        classical = make_repetition(n)
        code_id = f"repetition-n{n}"
    else:
        raise ValueError(f"unknown code family: {family!r}")
    css, layout = hgp(classical)
    bundle = CodeBundle(code_id=code_id, classical=classical, css=css,
                        layout=layout, descriptor=dict(desc))
    if concat_flag:
        bundle.assignment = assign_iceberg_blocks(layout)
        bundle.concat = concatenate(css, layout, bundle.assignment)
        bundle.code_id = "ib-" + code_id
    return bundle


def write_descriptor(desc: dict, path) -> None:
    Path(path).write_text(json.dumps(desc, indent=2, sort_keys=True) + "\n")


def read_descriptor(path) -> dict:
    return json.loads(Path(path).read_text())


def export_code_json(bundle: CodeBundle, path) -> None:
    """Canonical JSON export of the check matrices and logical supports."""
    code = bundle.sim_code
    doc = {
        "code_id": bundle.code_id,
        "n": code.n,
        "k": code.k,
        "hx": [list(code.hx.row_support(r)) for r in range(code.hx.rows)],
        "hz": [list(code.hz.row_support(r)) for r in range(code.hz.rows)],
        "logical_x": [list(s) for s in code.logical_x],
        "logical_z": [list(s) for s in code.logical_z],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
