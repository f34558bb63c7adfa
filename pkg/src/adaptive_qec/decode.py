"""Belief propagation with an ordered-statistics fallback, syndrome-noise
augmentation, and the two-stage decoder for block-concatenated codes.

The message-passing kernel is product-sum BP with a serial column schedule
(each column's check messages are refreshed in index order using the
freshest available messages), hard decisions every iteration, and early
exit on syndrome match. LLRs are clipped at +-25 and all tie-breaks are
by lower column index, so decoding is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numba import njit

from .codes import INNER_X, INNER_Z, ConcatenatedCode
from .gf2 import BinMatrix

LLR_CLIP = 25.0
_TANH_CAP = 1.0 - 1e-14


@dataclass
class DecoderInput:
    pcm: BinMatrix
    syndrome: np.ndarray
    priors: np.ndarray           # per-column error probability, in (0, 1)
    max_iterations: int = 30
    schedule: str = "serial"
    osd_order: int = 4
    ignore_columns: int = 0      # trailing augmented columns, never applied

    def __post_init__(self):
        self.syndrome = np.asarray(self.syndrome, dtype=np.uint8)
        self.priors = np.asarray(self.priors, dtype=np.float64)
        if self.syndrome.shape != (self.pcm.rows,):
            raise ValueError("syndrome length must equal the check count")
        if self.priors.shape != (self.pcm.cols,):
            raise ValueError("one prior per column required")
        if ((self.priors <= 0) | (self.priors >= 1)).any():
            raise ValueError("priors must lie strictly inside (0, 1)")
        if self.schedule != "serial":
            raise ValueError("only the serial schedule is implemented")


@dataclass
class DecodeResult:
    correction: np.ndarray
    converged: bool
    iterations_used: int
    posterior: np.ndarray = None


def augment_syndrome_noise(h: BinMatrix) -> BinMatrix:
    """Append one identity column per check, modeling a flipped bit of
    syndrome; corrections on those columns are reported but never applied."""
    return BinMatrix.hstack([h, BinMatrix.identity(h.rows)])


@njit(cache=True)
def _bp_serial_kernel(prior_llr, syndrome, var_ptr, var_chk, var_eid,
                      chk_ptr, chk_var, chk_eid, max_iter, clip):
    nv = prior_llr.shape[0]
    nc = chk_ptr.shape[0] - 1
    n_edges = var_chk.shape[0]
    R = np.zeros(n_edges)
    varsum = np.zeros(nv)
    hard = np.zeros(nv, dtype=np.uint8)
    for it in range(max_iter):
        for j in range(nv):
            for e in range(var_ptr[j], var_ptr[j + 1]):
                c = var_chk[e]
                eid = var_eid[e]
                prod = 1.0
                for f in range(chk_ptr[c], chk_ptr[c + 1]):
                    j2 = chk_var[f]
                    if j2 == j:
                        continue
                    q = prior_llr[j2] + varsum[j2] - R[chk_eid[f]]
                    if q > clip:
                        q = clip
                    elif q < -clip:
                        q = -clip
                    prod *= np.tanh(0.5 * q)
                if prod > _TANH_CAP:
                    prod = _TANH_CAP
                elif prod < -_TANH_CAP:
                    prod = -_TANH_CAP
                sgn = 1.0 if syndrome[c] == 0 else -1.0
                rnew = 2.0 * np.arctanh(prod) * sgn
                if rnew > clip:
                    rnew = clip
                elif rnew < -clip:
                    rnew = -clip
                varsum[j] += rnew - R[eid]
                R[eid] = rnew
        ok = True
        for j in range(nv):
            hard[j] = 1 if prior_llr[j] + varsum[j] < 0.0 else 0
        for c in range(nc):
            par = 0
            for f in range(chk_ptr[c], chk_ptr[c + 1]):
                par ^= hard[chk_var[f]]
            if par != syndrome[c]:
                ok = False
                break
        if ok:
            return hard, True, it + 1, prior_llr + varsum
    for j in range(nv):
        hard[j] = 1 if prior_llr[j] + varsum[j] < 0.0 else 0
    return hard, False, max_iter, prior_llr + varsum


class DecoderContext:
    """Per-matrix arrays shared across decode calls: Tanner adjacency in
    CSR form for the kernel and a dense copy for the OSD fallback."""

    def __init__(self, pcm: BinMatrix, ignore_columns: int = 0):
        self.pcm = pcm
        self.ignore_columns = ignore_columns
        nv, nc = pcm.cols, pcm.rows
        var_lists = [[] for _ in range(nv)]
        chk_lists = []
        eid = 0
        for c in range(nc):
            row = []
            for j in pcm.row_support(c):
                var_lists[j].append((c, eid))
                row.append((j, eid))
                eid += 1
            chk_lists.append(row)
        self.var_ptr = np.zeros(nv + 1, dtype=np.int64)
        self.var_chk = np.zeros(eid, dtype=np.int64)
        self.var_eid = np.zeros(eid, dtype=np.int64)
        k = 0
        for j in range(nv):
            self.var_ptr[j] = k
            for c, e in var_lists[j]:
                self.var_chk[k] = c
                self.var_eid[k] = e
                k += 1
        self.var_ptr[nv] = k
        self.chk_ptr = np.zeros(nc + 1, dtype=np.int64)
        self.chk_var = np.zeros(eid, dtype=np.int64)
        self.chk_eid = np.zeros(eid, dtype=np.int64)
        k = 0
        for c in range(nc):
            self.chk_ptr[c] = k
            for j, e in chk_lists[c]:
                self.chk_var[k] = j
                self.chk_eid[k] = e
                k += 1
        self.chk_ptr[nc] = k
        self.dense = pcm.to_dense()

    def bp(self, syndrome, priors, max_iter=30) -> DecodeResult:
        syndrome = np.asarray(syndrome, dtype=np.uint8)
        if not syndrome.any():
            return DecodeResult(np.zeros(self.pcm.cols, dtype=np.uint8), True, 0,
                                np.log((1 - priors) / priors))
        prior_llr = np.log((1.0 - priors) / priors)
        np.clip(prior_llr, -LLR_CLIP, LLR_CLIP, out=prior_llr)
        hard, conv, iters, post = _bp_serial_kernel(
            prior_llr, syndrome, self.var_ptr, self.var_chk, self.var_eid,
            self.chk_ptr, self.chk_var, self.chk_eid, max_iter, LLR_CLIP)
        return DecodeResult(hard.copy(), bool(conv), int(iters), post)

    def bp_osd(self, syndrome, priors, max_iter=30, osd_order=4) -> DecodeResult:
        res = self.bp(syndrome, priors, max_iter)
        if res.converged:
            return res
        correction = self._osd(np.asarray(syndrome, dtype=np.uint8),
                               res.posterior, osd_order)
        return DecodeResult(correction, True, res.iterations_used, res.posterior)

    def _osd(self, syndrome, posterior, order):
        """Rank-revealing elimination over columns sorted most-suspect
        first, then a combination sweep over the leading non-pivot columns.
        Candidates are ranked by Hamming weight, then posterior cost."""
        H = self.dense
        nc, nv = H.shape
        col_order = np.lexsort((np.arange(nv), posterior))
        Hp = H[:, col_order].astype(np.uint8)
        s = syndrome.copy()
        pivot_rows, pivot_cols = [], []
        r = 0
        for col in range(nv):
            rows = np.flatnonzero(Hp[r:, col]) + r
            if rows.size == 0:
                continue
            piv = rows[0]
            if piv != r:
                Hp[[r, piv]] = Hp[[piv, r]]
                s[[r, piv]] = s[[piv, r]]
            others = np.flatnonzero(Hp[:, col])
            others = others[others != r]
            if others.size:
                Hp[others] ^= Hp[r]
                s[others] ^= s[r]
            pivot_rows.append(r)
            pivot_cols.append(col)
            r += 1
            if r == nc:
                break
        if (s[r:] != 0).any():
            raise ValueError("syndrome outside the column space of the pcm")
        nonpivot = [c for c in range(nv) if c not in set(pivot_cols)]
        pivot_cols = np.array(pivot_cols, dtype=np.int64)

        soft_cost = np.abs(posterior)[col_order]

        def candidate(t_support):
            e = np.zeros(nv, dtype=np.uint8)
            rhs = s[: len(pivot_cols)].copy()
            for c in t_support:
                e[c] = 1
                rhs ^= Hp[: len(pivot_cols), c]
            e[pivot_cols] = rhs
            return e

        best = None
        sweeps = [()]
        sweeps += [(c,) for c in nonpivot]
        lead = nonpivot[:order]
        for w in range(2, order + 1):
            sweeps += list(combinations(lead, w))
        for t in sweeps:
            e = candidate(t)
            key = (int(e.sum()), float(soft_cost @ e))
            if best is None or key < best[0]:
                best = (key, e)
        e_sorted = best[1]
        out = np.zeros(nv, dtype=np.uint8)
        out[col_order] = e_sorted
        return out


def bp_decode(inp: DecoderInput) -> DecodeResult:
    ctx = DecoderContext(inp.pcm, inp.ignore_columns)
    return ctx.bp(inp.syndrome, inp.priors, inp.max_iterations)


def bp_osd_decode(inp: DecoderInput) -> DecodeResult:
    ctx = DecoderContext(inp.pcm, inp.ignore_columns)
    return ctx.bp_osd(inp.syndrome, inp.priors, inp.max_iterations, inp.osd_order)


# Two-stage decoding of the concatenated code.

# stage-1 corrections: Z on the block's last qubit when the X-type
# generator fires, X on the block's first qubit when the Z-type fires
STAGE1_Z_LOCAL = 3
STAGE1_X_LOCAL = 0


@dataclass
class StageOneResult:
    x_correction: np.ndarray     # physical X pattern applied
    z_correction: np.ndarray
    priors_x: np.ndarray         # outer-column priors for the X-error decode
    priors_z: np.ndarray


def iceberg_stage(sigma_x, sigma_z, code: ConcatenatedCode, p: float) -> StageOneResult:
    """Fixed per-block corrections plus soft priors for the outer decode.

    A fired X-type block generator reports a Z error; correcting with Z on
    the last qubit turns any single-qubit Z into a block-logical Z (or
    nothing), so the outer decoder sees logical errors at probability 1/2
    on that block's two columns. Undetected columns get p**2.
    """
    B = code.n_blocks
    n_outer = code.outer.n
    x_corr = np.zeros(code.n, dtype=np.uint8)
    z_corr = np.zeros(code.n, dtype=np.uint8)
    priors_x = np.full(n_outer, p * p)
    priors_z = np.full(n_outer, p * p)
    for b in np.flatnonzero(np.asarray(sigma_x)):
        z_corr[4 * b + STAGE1_Z_LOCAL] ^= 1
        q0, q1 = code.assignment.blocks[b]
        priors_z[q0] = 0.5
        priors_z[q1] = 0.5
    for b in np.flatnonzero(np.asarray(sigma_z)):
        x_corr[4 * b + STAGE1_X_LOCAL] ^= 1
        q0, q1 = code.assignment.blocks[b]
        priors_x[q0] = 0.5
        priors_x[q1] = 0.5
    return StageOneResult(x_corr, z_corr, priors_x, priors_z)


def lift_outer_correction(outer_bits, code: ConcatenatedCode, kind: str) -> np.ndarray:
    """Map an outer-qubit correction onto physical qubits through the
    block logical representatives."""
    inner = INNER_X if kind == "X" else INNER_Z
    phys = np.zeros(code.n, dtype=np.uint8)
    for q in np.flatnonzero(np.asarray(outer_bits)):
        b = int(code.assignment.block_of[q])
        s = int(code.assignment.slot_of[q])
        for t in inner[s]:
            phys[4 * b + t] ^= 1
    return phys


@dataclass
class ConcatDecoders:
    """Prebuilt contexts for the outer code: augmented matrices for noisy
    intermediate rounds, plain ones for the final noiseless syndrome."""

    code: ConcatenatedCode
    hx_aug: DecoderContext = field(init=False)
    hz_aug: DecoderContext = field(init=False)
    hx_plain: DecoderContext = field(init=False)
    hz_plain: DecoderContext = field(init=False)

    def __post_init__(self):
        outer = self.code.outer
        self.hx_aug = DecoderContext(augment_syndrome_noise(outer.hx), outer.hx.rows)
        self.hz_aug = DecoderContext(augment_syndrome_noise(outer.hz), outer.hz.rows)
        self.hx_plain = DecoderContext(outer.hx)
        self.hz_plain = DecoderContext(outer.hz)


def concat_decode(record: dict, code: ConcatenatedCode, p: float, stage: str,
                  decoders: ConcatDecoders | None = None,
                  max_iter: int = 30, osd_order: int = 4):
    """Full two-stage correction for one round record.

    record holds per-block bits "sigma_x"/"sigma_z" and outer-generator
    bits "outer_x"/"outer_z" (unmeasured generators present as 0).
    Intermediate rounds decode the augmented outer matrices with BP only;
    the final round decodes the plain matrices with BP+OSD. Returns the
    physical (x_correction, z_correction) including the stage-1 part.
    """
    if decoders is None:
        decoders = ConcatDecoders(code)
    outer = code.outer
    s1 = iceberg_stage(record["sigma_x"], record["sigma_z"], code, p)
    x_corr = s1.x_correction.copy()
    z_corr = s1.z_correction.copy()

    # X-type outer generators detect Z errors; Z-type detect X errors.
    jobs = []
    if "outer_z" in record:
        jobs.append(("X", record["outer_z"], s1.priors_x,
                     decoders.hz_aug if stage == "intermediate" else decoders.hz_plain,
                     outer.hz.rows))
    if "outer_x" in record:
        jobs.append(("Z", record["outer_x"], s1.priors_z,
                     decoders.hx_aug if stage == "intermediate" else decoders.hx_plain,
                     outer.hx.rows))
    for kind, bits, outer_priors, ctx, n_checks in jobs:
        syndrome = np.asarray(bits, dtype=np.uint8)
        if syndrome.shape != (n_checks,):
            raise ValueError("outer syndrome has the wrong length")
        if stage == "intermediate":
            priors = np.concatenate([outer_priors, np.full(n_checks, p)])
            res = ctx.bp(syndrome, priors, max_iter)
            outer_corr = res.correction[: outer.n]
        else:
            res = ctx.bp_osd(syndrome, outer_priors, max_iter, osd_order)
            outer_corr = res.correction
        lifted = lift_outer_correction(outer_corr, code, kind)
        if kind == "X":
            x_corr ^= lifted
        else:
            z_corr ^= lifted
    return x_corr, z_corr
