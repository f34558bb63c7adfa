"""Monte Carlo memory experiments: adaptive and non-adaptive concatenated
rounds, plain rounds, surface-code baselines, statistics, and resource
accounting.

A shot is one experiment: noiseless preparation of the joint logical-zero
state, r rounds of noisy extraction each followed by a same-round
correction, then a noiseless destructive readout, a final decode, and a
pass/fail verdict over all logical operators. Shots use independent
counter-based streams, so any worker split reproduces identical results.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .codes import CodeBundle, build_code
from .decode import (ConcatDecoders, DecoderContext, augment_syndrome_noise,
                     concat_decode)
from .schedule import (
    build_concat_hgp_stage,
    build_hgp_circuit,
    build_iceberg_stage,
    make_barrier,
    select_generators,
    unmask_interval,
)
from .sim import CompiledCircuit, NoiseModel, make_shot_rng

MODES = ("adaptive", "nonadaptive-concat", "plain-hgp", "surface-baseline")

CSV_COLUMNS = ("code_id", "mode", "p", "r", "shots", "failures", "p_L",
               "sigma_pL", "eps_L", "sigma_epsL", "cnot_data_avg",
               "cnot_flag_avg", "w_adapt", "q_adapt", "seed", "wall_ms")


@dataclass(frozen=True)
class ExperimentConfig:
    descriptor: dict
    mode: str
    p: float
    rounds: int
    shots: int
    seed: int
    basis: str = "Z"
    unmask_base: int = 10
    unmask_override: int | None = None  # None: auto; 0: never; k: every k rounds
    decoder_iters: int = 30
    osd_order: int = 4
    matched_selection: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.rounds < 1 or self.shots < 1:
            raise ValueError("rounds and shots must be positive")


@dataclass
class ExperimentStats:
    code_id: str
    mode: str
    p: float
    rounds: int
    shots: int
    failures: int
    seed: int
    cnot_data_avg: float
    cnot_flag_avg: float
    w_adapt: float
    q_adapt: float
    wall_ms: float
    p_l_override: float | None = None

    @property
    def p_l(self) -> float:
        if self.p_l_override is not None:
            return self.p_l_override
        return self.failures / self.shots

    @property
    def sigma_pl(self) -> float:
        return float(np.sqrt(self.p_l * (1 - self.p_l) / self.shots))

    @property
    def eps_l(self) -> float:
        return eps_per_round(self.p_l, self.rounds)

    @property
    def sigma_epsl(self) -> float:
        return error_bars(self.p_l, self.shots, self.rounds)[1]

    def csv_row(self) -> str:
        vals = (self.code_id, self.mode, repr(self.p), self.rounds, self.shots,
                self.failures, repr(self.p_l), repr(self.sigma_pl),
                repr(self.eps_l), repr(self.sigma_epsl),
                repr(self.cnot_data_avg), repr(self.cnot_flag_avg),
                repr(self.w_adapt), repr(self.q_adapt), self.seed,
                repr(self.wall_ms))
        return ",".join(str(v) for v in vals)


def eps_per_round(p_l: float, r: int) -> float:
    """Per-round logical error rate implied by the shot failure rate."""
    if not 0.0 <= p_l <= 1.0 or r < 1:
        raise ValueError("need p_l in [0,1] and r >= 1")
    return 1.0 - (1.0 - p_l) ** (1.0 / r)


def error_bars(p_l: float, shots: int, r: int):
    """Binomial deviation on p_l and its pushforward onto the per-round rate."""
    if shots < 1:
        raise ValueError("shots must be positive")
    sigma_pl = float(np.sqrt(p_l * (1 - p_l) / shots))
    sigma_eps = (1.0 / r) * (1.0 - p_l) ** (1.0 / r - 1.0) * sigma_pl
    return sigma_pl, float(sigma_eps)


class _WorkerContext:
    """Everything a shot loop needs, built once per process per code."""

    def __init__(self, descriptor: dict, mode: str, basis: str):
        self.bundle = build_code(descriptor)
        self.mode = mode
        self.basis = basis
        if mode in ("adaptive", "nonadaptive-concat"):
            code = self.bundle.concat
            if code is None:
                raise ValueError("concatenated mode requires concat: true")
            self.code = code
            stage_a = build_iceberg_stage(code)
            stage_c = build_concat_hgp_stage(code)
            self.stage_a = CompiledCircuit(stage_a, n_data=code.n,
                                           anc_gen=stage_a.anc_gen)
            self.stage_c = CompiledCircuit(stage_c, n_data=code.n,
                                           anc_gen=stage_c.anc_gen)
            self.barrier = CompiledCircuit(make_barrier(code.n), n_data=code.n)
            B = code.n_blocks
            tags = stage_a.meas_tags
            self.idx_sx = np.array([i for i, t in enumerate(tags)
                                    if t.kind == "iceberg-syndrome" and t.pauli == "X"])
            self.idx_sz = np.array([i for i, t in enumerate(tags)
                                    if t.kind == "iceberg-syndrome" and t.pauli == "Z"])
            self.n_gens = len(code.hgp_types)
            self.mx = code.n_hgp_x
            self.gen_weights = np.array(code.hgp_weights, dtype=np.int64)
            self.decoders = ConcatDecoders(code)
            self.hz_packed = code.hz.to_packed()
            self.hx_packed = code.hx.to_packed()
            self.logical_x = code.logical_x
            self.logical_z = code.logical_z
            self.n = code.n
            self.ib_data_cnots = 8 * B
            self.ib_flag_cnots = 2 * B
            self.ib_gens = 2 * B
            self.ib_weight_sum = 4 * 2 * B
        else:
            css = self.bundle.css
            self.code = css
            circ = build_hgp_circuit(css)
            self.stage = CompiledCircuit(circ, n_data=css.n, anc_gen=circ.anc_gen)
            self.mx = css.hx.rows
            self.mz = css.hz.rows
            self.hx_aug = DecoderContext(augment_syndrome_noise(css.hx), css.hx.rows)
            self.hz_aug = DecoderContext(augment_syndrome_noise(css.hz), css.hz.rows)
            self.hx_plain = DecoderContext(css.hx)
            self.hz_plain = DecoderContext(css.hz)
            self.hz_packed = css.hz.to_packed()
            self.hx_packed = css.hx.to_packed()
            self.logical_x = css.logical_x
            self.logical_z = css.logical_z
            self.n = css.n
            self.edge_count = int(css.hx.row_weights().sum() + css.hz.row_weights().sum())
            self.n_all_gens = self.mx + self.mz
            self.static_weight_sum = self.edge_count


_CTX_CACHE: dict = {}


def _get_context(descriptor: dict, mode: str, basis: str) -> _WorkerContext:
    key = (json.dumps(descriptor, sort_keys=True), mode, basis)
    if key not in _CTX_CACHE:
        _CTX_CACHE[key] = _WorkerContext(descriptor, mode, basis)
    return _CTX_CACHE[key]


def _packed_parity(packed_rows: np.ndarray, bits: np.ndarray) -> np.ndarray:
    words = np.zeros(packed_rows.shape[1] * 64, dtype=np.uint8)
    words[: bits.shape[0]] = bits
    packed_vec = np.packbits(words, bitorder="little").view(np.uint64)
    return (np.bitwise_count(packed_rows & packed_vec).sum(axis=1) & 1).astype(np.uint8)


def _run_shots_concat(ctx: _WorkerContext, cfg: ExperimentConfig, lo: int, hi: int):
    code = ctx.code
    model = NoiseModel(cfg.p)
    B = code.n_blocks
    n = ctx.n
    adaptive = cfg.mode == "adaptive"
    if cfg.unmask_override is None:
        interval = unmask_interval(cfg.p, cfg.unmask_base)
    else:
        interval = cfg.unmask_override  # 0 disables unmasking
    full_active = np.ones(ctx.n_gens, dtype=bool)
    z_basis = cfg.basis == "Z"

    failures = 0
    tot_weight = 0
    tot_gens = 0
    tot_data_cnots = 0
    tot_flag_cnots = 0
    nq_a = ctx.stage_a.n_qubits
    nq_c = ctx.stage_c.n_qubits

    for shot in range(lo, hi):
        rng = make_shot_rng(cfg.seed, shot)
        fx = np.zeros(n, dtype=np.uint8)
        fz = np.zeros(n, dtype=np.uint8)
        for rnd in range(1, cfg.rounds + 1):
            pad_fx = np.zeros(nq_a, dtype=np.uint8)
            pad_fz = np.zeros(nq_a, dtype=np.uint8)
            pad_fx[:n] = fx
            pad_fz[:n] = fz
            bits_a, out_fx, out_fz = ctx.stage_a.sample(pad_fx, pad_fz, model, rng)
            fx, fz = out_fx[:n], out_fz[:n]
            sigma_x = bits_a[ctx.idx_sx]
            sigma_z = bits_a[ctx.idx_sz]

            unmask = interval > 0 and rnd % interval == 0
            if not adaptive or unmask:
                active = full_active
                selected_count = ctx.n_gens
                selected_weight = int(ctx.gen_weights.sum())
            else:
                sigma_ib = np.concatenate([sigma_x, sigma_z])
                no_flags = np.zeros(2 * B, dtype=np.uint8)
                sel = select_generators(code, sigma_ib, no_flags,
                                        matched=cfg.matched_selection)
                if sel:
                    active = np.zeros(ctx.n_gens, dtype=bool)
                    active[list(sel)] = True
                else:
                    active = None
                selected_count = len(sel)
                selected_weight = int(ctx.gen_weights[list(sel)].sum()) if sel else 0

            fx, fz = _sample_into(ctx.barrier, fx, fz, model, rng, n)

            if active is not None:
                pad_fx = np.zeros(nq_c, dtype=np.uint8)
                pad_fz = np.zeros(nq_c, dtype=np.uint8)
                pad_fx[:n] = fx
                pad_fz[:n] = fz
                if selected_count < ctx.n_gens:
                    cutoff = int(ctx.stage_c.gen_last_slot[active[
                        : ctx.stage_c.gen_last_slot.shape[0]]].max())
                else:
                    cutoff = None
                bits_c, out_fx, out_fz = ctx.stage_c.sample(pad_fx, pad_fz, model,
                                                            rng, active=active,
                                                            idle_cutoff=cutoff)
                fx, fz = out_fx[:n], out_fz[:n]
                outer_x = bits_c[: ctx.mx]
                outer_z = bits_c[ctx.mx:]
            else:
                outer_x = np.zeros(ctx.mx, dtype=np.uint8)
                outer_z = np.zeros(ctx.n_gens - ctx.mx, dtype=np.uint8)

            x_corr, z_corr = _concat_round_decode(ctx, cfg, sigma_x, sigma_z,
                                                  outer_x, outer_z)
            fx ^= x_corr
            fz ^= z_corr

            tot_gens += ctx.ib_gens + selected_count
            tot_weight += ctx.ib_weight_sum + selected_weight
            tot_data_cnots += ctx.ib_data_cnots + selected_weight
            tot_flag_cnots += ctx.ib_flag_cnots

        if z_basis:
            final_bits = _packed_parity(ctx.hz_packed, fx)
            record = {"sigma_x": np.zeros(B, dtype=np.uint8),
                      "sigma_z": final_bits[:B],
                      "outer_z": final_bits[B:]}
            x_corr, _ = concat_decode(record, code, cfg.p, "final", ctx.decoders,
                                      cfg.decoder_iters, cfg.osd_order)
            residual = fx ^ x_corr
            logicals = ctx.logical_z
        else:
            final_bits = _packed_parity(ctx.hx_packed, fz)
            record = {"sigma_x": final_bits[:B],
                      "sigma_z": np.zeros(B, dtype=np.uint8),
                      "outer_x": final_bits[B:]}
            _, z_corr = concat_decode(record, code, cfg.p, "final", ctx.decoders,
                                      cfg.decoder_iters, cfg.osd_order)
            residual = fz ^ z_corr
            logicals = ctx.logical_x
        if any(int(residual[list(sup)].sum()) % 2 for sup in logicals):
            failures += 1

    return failures, tot_weight, tot_gens, tot_data_cnots, tot_flag_cnots


def _sample_into(compiled, fx, fz, model, rng, n):
    nq = compiled.n_qubits
    if nq == n:
        _, out_fx, out_fz = compiled.sample(fx, fz, model, rng)
        return out_fx, out_fz
    pad_fx = np.zeros(nq, dtype=np.uint8)
    pad_fz = np.zeros(nq, dtype=np.uint8)
    pad_fx[:n] = fx
    pad_fz[:n] = fz
    _, out_fx, out_fz = compiled.sample(pad_fx, pad_fz, model, rng)
    return out_fx[:n], out_fz[:n]


def _concat_round_decode(ctx, cfg, sigma_x, sigma_z, outer_x, outer_z):
    record = {"sigma_x": sigma_x, "sigma_z": sigma_z,
              "outer_x": outer_x, "outer_z": outer_z}
    return concat_decode(record, ctx.code, cfg.p, "intermediate", ctx.decoders,
                         cfg.decoder_iters, cfg.osd_order)


def _run_shots_plain(ctx: _WorkerContext, cfg: ExperimentConfig, lo: int, hi: int):
    css = ctx.code
    model = NoiseModel(cfg.p)
    n = ctx.n
    z_basis = cfg.basis == "Z"
    failures = 0
    tot_weight = 0
    tot_gens = 0
    tot_data_cnots = 0
    nq = ctx.stage.n_qubits

    for shot in range(lo, hi):
        rng = make_shot_rng(cfg.seed, shot)
        fx = np.zeros(n, dtype=np.uint8)
        fz = np.zeros(n, dtype=np.uint8)
        for rnd in range(cfg.rounds):
            pad_fx = np.zeros(nq, dtype=np.uint8)
            pad_fz = np.zeros(nq, dtype=np.uint8)
            pad_fx[:n] = fx
            pad_fz[:n] = fz
            bits, out_fx, out_fz = ctx.stage.sample(pad_fx, pad_fz, model, rng)
            fx, fz = out_fx[:n], out_fz[:n]
            sx = bits[: ctx.mx]
            sz = bits[ctx.mx:]
            if sz.any():
                priors = np.concatenate([np.full(n, cfg.p),
                                         np.full(ctx.mz, cfg.p)])
                res = ctx.hz_aug.bp(sz, priors, cfg.decoder_iters)
                fx ^= res.correction[:n]
            if sx.any():
                priors = np.concatenate([np.full(n, cfg.p),
                                         np.full(ctx.mx, cfg.p)])
                res = ctx.hx_aug.bp(sx, priors, cfg.decoder_iters)
                fz ^= res.correction[:n]
            tot_gens += ctx.n_all_gens
            tot_weight += ctx.static_weight_sum
            tot_data_cnots += ctx.edge_count

        if z_basis:
            synd = _packed_parity(ctx.hz_packed, fx)
            res = ctx.hz_plain.bp_osd(synd, np.full(n, max(cfg.p, 1e-12)),
                                      cfg.decoder_iters, cfg.osd_order)
            residual = fx ^ res.correction
            logicals = ctx.logical_z
        else:
            synd = _packed_parity(ctx.hx_packed, fz)
            res = ctx.hx_plain.bp_osd(synd, np.full(n, max(cfg.p, 1e-12)),
                                      cfg.decoder_iters, cfg.osd_order)
            residual = fz ^ res.correction
            logicals = ctx.logical_x
        if any(int(residual[list(sup)].sum()) % 2 for sup in logicals):
            failures += 1

    return failures, tot_weight, tot_gens, tot_data_cnots, 0


def _worker(args):
    cfg_dict, lo, hi = args
    cfg = ExperimentConfig(**cfg_dict)
    ctx = _get_context(cfg.descriptor, cfg.mode, cfg.basis)
    if cfg.mode in ("adaptive", "nonadaptive-concat"):
        return _run_shots_concat(ctx, cfg, lo, hi)
    return _run_shots_plain(ctx, cfg, lo, hi)


def run_memory_experiment(cfg: ExperimentConfig) -> ExperimentStats:
    """Run every shot of one configuration and aggregate exact counters."""
    t0 = time.monotonic()
    ctx = _get_context(cfg.descriptor, cfg.mode, cfg.basis)
    cfg_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}

    n_workers = max(1, cfg.threads)
    if n_workers == 1 or cfg.shots < 4 * n_workers:
        parts = [_worker((cfg_dict, 0, cfg.shots))]
    else:
        import multiprocessing as mp

        bounds = np.linspace(0, cfg.shots, n_workers * 4 + 1).astype(int)
        jobs = [(cfg_dict, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with mp.get_context("fork").Pool(n_workers) as pool:
            parts = pool.map(_worker, jobs)

    failures = sum(p[0] for p in parts)
    tot_weight = sum(p[1] for p in parts)
    tot_gens = sum(p[2] for p in parts)
    tot_data = sum(p[3] for p in parts)
    tot_flag = sum(p[4] for p in parts)
    rounds_total = cfg.shots * cfg.rounds
    stats = ExperimentStats(
        code_id=ctx.bundle.code_id,
        mode=cfg.mode,
        p=cfg.p,
        rounds=cfg.rounds,
        shots=cfg.shots,
        failures=failures,
        seed=cfg.seed,
        cnot_data_avg=tot_data / rounds_total,
        cnot_flag_avg=tot_flag / rounds_total,
        w_adapt=tot_weight / tot_gens if tot_gens else 0.0,
        q_adapt=tot_weight / (ctx.n * rounds_total),
        wall_ms=(time.monotonic() - t0) * 1e3,
    )
    return stats


def surface_baseline(k: int, d: int, p: float, rounds: int, shots: int,
                     seed: int, threads: int = 1) -> ExperimentStats:
    """k independent distance-d patches: simulate one patch, combine the
    failure probability as 1 - (1 - p_L1)^k."""
    cfg = ExperimentConfig(
        descriptor={"family": "repetition", "n": d},
        mode="plain-hgp", p=p, rounds=rounds, shots=shots, seed=seed,
        threads=threads,
    )
    one = run_memory_experiment(cfg)
    p_lk = 1.0 - (1.0 - one.p_l) ** k
    return replace(one, mode="surface-baseline", code_id=f"surface-d{d}-k{k}",
                   failures=int(round(p_lk * shots)), p_l_override=p_lk)


def resource_report(bundle: CodeBundle, mode: str = "plain-hgp",
                    p: float | None = None, rounds: int = 100,
                    shots: int = 100, seed: int = 0, threads: int = 1) -> dict:
    """Static check weight and qubit participation from the matrices, plus
    the dynamic averages measured over simulated rounds when p is given."""
    code = bundle.sim_code
    row_w = np.concatenate([code.hx.row_weights(), code.hz.row_weights()])
    report = {
        "code_id": bundle.code_id,
        "n": code.n,
        "k": code.k,
        "w_static": float(row_w.sum() / row_w.shape[0]),
        "q_static": float(row_w.sum() / code.n),
    }
    if p is not None:
        desc = dict(bundle_descriptor(bundle))
        cfg = ExperimentConfig(descriptor=desc, mode=mode, p=p, rounds=rounds,
                               shots=shots, seed=seed, threads=threads)
        stats = run_memory_experiment(cfg)
        report.update(
            w_adapt=stats.w_adapt, q_adapt=stats.q_adapt,
            cnot_data_avg=stats.cnot_data_avg, cnot_flag_avg=stats.cnot_flag_avg,
        )
    return report


def bundle_descriptor(bundle: CodeBundle) -> dict:
    """Descriptor that rebuilds a bundle."""
    if bundle.descriptor is None:
        raise ValueError("bundle carries no descriptor")
    return dict(bundle.descriptor)


def write_csv(path, stats_list, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        if not append:
            fh.write(",".join(CSV_COLUMNS) + "\n")
        for s in stats_list:
            fh.write(s.csv_row() + "\n")
