"""Acceptance suite: one test per criterion, tolerances pinned.

Heavy Monte Carlo runs are shared across criteria through a module cache.
Each test prints one line with the measured values so the run log doubles
as the acceptance report.
"""

import os
import time

import numpy as np
import pytest

from adaptive_qec.codes import build_code, estimate_distance
from adaptive_qec.decode import ConcatDecoders, DecoderContext, concat_decode, iceberg_stage
from adaptive_qec.experiments import ExperimentConfig, run_memory_experiment, resource_report
from adaptive_qec.gf2 import BinMatrix, in_rowspan, rref_packed
from adaptive_qec.iceberg_gates import (
    EMBEDDED_TABLE,
    SWAP_TRANSVERSAL_TABLE,
    verify_logical_gate,
    verify_zero_plus_prep,
)
from adaptive_qec.schedule import build_concat_generator_circuit, build_concat_hgp_stage
from adaptive_qec.sim import NoiseModel, PauliFrame, make_shot_rng, run_circuit, tableau_oracle

from test_sim import random_parity_circuit

THREADS = int(os.environ.get("ADAPTIVE_QEC_THREADS", "2"))

EXP8 = {"family": "expander", "n": 8}
EXP8C = {"family": "expander", "n": 8, "concat": True}
LAC12 = {"family": "lacross", "n": 12, "z": 4}
LAC16 = {"family": "lacross", "n": 16, "z": 4}
LAC12C = {"family": "lacross", "n": 12, "z": 4, "concat": True}

_BUNDLES = {}
_RUNS = {}


def bundle(key, desc):
    if key not in _BUNDLES:
        _BUNDLES[key] = build_code(desc)
    return _BUNDLES[key]


def run(key, **kwargs):
    if key not in _RUNS:
        kwargs.setdefault("threads", THREADS)
        cfg = ExperimentConfig(**kwargs)
        _RUNS[key] = run_memory_experiment(cfg)
    return _RUNS[key]


def report(name, ok, detail):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)


class TestCriterion1CodeParameters:
    def test_parameters_and_distances(self):
        t0 = time.monotonic()
        cases = [
            ("[[100,4]]", bundle("exp8", EXP8), (100, 4), 4, 1000),
            ("[[200,4]]", bundle("exp8c", EXP8C), (200, 4), 8, 1000),
            ("[[208,16]]", bundle("lac12", LAC12), (208, 16), 6, 1000),
            ("[[400,16]]", bundle("lac16", LAC16), (400, 16), 8, 1500),
            ("[[416,16]]", bundle("lac12c", LAC12C), (416, 16), 12, 2000),
        ]
        results = []
        ok = True
        for label, b, (n, k), d_expect, trials in cases:
            code = b.sim_code
            assert (code.n, code.k) == (n, k), f"{label} parameters"
            est = estimate_distance(code, trials=trials, seed=7)
            results.append(f"{label} d={est.d} (want {d_expect})")
            ok = ok and est.d == d_expect
        elapsed = time.monotonic() - t0
        report("criterion-1", ok and elapsed < 300, "; ".join(results) + f"; {elapsed:.0f}s")
        assert elapsed < 300
        for (label, _, _, d_expect, trials), got in zip(cases, results):
            assert f"d={d_expect}" in got, (
                f"{label}: {got}. The stated truncated-circulant construction "
                f"yields [12,4,5], so [[208,16]] has distance 5 and its "
                f"concatenation 10; see the decisions ledger."
            )


class TestCriterion2StaticWeights:
    def test_table_values(self):
        expected = [
            ("exp8", EXP8, 6.72, 7.00),
            ("exp8c", EXP8C, 8.72, 8.90),
            ("lac12", LAC12, 4.61, 5.00),
            ("lac16", LAC16, 5.04, 5.25),
            ("lac12c", LAC12C, 6.62, 6.88),
        ]
        lines = []
        for key, desc, q, w in expected:
            rep = resource_report(bundle(key, desc))
            assert rep["q_static"] == pytest.approx(q, abs=0.01), key
            assert rep["w_static"] == pytest.approx(w, abs=0.01), key
            lines.append(f"{key}: q={rep['q_static']:.3f} w={rep['w_static']:.3f}")
        report("criterion-2", True, "; ".join(lines))


class TestCriterion9GateTables:
    def test_symbolic_verification(self):
        t0 = time.monotonic()
        for name, action, circuit, basis in SWAP_TRANSVERSAL_TABLE + EMBEDDED_TABLE:
            res = verify_logical_gate(circuit, action, basis=basis)
            assert res.ok, name
        assert verify_zero_plus_prep()
        assert not verify_zero_plus_prep(apply_correction=False)
        elapsed = time.monotonic() - t0
        report("criterion-9", elapsed < 1.0, f"9 table rows + prep in {elapsed:.3f}s")
        assert elapsed < 1.0


def _stabilizer_checker(code):
    red_x, piv_x = rref_packed(code.hx.to_packed(), code.n)
    red_z, piv_z = rref_packed(code.hz.to_packed(), code.n)
    pad = (-code.n) % 64

    def is_stabilizer(x_part, z_part):
        px = np.packbits(np.pad(x_part, (0, pad)), bitorder="little").view(np.uint64)
        pz = np.packbits(np.pad(z_part, (0, pad)), bitorder="little").view(np.uint64)
        return in_rowspan(red_x, piv_x, px) and in_rowspan(red_z, piv_z, pz)

    return is_stabilizer


def _block_detectable(code, x_part, z_part):
    for b in range(code.n_blocks):
        if x_part[4 * b: 4 * b + 4].sum() % 2 or z_part[4 * b: 4 * b + 4].sum() % 2:
            return True
    return False


class TestCriterion7HookSafety:
    def test_exhaustive_fault_sweep(self):
        t0 = time.monotonic()
        code = bundle("exp8c", EXP8C).concat
        is_stab = _stabilizer_checker(code)
        model = NoiseModel(0.0)
        checked = 0
        for gen in range(len(code.hgp_types)):
            circ = build_concat_generator_circuit(code, gen, ordering="safe")
            cnot_layers = [li for li, layer in enumerate(circ.layers, start=1)
                           if layer and layer[0][0] == "CNOT"]
            for li in cnot_layers:
                qubits = circ.layers[li - 1][0][1]
                for pa in ("I", "X", "Y", "Z"):
                    for pb in ("I", "X", "Y", "Z"):
                        if pa == pb == "I":
                            continue
                        inj = [(li, qubits[0], pa)] if pa != "I" else []
                        inj += [(li, qubits[1], pb)] if pb != "I" else []
                        frame = PauliFrame(circ.n_qubits)
                        run_circuit(circ, frame, model, make_shot_rng(0, 0),
                                    injections=inj)
                        x_res = frame.x[: code.n]
                        z_res = frame.z[: code.n]
                        if not x_res.any() and not z_res.any():
                            continue
                        assert _block_detectable(code, x_res, z_res) or \
                            is_stab(x_res, z_res), (gen, li, pa, pb)
                        checked += 1
        # the blockwise ordering must exhibit an undetectable logical fault
        violation = False
        circ = build_concat_generator_circuit(code, 0, ordering="blockwise")
        cnot_layers = [li for li, layer in enumerate(circ.layers, start=1)
                       if layer and layer[0][0] == "CNOT"]
        for li in cnot_layers:
            qubits = circ.layers[li - 1][0][1]
            anc = qubits[0] if qubits[0] >= code.n else qubits[1]
            pauli = "X" if code.hgp_types[0] == "X" else "Z"
            frame = PauliFrame(circ.n_qubits)
            run_circuit(circ, frame, model, make_shot_rng(0, 0),
                        injections=[(li, anc, pauli)])
            x_res, z_res = frame.x[: code.n], frame.z[: code.n]
            if (x_res.any() or z_res.any()) and \
                    not _block_detectable(code, x_res, z_res) and \
                    not is_stab(x_res, z_res):
                violation = True
                break
        elapsed = time.monotonic() - t0
        report("criterion-7", violation and elapsed < 600,
               f"{checked} faulty cases safe; blockwise violation found={violation}; "
               f"{elapsed:.0f}s")
        assert violation
        assert elapsed < 600


class TestCriterion8DecoderOracles:
    def test_weight1_clean_decodes(self):
        for key, desc in (("exp8", EXP8), ("lac12", LAC12)):
            css = bundle(key, desc).css
            ctx_z = DecoderContext(css.hz)
            ctx_x = DecoderContext(css.hx)
            priors = np.full(css.n, 1e-3)
            for q in range(css.n):
                e = np.zeros(css.n, dtype=np.uint8)
                e[q] = 1
                res = ctx_z.bp_osd(css.hz.mul_vec(e), priors)
                resid = e ^ res.correction
                assert not css.hz.mul_vec(resid).any()
                assert all(resid[list(s)].sum() % 2 == 0 for s in css.logical_z), (key, q)
                res = ctx_x.bp_osd(css.hx.mul_vec(e), priors)
                resid = e ^ res.correction
                assert all(resid[list(s)].sum() % 2 == 0 for s in css.logical_x), (key, q)

    def test_weight1_concat_two_stage(self):
        code = bundle("exp8c", EXP8C).concat
        decoders = ConcatDecoders(code)
        B = code.n_blocks
        for q in range(code.n):
            e = np.zeros(code.n, dtype=np.uint8)
            e[q] = 1
            bits = code.hz.mul_vec(e)
            record = {"sigma_x": np.zeros(B, dtype=np.uint8),
                      "sigma_z": bits[:B],
                      "outer_x": np.zeros(code.n_hgp_x, dtype=np.uint8),
                      "outer_z": bits[B:]}
            x_corr, _ = concat_decode(record, code, 1e-3, "intermediate", decoders)
            resid = e ^ x_corr
            assert not code.hz.mul_vec(resid).any(), q
            assert all(resid[list(s)].sum() % 2 == 0 for s in code.logical_z), q

    def test_weight2_on_41_1_5(self):
        from adaptive_qec.codes import hgp, make_repetition
        css, _ = hgp(make_repetition(5))
        ctx = DecoderContext(css.hz)
        priors = np.full(css.n, 1e-3)
        z_log = set(css.logical_z[0])
        count = 0
        for a in range(css.n):
            for b_ in range(a, css.n):
                e = np.zeros(css.n, dtype=np.uint8)
                e[a] = 1
                e[b_] ^= 1
                if not e.any():
                    continue
                res = ctx.bp_osd(css.hz.mul_vec(e), priors)
                resid = e ^ res.correction
                assert sum(resid[q] for q in z_log) % 2 == 0, (a, b_)
                count += 1
        report("criterion-8a", True, f"[[41,1,5]] weight<=2 sweep: {count} cases clean")

    def test_residual_map_all_single_paulis(self):
        # Z1..Z4 with the fixed Z correction and X1..X4 with the fixed X
        # correction leave exactly the expected block-logical residues
        code = bundle("exp8c", EXP8C).concat
        expected_z = {0: {1, 2}, 1: {1}, 2: {2}, 3: set()}
        expected_x = {0: set(), 1: {1}, 2: {2}, 3: {1, 2}}
        z_reps = {frozenset(): set(), frozenset({1}): {1, 3},
                  frozenset({2}): {2, 3}, frozenset({1, 2}): {1, 2}}
        x_reps = {frozenset(): set(), frozenset({1}): {0, 1},
                  frozenset({2}): {0, 2}, frozenset({1, 2}): {0, 3}}
        b = 3
        block = {4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3}
        for q in range(4):
            err = np.zeros(code.n, dtype=np.uint8)
            err[4 * b + q] = 1
            sig = np.zeros(code.n_blocks, dtype=np.uint8)
            sig[b] = 1
            s1 = iceberg_stage(sig, np.zeros(code.n_blocks, dtype=np.uint8), code, 1e-3)
            resid = set(np.flatnonzero(err ^ s1.z_correction))
            want = {4 * b + t for t in z_reps[frozenset(expected_z[q])]}
            assert resid in (want, want ^ block), ("Z", q)
            s1 = iceberg_stage(np.zeros(code.n_blocks, dtype=np.uint8), sig, code, 1e-3)
            resid = set(np.flatnonzero(err ^ s1.x_correction))
            want = {4 * b + t for t in x_reps[frozenset(expected_x[q])]}
            assert resid in (want, want ^ block), ("X", q)
        report("criterion-8b", True, "all 8 single-Pauli residues match")

    def test_frame_vs_tableau_1000_circuits(self):
        rng = np.random.default_rng(20260808)
        agree = 0
        for trial in range(1000):
            circ = random_parity_circuit(rng, "Z" if trial % 2 == 0 else "X")
            faults = [
                (int(rng.integers(0, len(circ.layers) + 1)),
                 int(rng.integers(0, circ.n_qubits)),
                 "XYZ"[int(rng.integers(3))])
                for _ in range(int(rng.integers(0, 4)))
            ]
            frame_bits = run_circuit(circ, PauliFrame(circ.n_qubits), NoiseModel(0),
                                     make_shot_rng(0, trial), injections=faults)
            oracle_bits = tableau_oracle(circ, injections=faults)
            agree += (frame_bits == oracle_bits).all()
        report("criterion-8c", agree == 1000, f"frame vs tableau agreement {agree}/1000")
        assert agree == 1000


def ada13():
    return run("ada13", descriptor=EXP8C, mode="adaptive", p=1e-3, rounds=100,
               shots=10_000, seed=101)


class TestCriterion3AdaptiveDynamics:
    def test_table_dynamics(self):
        t0 = time.monotonic()
        rows = [
            (run("ada14", descriptor=EXP8C, mode="adaptive", p=1e-4, rounds=100,
                 shots=2000, seed=102), 2.06, 4.08, "[[200,4,8]] p=1e-4"),
            (ada13(), 3.62, 5.76, "[[200,4,8]] p=1e-3"),
            (run("lac14", descriptor=LAC12C, mode="adaptive", p=1e-4, rounds=100,
                 shots=1000, seed=103), 2.03, 4.04, "[[416,16,12]] p=1e-4"),
        ]
        lines = []
        ok = True
        for stats, q_t, w_t, label in rows:
            dq = stats.q_adapt / q_t - 1
            dw = stats.w_adapt / w_t - 1
            lines.append(f"{label}: q={stats.q_adapt:.3f} ({dq:+.1%}) "
                         f"w={stats.w_adapt:.3f} ({dw:+.1%})")
            ok = ok and abs(dq) < 0.05 and abs(dw) < 0.05
        elapsed = time.monotonic() - t0
        report("criterion-3", ok and elapsed < 1800, "; ".join(lines))
        for stats, q_t, w_t, label in rows:
            assert abs(stats.q_adapt / q_t - 1) < 0.05, label
            assert abs(stats.w_adapt / w_t - 1) < 0.05, label
        assert elapsed < 1800


class TestCriterion4CnotFloor:
    def test_floor_at_1e5(self):
        stats = run("ada15", descriptor=EXP8C, mode="adaptive", p=1e-5,
                    rounds=100, shots=1000, seed=104)
        dev = stats.cnot_data_avg / 400 - 1
        report("criterion-4", abs(dev) < 0.02,
               f"data CNOTs/round = {stats.cnot_data_avg:.2f} ({dev:+.2%} of 2n=400)")
        assert abs(dev) < 0.02


class TestCriterion5LogicalOrdering:
    def test_orderings_at_1e3(self):
        ada = ada13()
        plain = run("plain13", descriptor=EXP8, mode="plain-hgp", p=1e-3,
                    rounds=100, shots=10_000, seed=105)
        nonada = run("nonada13", descriptor=EXP8C, mode="nonadaptive-concat",
                     p=1e-3, rounds=100, shots=10_000, seed=106)
        factor = plain.eps_l / ada.eps_l if ada.eps_l > 0 else float("inf")
        sigma_pair = np.hypot(ada.sigma_epsl, plain.sigma_epsl)
        better_than_nonada = (nonada.eps_l - ada.eps_l) > 2 * np.hypot(
            ada.sigma_epsl, nonada.sigma_epsl)
        detail = (f"eps adaptive={ada.eps_l:.3e} plain={plain.eps_l:.3e} "
                  f"nonadaptive={nonada.eps_l:.3e}; plain/adaptive={factor:.2f} "
                  f"(need >=3); adaptive<nonadaptive at 2 sigma={better_than_nonada}")
        ok = factor >= 3 and (plain.eps_l - ada.eps_l) > 2 * sigma_pair \
            and better_than_nonada
        report("criterion-5", ok, detail)
        assert better_than_nonada, detail
        assert factor >= 3, (
            detail + ". Unattainable at p=1e-3 with this implementation: the "
            "measured crossover of the adaptive advantage sits near p~6e-4 "
            "(ratio 2.4 at 5e-4, 8-18 at 3e-4); see the decisions ledger."
        )


class TestCriterion6SingleShot:
    def test_unmasking_restores_stability(self):
        with_100 = ada13()
        with_50 = run("ada13r50", descriptor=EXP8C, mode="adaptive", p=1e-3,
                      rounds=50, shots=10_000, seed=107)
        no_50 = run("noum50", descriptor=EXP8C, mode="adaptive", p=1e-3,
                    rounds=50, shots=10_000, seed=108, unmask_override=0)
        no_100 = run("noum100", descriptor=EXP8C, mode="adaptive", p=1e-3,
                     rounds=100, shots=10_000, seed=109, unmask_override=0)
        ratio_with = with_100.eps_l / with_50.eps_l
        ratio_without = no_100.eps_l / no_50.eps_l
        ok = 0.8 <= ratio_with <= 1.3 and ratio_without > 1.5
        report("criterion-6", ok,
               f"with unmasking eps(100)/eps(50) = {ratio_with:.3f} (need [0.8,1.3]); "
               f"without = {ratio_without:.3f} (need >1.5)")
        assert 0.8 <= ratio_with <= 1.3
        assert ratio_without > 1.5


@pytest.mark.skipif(not os.environ.get("RUN_EXPENSIVE"),
                    reason="stretch pseudothreshold bracketing: multi-hour run, "
                           "not CI-gated; set RUN_EXPENSIVE=1 to execute")
class TestCriterion10StretchPseudothreshold:
    def test_bracketing(self):
        # two-point bracketing of eps_L(p) = p crossings on the (3,4) family
        def crossing(mode, desc, lo, hi):
            vals = {}
            for p in (lo, hi):
                stats = run(f"stretch-{mode}-{p}", descriptor=desc, mode=mode,
                            p=p, rounds=100, shots=20_000, seed=110)
                vals[p] = stats.eps_l
            assert vals[lo] < lo and vals[hi] > hi, vals
            return vals

        ada = crossing("adaptive", EXP8C, 0.0008, 0.0018)
        non = crossing("plain-hgp", EXP8, 0.0016, 0.0026)
        report("criterion-10", True, f"adaptive bracket {ada}; plain bracket {non}")
