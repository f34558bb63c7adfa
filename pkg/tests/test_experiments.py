import numpy as np
import pytest

from adaptive_qec.codes import build_code
from adaptive_qec.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    bundle_descriptor,
    eps_per_round,
    error_bars,
    resource_report,
    run_memory_experiment,
    surface_baseline,
    write_csv,
)

EXP_CONCAT = {"family": "expander", "n": 8, "concat": True}
EXP_PLAIN = {"family": "expander", "n": 8}


class TestEpsPerRound:
    def test_zero(self):
        assert eps_per_round(0.0, 100) == 0.0

    def test_single_round_identity(self):
        assert eps_per_round(0.37, 1) == pytest.approx(0.37)

    def test_half_at_100(self):
        assert eps_per_round(0.5, 100) == pytest.approx(1 - 0.5 ** 0.01)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            eps_per_round(1.5, 10)


class TestErrorBars:
    def test_zero_pl(self):
        assert error_bars(0.0, 1000, 50) == (0.0, 0.0)

    def test_r1_collapse(self):
        s_pl, s_eps = error_bars(0.2, 500, 1)
        assert s_eps == pytest.approx(s_pl)

    def test_matches_finite_difference(self):
        p_l, shots, r = 0.1, 10_000, 100
        s_pl, s_eps = error_bars(p_l, shots, r)
        h = 1e-6
        deriv = (eps_per_round(p_l + h, r) - eps_per_round(p_l - h, r)) / (2 * h)
        assert s_eps == pytest.approx(deriv * s_pl, rel=1e-4)


class TestMemoryExperiment:
    def test_p_zero_never_fails(self):
        for desc, mode in ((EXP_CONCAT, "adaptive"), (EXP_PLAIN, "plain-hgp")):
            cfg = ExperimentConfig(descriptor=desc, mode=mode, p=0.0, rounds=3,
                                   shots=8, seed=0)
            stats = run_memory_experiment(cfg)
            assert stats.failures == 0 and stats.p_l == 0.0

    def test_shot_reproducibility(self):
        cfg = ExperimentConfig(descriptor=EXP_CONCAT, mode="adaptive", p=2e-3,
                               rounds=10, shots=40, seed=77)
        a = run_memory_experiment(cfg)
        b = run_memory_experiment(cfg)
        for field in ("failures", "cnot_data_avg", "cnot_flag_avg",
                      "w_adapt", "q_adapt"):
            assert getattr(a, field) == getattr(b, field)

    def test_worker_split_invariance(self):
        base = dict(descriptor=EXP_CONCAT, mode="adaptive", p=2e-3, rounds=8,
                    shots=64, seed=13)
        a = run_memory_experiment(ExperimentConfig(**base, threads=1))
        b = run_memory_experiment(ExperimentConfig(**base, threads=2))
        assert a.failures == b.failures
        assert a.w_adapt == b.w_adapt

    def test_mode_equivalence_unmask_every_round(self):
        # adaptive with unmask forced each round runs the identical full
        # circuit stream as the non-adaptive mode
        base = dict(descriptor=EXP_CONCAT, p=2e-3, rounds=6, shots=30, seed=5)
        a = run_memory_experiment(ExperimentConfig(
            mode="adaptive", unmask_override=1, **base))
        b = run_memory_experiment(ExperimentConfig(
            mode="nonadaptive-concat", **base))
        assert a.failures == b.failures
        assert a.cnot_data_avg == b.cnot_data_avg
        assert a.w_adapt == b.w_adapt

    def test_adaptive_measures_fewer_generators(self):
        base = dict(descriptor=EXP_CONCAT, p=1e-3, rounds=10, shots=30, seed=3)
        ada = run_memory_experiment(ExperimentConfig(mode="adaptive", **base))
        full = run_memory_experiment(ExperimentConfig(mode="nonadaptive-concat", **base))
        assert ada.cnot_data_avg < full.cnot_data_avg
        assert ada.q_adapt < full.q_adapt

    def test_plain_dynamic_equals_static(self):
        cfg = ExperimentConfig(descriptor=EXP_PLAIN, mode="plain-hgp", p=1e-3,
                               rounds=5, shots=10, seed=0)
        stats = run_memory_experiment(cfg)
        bundle = build_code(EXP_PLAIN)
        report = resource_report(bundle)
        assert stats.w_adapt == pytest.approx(report["w_static"])
        assert stats.q_adapt == pytest.approx(report["q_static"])
        edges = int(bundle.css.hx.row_weights().sum() + bundle.css.hz.row_weights().sum())
        assert stats.cnot_data_avg == pytest.approx(edges)

    def test_cnot_floor_at_tiny_p(self):
        cfg = ExperimentConfig(descriptor=EXP_CONCAT, mode="adaptive", p=1e-5,
                               rounds=20, shots=40, seed=9)
        stats = run_memory_experiment(cfg)
        assert abs(stats.cnot_data_avg - 400) / 400 < 0.02
        assert stats.cnot_flag_avg == pytest.approx(100)


class TestSurfaceBaseline:
    def test_k1_matches_plain_run(self):
        one = surface_baseline(1, 3, 2e-3, 10, 200, seed=21)
        cfg = ExperimentConfig(descriptor={"family": "repetition", "n": 3},
                               mode="plain-hgp", p=2e-3, rounds=10, shots=200,
                               seed=21)
        direct = run_memory_experiment(cfg)
        assert one.p_l == pytest.approx(direct.p_l)

    def test_monotone_in_k(self):
        results = [surface_baseline(k, 3, 3e-3, 10, 200, seed=4).p_l
                   for k in (1, 4, 16)]
        assert results[0] <= results[1] <= results[2]


class TestResourceReport:
    @pytest.mark.parametrize("desc,w,q", [
        (EXP_PLAIN, 7.0, 6.72),
        (EXP_CONCAT, 8.90, 8.72),
        ({"family": "lacross", "n": 12, "z": 4}, 5.0, 4.61),
        ({"family": "lacross", "n": 16, "z": 4}, 5.25, 5.04),
        ({"family": "lacross", "n": 12, "z": 4, "concat": True}, 6.88, 6.62),
    ])
    def test_static_table(self, desc, w, q):
        report = resource_report(build_code(desc))
        assert report["w_static"] == pytest.approx(w, abs=0.01)
        assert report["q_static"] == pytest.approx(q, abs=0.01)


class TestCsv:
    def test_column_order_and_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(descriptor=EXP_PLAIN, mode="plain-hgp", p=1e-3,
                               rounds=2, shots=5, seed=1)
        stats = run_memory_experiment(cfg)
        path = tmp_path / "out.csv"
        write_csv(path, [stats])
        lines = path.read_text().strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        fields = lines[1].split(",")
        assert fields[0] == stats.code_id
        assert int(fields[4]) == 5
        write_csv(path, [stats], append=True)
        assert len(path.read_text().strip().split("\n")) == 3

    def test_bundle_descriptor_rebuilds(self):
        bundle = build_code(EXP_CONCAT)
        again = build_code(bundle_descriptor(bundle))
        assert again.code_id == bundle.code_id
