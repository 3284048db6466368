from dataclasses import replace

import numpy as np
import pytest

from mmc_dmppt.config import IrradianceSpec, ModuleGroup, preset
from mmc_dmppt.engine import Trace, run_scenario, summarize
from mmc_dmppt.traceio import (PLOT_NAMES, csv_header, emit_plots, plot_series, read_trace_csv,
                               write_trace_csv)

pd = pytest.importorskip("pandas")


@pytest.fixture(scope="module")
def short_failure():
    """Shaded, failing system over 80 ms with the failure at 60 ms."""
    spec = IrradianceSpec(groups=(ModuleGroup("*_?[56]", scale=0.2),
                                  ModuleGroup("*_?1", failure_time=0.06)))
    cfg = replace(preset("failure"), irradiance=spec, duration=0.08, decimation=10)
    return run_scenario(cfg)


class TestHeader:
    def test_column_count(self):
        n = 6
        assert len(csv_header(n)) == 7 + 3 * (3 + 2 * 2 * n + 2 * n + 2 * n + 2) == 166

    def test_golden(self):
        h = csv_header(2)
        assert h[:7] == ["t", "avg_v_c", "i_d_ref", "i_q_ref", "v_s_a", "v_s_b", "v_s_c"]
        assert h[7:28] == ["i_a", "i_a_ref", "i_z_a",
                           "v_c_a_u1", "v_c_a_u2", "v_c_a_l1", "v_c_a_l2",
                           "u_a_u1", "u_a_u2", "u_a_l1", "u_a_l2",
                           "p_pv_a_u1", "p_pv_a_u2", "p_pv_a_l1", "p_pv_a_l2",
                           "g_a_u1", "g_a_u2", "g_a_l1", "g_a_l2",
                           "k_up_a", "k_low_a"]
        assert h[-2:] == ["k_up_c", "k_low_c"]
        assert len(set(h)) == len(h)


class TestCsv:
    def test_round_trip(self, short_failure, tmp_path):
        path = write_trace_csv(short_failure, tmp_path / "trace.csv")
        back = read_trace_csv(path)
        tr = short_failure.trace
        assert back.n == tr.n and len(back) == len(tr)
        for col in tr.columns():
            np.testing.assert_allclose(getattr(back, col), getattr(tr, col), rtol=1e-8, atol=1e-12,
                                       err_msg=col)
        np.testing.assert_array_equal(back.u, tr.u)
        np.testing.assert_array_equal(back.k_up, tr.k_up)

    def test_nine_significant_digits(self, short_failure, tmp_path):
        path = write_trace_csv(short_failure, tmp_path / "trace.csv")
        row = path.read_text().splitlines()[5].split(",")
        for cell in row:
            mantissa = cell.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(mantissa) <= 9

    def test_stable_rewrite(self, short_failure, tmp_path):
        a = write_trace_csv(short_failure, tmp_path / "a.csv")
        b = write_trace_csv(read_trace_csv(a), tmp_path / "b.csv")
        assert a.read_text() == b.read_text()

    def test_empty_trace(self, tmp_path):
        path = write_trace_csv(Trace.empty(6, 0), tmp_path / "empty.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == 1 and lines[0].split(",") == csv_header(6)
        assert len(read_trace_csv(path)) == 0

    def test_unwritable_path_named(self, tmp_path):
        target = tmp_path / "missing" / "trace.csv"
        with pytest.raises(OSError, match="missing"):
            write_trace_csv(Trace.empty(1, 0), target)

    def test_foreign_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_trace_csv(p)

    def test_metrics_recomputed_from_csv(self, short_failure, tmp_path):
        path = write_trace_csv(short_failure, tmp_path / "trace.csv")
        df = pd.read_csv(path)
        cfg = short_failure.config
        post = df[df["t"] >= cfg.startup]
        n = cfg.mmc.n
        from_csv = summarize(read_trace_csv(path), cfg.mmc.v_nominal, cfg.startup)
        for k, ph in enumerate("abc"):
            err = post[f"i_{ph}"] - post[f"i_{ph}_ref"]
            assert from_csv.tracking_rms[k] == pytest.approx(np.sqrt((err ** 2).mean()), rel=1e-12)
            assert from_csv.max_abs_i_z[k] == pytest.approx(post[f"i_z_{ph}"].abs().max(), rel=1e-12)
            for arm in "ul":
                cols = [f"v_c_{ph}_{arm}{j}" for j in range(1, n + 1)]
                spread = (post[cols].max(axis=1) - post[cols].min(axis=1)).max()
                assert spread <= from_csv.max_arm_spread + 1e-12
        assert from_csv.avg_v_max_pct == pytest.approx(post["avg_v_c"].max(), rel=1e-12)
        energy = np.trapezoid(df["p_pv_b_l3"], df["t"])
        assert from_csv.energy[1, n + 2] == pytest.approx(energy, rel=1e-12)
        # and the in-memory summary agrees to CSV precision
        mem = short_failure.summary
        np.testing.assert_allclose(from_csv.tracking_rms, mem.tracking_rms, rtol=1e-6)
        np.testing.assert_allclose(from_csv.energy, mem.energy, rtol=1e-7)
        assert from_csv.max_arm_spread == pytest.approx(mem.max_arm_spread, rel=1e-6)


class TestPlots:
    def test_four_files(self, short_failure, tmp_path):
        paths = emit_plots(short_failure, tmp_path / "png")
        assert set(paths) == set(PLOT_NAMES)
        for p in paths.values():
            assert p.suffix == ".png" and p.stat().st_size > 0

    def test_vector_format(self, short_failure, tmp_path):
        paths = emit_plots(short_failure.trace, tmp_path, ext="svg")
        assert all(p.read_text().lstrip().startswith("<?xml") for p in paths.values())

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plots(Trace.empty(6, 0), tmp_path)

    def test_failed_module_series_drops_to_zero(self, short_failure):
        s = plot_series(short_failure.trace)["irradiance_power"]
        after = s["t"] >= 0.06
        assert np.all(s["p_pv"][after, 0] == 0.0) and np.all(s["p_pv"][~after, 0] > 0.0)

    def test_shaded_module_series_bounded(self, short_failure):
        s = plot_series(short_failure.trace)["irradiance_power"]
        assert s["p_pv"][:, 4:6].max() < 110.0
