import json

import numpy as np
import pytest

from imdd_capacity import experiments as ex
from imdd_capacity.errors import ConfigurationError


def _cfg(name, **kw):
    kw.setdefault("bins", 256)
    return ex.ExperimentConfig(name, **kw)


def test_every_experiment_resolves_with_defaults():
    for name in ex.EXPERIMENTS:
        cfg = ex.ExperimentConfig(name).resolved()
        assert cfg.experiment == name
        if ex.EXPERIMENTS[name].sweeps:
            assert cfg.snr_values().size >= 1


def test_commands_cover_all_experiments():
    names = [n for figs in ex.COMMANDS.values() for n in figs]
    assert sorted(names) == sorted(ex.EXPERIMENTS)


@pytest.mark.parametrize("kw", [
    dict(channel="chi2"),
    dict(constraint="mean"),
    dict(snr_min=10, snr_max=5),
    dict(snr_step=0),
    dict(format_size=1),
    dict(tol=-1.0),
    dict(bins=4),
    dict(format="xml"),
])
def test_bad_configs_rejected(kw):
    with pytest.raises(ConfigurationError):
        ex.ExperimentConfig("fig8", **kw).resolved()


def test_unknown_experiment():
    with pytest.raises(ConfigurationError):
        ex.ExperimentConfig("fig99").resolved()


def test_odd_bipolar_size_rejected():
    with pytest.raises(ConfigurationError):
        ex.ExperimentConfig("fig4", format_size=5).resolved()


def test_snr_values_inclusive():
    cfg = _cfg("fig8", snr_min=0, snr_max=1, snr_step=0.25).resolved()
    np.testing.assert_allclose(cfg.snr_values(), [0, 0.25, 0.5, 0.75, 1.0])


def test_schema_and_values_fixed_ppc():
    t = ex.run_experiment(_cfg("fig8", snr_min=0, snr_max=10, snr_step=5))
    assert t.columns == ["psnr_db", "capacity_bits", "uniform_bits", "gain_bits"]
    np.testing.assert_allclose(t.column("psnr_db"), [0, 5, 10])
    np.testing.assert_allclose(t.column("gain_bits"),
                               t.column("capacity_bits") - t.column("uniform_bits"), atol=1e-12)
    assert np.all(t.column("capacity_bits") <= 2.0)
    assert t.metadata["snr_convention"].lower().startswith("psnr")


def test_pmf_tables_sum_to_one():
    t = ex.run_experiment(_cfg("fig9", snr_min=0, snr_max=10, snr_step=10))
    for snr in (0.0, 10.0):
        p = t.column("probability")[t.column("psnr_db") == snr]
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_confusion_rows_sum_to_one():
    t = ex.run_experiment(_cfg("fig12", format_size=4))
    sent = t.column("sent")
    prob = t.column("probability")
    for k in range(4):
        assert prob[sent == k].sum() == pytest.approx(1.0, abs=1e-9)


def test_closed_forms_table():
    t = ex.run_experiment(ex.ExperimentConfig("closed-forms"))
    d = dict(zip(t.column("quantity"), t.column("value")))
    assert d["delta_h_exponential_vs_uniform_bits"] == pytest.approx(np.log2(np.e / 2), abs=1e-15)
    assert d["gain_first_moment_db"] == pytest.approx(1.3326448623927063, abs=1e-12)
    assert d["gain_second_moment_db"] == pytest.approx(1.5329310421374203, abs=1e-12)


def test_deterministic_and_worker_invariant():
    a = ex.run_experiment(_cfg("fig8", snr_min=0, snr_max=6, snr_step=3))
    b = ex.run_experiment(_cfg("fig8", snr_min=0, snr_max=6, snr_step=3))
    c = ex.run_experiment(_cfg("fig8", snr_min=0, snr_max=6, snr_step=3, workers=2))
    assert a == b
    assert a.rows == c.rows
    assert a.metadata["config_hash"] == c.metadata["config_hash"]


def test_digest_tracks_numbers_not_plumbing():
    base = _cfg("fig8").resolved()
    same = _cfg("fig8", out="x.csv", format="json", workers=3).resolved()
    other = _cfg("fig8", tol=1e-8).resolved()
    assert base.digest() == same.digest()
    assert base.digest() != other.digest()


def test_csv_and_json_round_trip(tmp_path):
    t = ex.run_experiment(_cfg("fig8", snr_min=0, snr_max=5, snr_step=5))
    for fmt in ("csv", "json"):
        path = tmp_path / f"out.{fmt}"
        ex.emit(t, str(path), fmt)
        assert ex.read_table(path) == t
    # floats survive exactly
    assert ex.parse(ex.to_csv(t)).rows == t.rows


def test_empty_table_is_header_only():
    t = ex.ResultTable([("snr_db", "float"), ("x", "int")], [], {"a": 1})
    text = ex.to_csv(t)
    lines = text.splitlines()
    assert lines[2] == "snr_db,x"
    assert len(lines) == 3
    assert ex.parse(text) == t
    assert json.loads(ex.to_json(t))["rows"] == []


def test_table_rejects_bad_rows():
    with pytest.raises(ValueError):
        ex.ResultTable([("a", "float")], [(1.0, 2.0)])
    with pytest.raises(ValueError):
        ex.ResultTable([("a", "complex")], [])


def test_metadata_records_tolerances():
    t = ex.run_experiment(_cfg("fig12", format_size=4))
    m = t.metadata
    assert m["tolerances"]["ba_tol_bits"] == 1e-6
    assert m["tolerances"]["output_bins"] == 256
    assert m["config"]["format_size"] == 4
    assert len(m["config_hash"]) == 16
