import pytest

from symflood.cli import main
from symflood.core import SimConfig
from symflood.experiments import (
    ExperimentSpec,
    builtin_spec,
    emit_plots,
    list_experiments,
    load_spec,
    read_table,
    run_experiment,
    save_spec,
    write_table,
)

QUIET = SimConfig(noise_enabled=False)


def _small(**kw):
    base = dict(id="custom", grid=(2, 2), distances_m=(50.0, 80.0), n_packets=2, base_config=QUIET)
    base.update(kw)
    return ExperimentSpec(**base)


def test_builtin_shapes():
    assert list_experiments() == ["fig5", "fig7", "fig8", "fig9"]
    fig5 = builtin_spec("fig5")
    ds = [c["grid_d_m"] for c in fig5.cells()]
    assert {50.0, 60.0, 100.0, 200.0} <= set(ds)
    assert ds == sorted(ds) and ds[1] == 60.0 and len(ds) == 8
    fig7 = builtin_spec("fig7")
    assert [(c["grid_d_m"], c["packet_bits"]) for c in fig7.cells()][:4] == [
        (100.0, 64), (100.0, 128), (100.0, 256), (100.0, 512)
    ]
    fig8 = builtin_spec("fig8").cells()
    assert fig8 == [{"grid_d_m": 100.0, "packet_bits": 64, "rows": 8, "cols": 8}]
    fig9 = builtin_spec("fig9").cells()
    assert len(fig9) == 24
    assert sorted({c["rows"] * c["cols"] for c in fig9}) == [16, 25, 36, 49, 64, 81]
    with pytest.raises(KeyError):
        builtin_spec("fig6")


def test_invalid_specs():
    with pytest.raises(ValueError, match="sweep key"):
        _small(sweep={"colour": (1, 2)})
    with pytest.raises(ValueError):
        _small(n_packets=0)
    with pytest.raises(ValueError):
        _small(id="fig99")


def test_config_sweep_and_seeds():
    spec = _small(sweep={"tx_power_dbm": (0.0, -3.0)})
    rows = run_experiment(spec, seed=3)
    assert len(rows) == 4
    assert [r["tx_power_dbm"] for r in rows] == ["0.0", "-3.0", "0.0", "-3.0"]
    assert len({r["sub_seed"] for r in rows}) == 4
    assert all(r["ber_avg"] == "0" for r in rows)
    assert all(float(r["latency_mean_us"]) > 20 for r in rows)


def test_byte_identical_reruns(tmp_path):
    spec = _small(base_config=SimConfig(), packet_bits_list=(16,))
    write_table(run_experiment(spec, seed=1), tmp_path / "a.csv")
    write_table(run_experiment(spec, seed=1), tmp_path / "b.csv")
    write_table(run_experiment(spec, seed=1, threads=2), tmp_path / "c.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    write_table(run_experiment(spec, seed=2), tmp_path / "d.csv")
    assert a != (tmp_path / "d.csv").read_bytes()


def test_spec_file_round_trip(tmp_path):
    spec = _small(sweep={"rows": (2, 3)}, seed=9)
    save_spec(spec, tmp_path / "s.yaml")
    assert load_spec(tmp_path / "s.yaml") == spec
    cells = spec.cells()
    assert [(c["rows"], c["cols"]) for c in cells] == [(2, 2), (3, 3), (2, 2), (3, 3)]


def test_plots(tmp_path):
    rows = run_experiment(_small(id="fig5"), seed=0)
    paths = emit_plots(rows, tmp_path)
    assert [p.name for p in paths] == ["fig5.svg"]
    assert paths[0].read_text().lstrip().startswith("<?xml")
    with pytest.raises(ValueError):
        emit_plots([], tmp_path / "none")
    assert not (tmp_path / "none").exists()


def test_cli_round_trip(tmp_path, capsys):
    spec_file = tmp_path / "s.yaml"
    save_spec(_small(id="fig9", sweep={"rows": (2, 3)}), spec_file)
    out = tmp_path / "out"
    assert main(["run", str(spec_file), "--out-dir", str(out), "--trials", "1", "--seed", "4"]) == 0
    rows = read_table(out / "fig9.csv")
    assert [r["n_nodes"] for r in rows] == ["4", "9", "4", "9"]
    assert all(r["trials"] == "1" for r in rows)
    assert main(["plot", str(out / "fig9.csv")]) == 0
    assert (out / "fig9.svg").exists()
    assert main(["list-experiments"]) == 0
    assert "fig8" in capsys.readouterr().out


def test_cli_plot_empty_table(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("experiment_id,grid_d_m\n")
    assert main(["plot", str(f)]) == 2
