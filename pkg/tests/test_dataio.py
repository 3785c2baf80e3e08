import dataclasses

import numpy as np
import pytest

from interference_lab.core import BipartiteGraph, datasets_equal, validate_dataset
from interference_lab.dataio import DataFormatError, load_dataset, save_dataset
from interference_lab.sim import DgpParams, GraphParams, RolloutParams, simulate_experiment

from conftest import small_dataset


def simulated_dataset(seed=7):
    return simulate_experiment(
        GraphParams(n_eligible=12, n_ineligible=3, n_connected=20, avg_degree=2.5),
        DgpParams(beta=1.0, gamma=0.5, rho=0.2, sigma=0.3, baseline_mean=5.0, baseline_sd=1.0),
        RolloutParams((1, 3), (0.3, 0.7)),
        T=5,
        seed=seed,
    )


def read_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_round_trip_simulated_dataset(tmp_path):
    d = simulated_dataset()
    save_dataset(d, tmp_path)
    loaded = load_dataset(tmp_path)
    assert validate_dataset(loaded) == []
    assert datasets_equal(d, loaded)


def test_round_trip_with_covariates(tmp_path):
    d = small_dataset(with_covariates=True)
    save_dataset(d, tmp_path)
    assert datasets_equal(d, load_dataset(tmp_path))


def test_round_trip_without_graph(tmp_path):
    d = small_dataset(with_graph=False)
    save_dataset(d, tmp_path)
    assert not (tmp_path / "graph.csv").exists()
    assert datasets_equal(d, load_dataset(tmp_path))


def test_save_twice_is_byte_identical(tmp_path):
    d = simulated_dataset()
    save_dataset(d, tmp_path / "a")
    save_dataset(d, tmp_path / "b")
    assert read_bytes(tmp_path / "a") == read_bytes(tmp_path / "b")


def test_non_numeric_outcome_cites_file_and_line(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    path = tmp_path / "outcomes.csv"
    lines = path.read_text().splitlines()
    lines[3] = lines[3].rsplit(",", 1)[0] + ",oops"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "outcomes.csv:4" in str(err.value)


def test_missing_file_reported(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    (tmp_path / "treatments.csv").unlink()
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "treatments.csv" in str(err.value) and "missing" in str(err.value)


def test_duplicate_panel_entry_rejected(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    path = tmp_path / "treatments.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "duplicate" in str(err.value)


def test_missing_panel_entry_rejected(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    path = tmp_path / "treatments.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "missing entry" in str(err.value)


def test_invalid_monotonicity_rejected_on_load(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    path = tmp_path / "treatments.csv"
    text = path.read_text().replace("1,4,1", "1,4,0")
    path.write_text(text)
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "monotone" in str(err.value)


def test_ineligible_units_require_graph(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    (tmp_path / "graph.csv").unlink()
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "ineligible" in str(err.value)


def test_eligible_ids_must_be_dense(tmp_path):
    save_dataset(small_dataset(with_graph=False), tmp_path)
    path = tmp_path / "units.csv"
    path.write_text(path.read_text().replace("3,1", "5,1"))
    with pytest.raises(DataFormatError) as err:
        load_dataset(tmp_path)
    assert "1..N" in str(err.value)


def test_isolated_connected_units_not_saved(tmp_path):
    d = small_dataset()
    g = d.graph
    bad = BipartiteGraph(
        treatment_ids=g.treatment_ids,
        eligible=g.eligible,
        connected_ids=np.append(g.connected_ids, 50),
        edge_treatment=g.edge_treatment,
        edge_connected=g.edge_connected,
        edge_weight=g.edge_weight,
    )
    with pytest.raises(ValueError, match="no edges"):
        save_dataset(dataclasses.replace(d, graph=bad), tmp_path)


def test_save_refuses_invalid_dataset(tmp_path):
    d = dataclasses.replace(small_dataset(), pre_period_end=9)
    with pytest.raises(ValueError, match="invalid dataset"):
        save_dataset(d, tmp_path)
