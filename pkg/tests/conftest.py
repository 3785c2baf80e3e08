import numpy as np
import pytest

from interference_lab.core import (
    BipartiteGraph,
    ExperimentDataset,
    OutcomePanel,
    TreatmentPanel,
    UnitCovariates,
)


def small_graph() -> BipartiteGraph:
    # 3 eligible units (degrees 1, 2, 3), one ineligible unit, 4 connected units
    return BipartiteGraph(
        treatment_ids=[1, 2, 3, 4],
        eligible=[True, True, True, False],
        connected_ids=[1, 2, 3, 4],
        edge_treatment=[1, 2, 2, 3, 3, 3, 4],
        edge_connected=[1, 1, 2, 2, 3, 4, 4],
        edge_weight=[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    )


def small_dataset(with_graph=True, with_covariates=False) -> ExperimentDataset:
    # 3 units, T=4: units 1 and 2 adopt at t=2, unit 3 stays control
    assignments = np.array(
        [
            [0, 1, 1, 1],
            [0, 1, 1, 1],
            [0, 0, 0, 0],
        ],
        dtype=np.int8,
    )
    outcomes = np.array(
        [
            [1.0, 1.0, 3.0, 3.0, 3.0],
            [2.0, 2.0, 4.0, 4.0, 4.0],
            [0.5, 0.5, 0.5, 0.5, 0.5],
        ]
    )
    return ExperimentDataset(
        outcomes=OutcomePanel(outcomes),
        treatments=TreatmentPanel(assignments, design_tag="staggered"),
        pre_period_end=1,
        graph=small_graph() if with_graph else None,
        covariates=UnitCovariates([[0.1, 1.0], [0.2, 2.0], [0.3, 3.0]]) if with_covariates else None,
    )


@pytest.fixture
def dataset():
    return small_dataset()
