import pytest

from confregion.forecast import ForecastVector, LabelSpace
from confregion.learners import forecasts_csv_text

# Abdominal pain labels, in the column order of the published forecast table.
ABDO_LABELS = ("Appx", "Div", "Perf", "Non-spec", "Cholis", "Intest", "Pancr", "Renal", "Dyspep")

# (learner, example, probabilities, true label)
TABLE1 = [
    ("DW13-NN", "1653", (0.0, 0.0, 0.0, 0.03, 0.85, 0.0, 0.01, 0.0, 0.11), "Cholis"),
    ("DW13-NN", "2490", (0.0, 0.0, 0.22, 0.0, 0.0, 0.25, 0.04, 0.09, 0.4), "Dyspep"),
    ("DW13-NN", "5831", (0.53, 0.0, 0.0, 0.425, 0.001, 0.005, 0.0, 0.0, 0.039), "Non-spec"),
    ("NB", "1653", (3.08e-9, 4.5e-6, 3.27e-6, 4.37e-5, 0.99, 4.2e-3, 3.38e-3, 4.1e-10, 1.33e-4), "Cholis"),
    ("NB", "2490", (9.36e-5, 0.01, 0.17, 2.26e-5, 0.16, 0.46, 0.2, 2.17e-7, 2.2e-4), "Dyspep"),
    ("NB", "5831", (0.969, 2.88e-4, 1.7e-13, 0.03, 1.33e-9, 2.2e-4, 4.0e-11, 6.3e-10, 7.6e-9), "Non-spec"),
]

# Published region tables at 95% and 99% confidence.
REGIONS = {
    ("DW13-NN", "1653"): ({"Cholis", "Dyspep"}, {"Cholis", "Dyspep", "Non-spec", "Pancr"}),
    ("DW13-NN", "2490"): ({"Dyspep", "Intest", "Perf", "Renal"}, {"Dyspep", "Intest", "Perf", "Renal", "Pancr"}),
    ("DW13-NN", "5831"): ({"Appx", "Non-spec"}, {"Appx", "Non-spec", "Dyspep"}),
    ("NB", "1653"): ({"Cholis"}, {"Cholis"}),
    ("NB", "2490"): ({"Intest", "Pancr", "Perf", "Cholis"}, {"Intest", "Pancr", "Perf", "Cholis", "Div"}),
    ("NB", "5831"): ({"Appx"}, {"Appx", "Non-spec"}),
}


@pytest.fixture
def abdo_space():
    return LabelSpace(ABDO_LABELS)


def table1_vectors(learner=None):
    return [
        ForecastVector(f"{who}-{eid}", probs, ABDO_LABELS.index(true))
        for who, eid, probs, true in TABLE1
        if learner is None or who == learner
    ]


@pytest.fixture
def table1_csv(tmp_path, abdo_space):
    path = tmp_path / "table1.csv"
    rows = [
        ("example_id,true_label," + ",".join("p_" + n for n in ABDO_LABELS))
    ] + [
        f"{who}-{eid},{true}," + ",".join(repr(p) for p in probs)
        for who, eid, probs, true in TABLE1
    ]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def write_forecasts(tmp_path):
    def _write(space, vectors, name="forecasts.csv"):
        path = tmp_path / name
        path.write_text(forecasts_csv_text(space, vectors))
        return path

    return _write
