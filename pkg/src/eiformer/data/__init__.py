from .csv_import import import_csv
from .scenario import (
    SCENARIOS,
    ScenarioSpec,
    apply_scenario,
    scenario_selection,
    zero_mask_entities,
)
from .storage import Dataset, load_dataset, save_dataset
from .synthetic import gen_synthetic
from .transform import (
    STD_FLOOR,
    NormStats,
    WindowBatch,
    WindowStream,
    chrono_split,
    fit_normalizer,
    make_windows,
)
