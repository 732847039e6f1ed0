"""Entity-shift scenarios: controlled train/test entity-set differences.

scenario 0: no change.
scenario 1: a seeded fraction of entities is withheld from train but kept
            in test (new entities appear at evaluation time).
scenario 2: a seeded fraction is removed from test only (entities vanish).
scenario 3: both, on disjoint seeded subsets.

Transformation is pure column selection; retained series are bitwise
untouched. For fixed-slot architectures that cannot drop columns, the
zero-mask variant below keeps the slot but silences its training signal.
"""

import math
from dataclasses import asdict, dataclass

from ..errors import ConfigError, ContractError
from .storage import Dataset

SCENARIOS = (0, 1, 2, 3)


@dataclass
class ScenarioSpec:
    scenario: int = 0
    fraction: float = 0.10
    seed: int = 0

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ConfigError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.scenario == 3 and 2.0 * self.fraction > 1.0:
            raise ConfigError(
                f"scenario 3 needs two disjoint subsets: 2 * fraction = "
                f"{2 * self.fraction} exceeds 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(**d).validate()


def scenario_selection(entity_ids, spec: ScenarioSpec):
    """Return (train_ids, test_ids) in the original entity order."""
    import numpy as np

    spec.validate()
    ids = list(entity_ids)
    n = len(ids)
    k = math.floor(spec.fraction * n + 1e-9)
    perm = np.random.default_rng(spec.seed).permutation(n)
    set_a = {ids[i] for i in perm[:k]}
    set_b = {ids[i] for i in perm[k:2 * k]}
    if spec.scenario == 0:
        return ids, ids
    if spec.scenario == 1:
        return [e for e in ids if e not in set_a], ids
    if spec.scenario == 2:
        return ids, [e for e in ids if e not in set_a]
    return [e for e in ids if e not in set_a], [e for e in ids if e not in set_b]


def apply_scenario(train: Dataset, test: Dataset, spec: ScenarioSpec):
    """Apply the entity-set transform; returns (train', test')."""
    if train.entity_ids != test.entity_ids:
        raise ContractError("train and test segments must share the same entity set")
    train_ids, test_ids = scenario_selection(train.entity_ids, spec)
    return train.select_entities(train_ids), test.select_entities(test_ids)


def zero_mask_entities(d: Dataset, entity_ids) -> Dataset:
    """Zero the named entities' series, keeping their column slots.

    This is the withholding protocol for position-bound models: the slot
    must exist at training time, so absence is encoded as zero activity
    instead of column removal.
    """
    mask_set = set(entity_ids)
    unknown = mask_set - set(d.entity_ids)
    if unknown:
        raise ContractError(f"unknown entity ids: {sorted(unknown)}")
    values = d.values.copy()
    for i, e in enumerate(d.entity_ids):
        if e in mask_set:
            values[:, i, :] = 0.0
    return Dataset(values, list(d.entity_ids), d.start_time, d.step_seconds,
                   list(d.channel_names))
