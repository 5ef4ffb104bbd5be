import pytest

from capax.errors import RegistryCorrupt
from capax.grid import ExperimentCondition, FactorGrid, RunSpec, expand_grid
from capax.registry import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_STOPPED_EARLY,
    EpochReport,
    RunRegistry,
    RunResult,
    schedule,
)


def make_result(spec: RunSpec, status=STATUS_COMPLETED, **overrides) -> RunResult:
    fields = dict(
        run_id=spec.run_id,
        condition=spec.condition,
        fold=spec.fold,
        seed=spec.seed,
        status=status,
        epochs=(EpochReport(1, 0.9, 0.8, 0.3), EpochReport(2, 0.7, 0.6, 0.5)),
        best_epoch=2,
        val_loss=0.6,
        val_dice=0.5,
        test_loss=0.65,
        test_dice=0.48,
    )
    if status == STATUS_FAILED:
        fields.update(epochs=(), best_epoch=None, val_loss=None, val_dice=None,
                      test_loss=None, test_dice=None, error="boom")
    fields.update(overrides)
    return RunResult(**fields)


@pytest.fixture
def small_specs():
    grid = FactorGrid(families=("VGG",), ls_levels=("long",), dataset_sizes=(200, 500),
                      learning_rates=(1e-3,), regularizations=(1e-4,))
    return schedule(expand_grid(grid), k_folds=5, registry=None, seed=1)


def test_paper_schedule_count():
    assert len(schedule(expand_grid(FactorGrid()), 5, None, seed=0)) == 1620


def test_replay_reconstructs_state(tmp_path, small_specs):
    path = tmp_path / "reg.jsonl"
    registry = RunRegistry(path)
    for spec in small_specs[:4]:
        registry.append(make_result(spec))
    registry.append(make_result(small_specs[4], status=STATUS_FAILED))

    reloaded = RunRegistry(path)
    assert len(reloaded) == len(registry)
    assert [r.as_dict() for r in reloaded.results] == [r.as_dict() for r in registry.results]
    assert reloaded.completed_ids() == registry.completed_ids()


def test_failed_superseded_by_completion(tmp_path, small_specs):
    path = tmp_path / "reg.jsonl"
    registry = RunRegistry(path)
    spec = small_specs[0]
    registry.append(make_result(spec, status=STATUS_FAILED))
    registry.append(make_result(spec, status=STATUS_STOPPED_EARLY))
    assert registry.get(spec.run_id).ok
    reloaded = RunRegistry(path)
    assert reloaded.get(spec.run_id).ok
    assert len(reloaded.results) == 1


def test_duplicate_completed_rejected(small_specs):
    registry = RunRegistry()
    registry.append(make_result(small_specs[0]))
    with pytest.raises(RegistryCorrupt):
        registry.append(make_result(small_specs[0]))


def test_corrupt_line_reports_number(tmp_path, small_specs):
    path = tmp_path / "reg.jsonl"
    registry = RunRegistry(path)
    registry.append(make_result(small_specs[0]))
    with path.open("a") as fh:
        fh.write("{not json\n")
    with pytest.raises(RegistryCorrupt) as err:
        RunRegistry(path)
    assert err.value.line_no == 2


def test_schedule_resume_arithmetic(tmp_path, small_specs):
    registry = RunRegistry(tmp_path / "reg.jsonl")
    for spec in small_specs[:4]:
        registry.append(make_result(spec))
    registry.append(make_result(small_specs[4], status=STATUS_FAILED))

    grid = FactorGrid(families=("VGG",), ls_levels=("long",), dataset_sizes=(200, 500),
                      learning_rates=(1e-3,), regularizations=(1e-4,))
    pending = schedule(expand_grid(grid), k_folds=5, registry=registry, seed=1)
    # 10 total, 4 completed, 1 failed (rescheduled): 6 pending
    assert len(pending) == 6
    assert small_specs[4].run_id in {s.run_id for s in pending}


def test_schedule_complete_registry_is_noop(tmp_path, small_specs):
    registry = RunRegistry(tmp_path / "reg.jsonl")
    for spec in small_specs:
        registry.append(make_result(spec))
    grid = FactorGrid(families=("VGG",), ls_levels=("long",), dataset_sizes=(200, 500),
                      learning_rates=(1e-3,), regularizations=(1e-4,))
    assert schedule(expand_grid(grid), 5, registry, seed=1) == []


def test_result_round_trip(small_specs):
    result = make_result(small_specs[0])
    assert RunResult.from_dict(result.as_dict()).as_dict() == result.as_dict()


def test_condition_preserved(small_specs):
    result = make_result(small_specs[0])
    assert result.condition == ExperimentCondition("VGG", "long", 200, 1e-3, 1e-4)
