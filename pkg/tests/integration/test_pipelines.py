"""End-to-end tests across features, training, evaluation and the mesh."""

import numpy as np
import pytest

from app.evguard.schemas.mesh import BusConfig, EventType, MeshConfig, Mitigation
from app.evguard.schemas.neuralnet import DnnSpec, default_spec
from app.evguard.services.evaluation import cross_validate, run_single_experiment
from app.evguard.services.features import (
    apply_scaler,
    featurize_directory,
    fit_scaler,
    read_csv,
    synth_corpus,
    synth_traces,
    write_csv,
)
from app.evguard.services.mesh import SampleResolver, build_mesh, parse_scenario, run_mesh_sim
from app.evguard.services.neuralnet import predict, train

pytestmark = pytest.mark.integration


class TestFeaturePipeline:
    """Test traces -> counts -> scaled CSV."""

    @pytest.mark.slow
    def test_full_size_corpus(self, tmp_path, layout):
        """561 + 447 traces featurize to a 1008x140 matrix that scales into [0, 1]."""
        dataset = synth_corpus(layout=layout, seed=7)
        synth_traces(dataset, tmp_path / "traces", seed=7)
        raw, _ = featurize_directory(tmp_path / "traces", layout, jobs=4)
        assert raw.features.shape == (1008, 140)
        assert raw.class_counts == {0: 561, 1: 447}

        n_slots = len(layout.mnemonic_slots)
        slots = layout.slot_index()
        for vector in raw.features:
            for group, index in layout.group_index().items():
                members, _ = layout.members(group)
                assert vector[index] >= sum(vector[slots[m]] for m in members)
            assert vector[n_slots:].sum() > 0

        scaled = apply_scaler(fit_scaler(raw, "minmax"), raw)
        assert scaled.features.min() >= 0.0
        assert scaled.features.max() <= 1.0
        path = write_csv(scaled, tmp_path / "dataset.csv")
        assert read_csv(path, layout) == scaled


class TestTrainingAndEvaluation:
    """Test training on the synthetic corpus."""

    def test_small_cross_validation(self, separable_corpus):
        """5-fold CV of a small DNN separates the classes and ignores the worker count."""
        spec = DnnSpec(hidden=(16,))
        cfg = {"epochs": 60, "batch_size": 8, "seed": 1}
        serial = cross_validate(spec, separable_corpus, 5, cfg, jobs=1)
        threaded = cross_validate(spec, separable_corpus, 5, cfg, jobs=2)
        assert serial.summary["acc"].mean >= 0.9
        assert serial.summary["auc"].mean >= 0.95
        assert [f.acc for f in serial.folds] == [f.acc for f in threaded.folds]
        assert sum(f.n_test for f in serial.folds) == len(separable_corpus)

    def test_single_experiment(self, separable_corpus):
        """The 40/30/30 run reports sizes, history and test metrics."""
        _, report = run_single_experiment(
            DnnSpec(hidden=(16,)), separable_corpus, {"epochs": 40, "batch_size": 8}
        )
        assert report.sizes == {"train": 48, "val": 36, "test": 36}
        assert len(report.history) == 40
        assert report.history.val_acc[-1] is not None
        assert report.metrics.acc >= 0.85

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", ["dnn", "cnn", "lstm"])
    def test_ten_fold_protocol_on_separable_corpus(self, layout, kind):
        """10-fold CV at full size, batch 100 / 20 epochs: ACC >= 0.95 and AUC >= 0.97."""
        raw = synth_corpus(layout=layout, separation=0.9, seed=7)
        dataset = apply_scaler(fit_scaler(raw, "minmax"), raw)
        report = cross_validate(
            default_spec(kind), dataset, 10, {"epochs": 20, "batch_size": 100}, jobs=4
        )
        assert report.summary["acc"].mean >= 0.95
        assert report.summary["auc"].mean >= 0.97

    @pytest.mark.slow
    def test_training_time_ordering(self, separable_corpus):
        """On identical data and epochs the DNN trains faster than the CNN and the LSTM."""
        cfg = {"epochs": 2, "batch_size": 20}
        times = {
            kind: train(default_spec(kind), separable_corpus, None, cfg)[1].wall_time
            for kind in ("dnn", "cnn", "lstm")
        }
        assert times["dnn"] < times["cnn"]
        assert times["dnn"] < times["lstm"]


class TestMeshWithTrainedModel:
    """Test alert propagation driven by a trained detector."""

    def test_detection_score(self, separable_corpus, trained_dnn, ransomware_row):
        """The chosen ransomware row scores above the default threshold."""
        assert separable_corpus.labels[ransomware_row] == 0
        score = 1.0 - predict(trained_dnn, separable_corpus.features[ransomware_row : ransomware_row + 1])
        assert score[0] >= 0.5

    def test_propagation_over_lossy_bus(self, layout, separable_corpus, trained_dnn, ransomware_row):
        """drop=0.2, retries=10: all four layers escalate in at least 99.9 % of 1000 runs."""
        mesh = build_mesh(MeshConfig(propagation="global"), trained_dnn)
        scenario = parse_scenario(f"0,SCADA:0,row:{ransomware_row}\n")
        resolver = SampleResolver(layout=layout, dataset=separable_corpus)
        reached = 0
        for seed in range(1000):
            bus = BusConfig(drop_probability=0.2, max_retries=10, seed=seed)
            transcript = run_mesh_sim(scenario, mesh, bus, samples=resolver)
            levels = transcript.final_mitigation.values()
            reached += all(level.level >= Mitigation.BACKUP_ON.level for level in levels)
            changes = [e.node for e in transcript.of_type(EventType.MITIGATION)]
            assert len(changes) == len(set(changes))
        assert reached >= 999

    def test_replay(self, layout, separable_corpus, trained_dnn, ransomware_row):
        """Equal seeds replay the transcript bit for bit."""
        mesh = build_mesh(MeshConfig(nodes_per_layer=3), trained_dnn)
        benign_row = int(np.flatnonzero(separable_corpus.labels == 1)[0])
        scenario = parse_scenario(
            f"0,SCADA:1,row:{ransomware_row}\n4,CAEV:2,row:{benign_row}\n"
        )
        resolver = SampleResolver(layout=layout, dataset=separable_corpus)
        bus = BusConfig(drop_probability=0.4, max_retries=4, seed=21)
        first = run_mesh_sim(scenario, mesh, bus, samples=resolver)
        assert first == run_mesh_sim(scenario, mesh, bus, samples=resolver)
        assert len(first.of_type(EventType.INGEST)) == 2
