import numpy as np
import pytest

from shiftnas.data import (
    Dataset,
    generate_synthetic,
    load_csv,
    save_csv,
    stratified_splits,
)
from shiftnas.errors import DatasetError


class TestSynthetic:
    def test_deterministic_in_seed(self):
        a = generate_synthetic("blobs-easy", seed=3)
        b = generate_synthetic("blobs-easy", seed=3)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        for split in ("train", "val", "test"):
            assert np.array_equal(a.splits[split], b.splits[split])
        c = generate_synthetic("blobs-easy", seed=4)
        assert not np.array_equal(a.features, c.features)

    def test_unknown_preset(self):
        with pytest.raises(DatasetError, match="unknown synthetic preset"):
            generate_synthetic("spirals", seed=0)

    @pytest.mark.parametrize("preset", ["blobs-easy", "blobs-hard", "rings"])
    def test_splits_cover_and_classes_present(self, preset):
        ds = generate_synthetic(preset, seed=11)
        n = len(ds.labels)
        joined = np.concatenate([ds.splits[s] for s in ("train", "val", "test")])
        assert len(joined) == n and len(np.unique(joined)) == n
        for split in ("train", "val"):
            assert set(ds.labels[ds.splits[split]].tolist()) == set(range(ds.num_classes))

    def test_dims(self):
        easy = generate_synthetic("blobs-easy", seed=0)
        assert easy.input_dim == 16 and easy.num_classes == 10
        ring = generate_synthetic("rings", seed=0)
        assert ring.input_dim == 16 and ring.num_classes == 4


class TestStratifiedSplits:
    def test_rare_class_still_covered(self):
        labels = np.array([0] * 50 + [1] * 3)
        splits = stratified_splits(labels, np.random.default_rng(0))
        assert 1 in labels[splits["train"]]
        assert 1 in labels[splits["val"]]

    def test_single_example_class_rejected(self):
        labels = np.array([0] * 10 + [1])
        with pytest.raises(DatasetError, match="cannot cover"):
            stratified_splits(labels, np.random.default_rng(0))


class TestCsv:
    def _toy(self):
        features = np.array([[0.5, -1.25], [3.5, 2.0], [1.0, 0.001],
                             [0.1, 0.2], [2.0, -0.5], [0.7, 0.8]])
        labels = np.array([0, 1, 0, 1, 0, 1])
        splits = {
            "train": np.array([0, 1, 2, 3]),
            "val": np.array([4, 5]),
            "test": np.array([], dtype=int),
        }
        return Dataset("toy", features, labels, splits, num_classes=2)

    def test_round_trip_lossless(self, tmp_path):
        ds = self._toy()
        path = tmp_path / "toy.csv"
        save_csv(ds, path)
        back = load_csv(path)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)
        for split in ("train", "val", "test"):
            assert np.array_equal(back.splits[split], ds.splits[split])

    def test_float_repr_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        features = rng.normal(size=(8, 3))
        labels = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        ds = Dataset(
            "r",
            features,
            labels,
            {
                "train": np.arange(4),
                "val": np.arange(4, 8),
                "test": np.array([], dtype=int),
            },
            2,
        )
        path = tmp_path / "r.csv"
        save_csv(ds, path)
        assert np.array_equal(load_csv(path).features, features)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0,0\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="line 1"):
            load_csv(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n1.0,2.0,0\n1.0,oops,1\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="line 3"):
            load_csv(path)

    def test_wrong_cell_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n1.0,2.0,0\n1.0,1\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="line 3"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DatasetError, match="empty"):
            load_csv(path)

    def test_noncontiguous_labels_remapped(self, tmp_path):
        path = tmp_path / "remap.csv"
        rows = ["f0,label"]
        for i, lbl in enumerate([0, 2, 5] * 4):
            rows.append(f"{float(i)},{lbl}")
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        ds = load_csv(path, seed=1)
        assert set(ds.labels.tolist()) == {0, 1, 2}
        assert ds.meta["label_map"] == {"0": 0, "2": 1, "5": 2}
        assert ds.meta["warnings"]

    def test_default_split_is_seeded(self, tmp_path):
        path = tmp_path / "s.csv"
        rows = ["f0,label"] + [f"{float(i)},{i % 2}" for i in range(40)]
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        a = load_csv(path, seed=3)
        b = load_csv(path, seed=3)
        c = load_csv(path, seed=4)
        assert np.array_equal(a.splits["train"], b.splits["train"])
        assert not np.array_equal(a.splits["train"], c.splits["train"])

    def test_negative_label_rejected(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text("f0,label\n1.0,-1\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="negative"):
            load_csv(path)
