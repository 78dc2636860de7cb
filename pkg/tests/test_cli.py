import json

import pytest

from vchatmod.cli import main
from vchatmod.dataset import read_training_table
from vchatmod.gateway.store import ModerationStore
from vchatmod.pipeline import ModelBundle
from vchatmod.skinmodel import DEFAULT_ALPHA, DEFAULT_BETA

from helpers import build_dataset


@pytest.fixture
def dataset(tmp_path):
    root = tmp_path / "data"
    build_dataset(root, 24, seed=11)
    return root


class TestTrainCommand:
    def test_writes_bundle_and_table(self, dataset, tmp_path, capsys):
        out = tmp_path / "model.json"
        code = main(["train", "--data", str(dataset), "--out", str(out), "--seed", "3"])
        assert code == 0
        assert out.exists()
        bundle = ModelBundle.load(out)
        assert bundle.skc.beta != 0
        rows = read_training_table(out.with_suffix(".training.csv"))
        assert len(rows) == 24
        stdout = capsys.readouterr().out
        assert "alpha=" in stdout and "wald=" in stdout


class TestClassifyCommand:
    def test_prints_verdict_json(self, dataset, tmp_path, capsys):
        out = tmp_path / "model.json"
        main(["train", "--data", str(dataset), "--out", str(out)])
        capsys.readouterr()
        user_dir = sorted(p for p in dataset.iterdir() if p.is_dir())[0]
        frames = [str(user_dir / f"frame_{k}.png") for k in (1, 2, 3)]
        code = main(["classify", "--model", str(out), "--frames", *frames,
                     "--user", "demo"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["user_id"] == "demo"
        assert doc["decision"] in ("normal", "misbehaving", "dark_webcam")
        assert doc["sp"] is not None


class TestEvaluateCommand:
    def test_writes_csv_and_figure(self, dataset, tmp_path):
        model = tmp_path / "model.json"
        main(["train", "--data", str(dataset), "--out", str(model)])
        out = tmp_path / "pr.csv"
        code = main(["evaluate", "--model", str(model), "--data", str(dataset),
                     "--out", str(out), "--theta-steps", "11"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "class,theta,precision,recall"
        assert len(lines) == 1 + 2 * 11
        figure = out.with_suffix(".png")
        assert figure.exists()
        assert figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestCalibrateCommand:
    def test_defaults_plus_corpus_statistics(self, dataset, tmp_path):
        out = tmp_path / "calibrated.json"
        code = main(["calibrate", "--data", str(dataset), "--out", str(out)])
        assert code == 0
        bundle = ModelBundle.load(out)
        assert bundle.skc.alpha == DEFAULT_ALPHA
        assert bundle.skc.beta == DEFAULT_BETA
        assert all(s > 0 for s in bundle.skc.sp_stdev)
        # reliability came from the corpus, not the shipped table
        from vchatmod.evidence import DetectorKind, default_reliability_table
        shipped = default_reliability_table()
        assert bundle.reliability[DetectorKind.FACE] != shipped[DetectorKind.FACE]


class TestRecalibrateCommand:
    def test_insufficient_feedback_fails(self, tmp_path, capsys):
        store_dir = tmp_path / "store"
        ModerationStore(store_dir)
        model = tmp_path / "model.json"
        from vchatmod.pipeline import default_bundle
        default_bundle((0.3, 0.3, 0.3), (0.2, 0.2, 0.2)).save(model)
        code = main(["recalibrate", "--store", str(store_dir), "--out",
                     str(tmp_path / "new.json"), "--model", str(model)])
        assert code == 1
        assert "recalibration failed" in capsys.readouterr().err

    def test_requires_base_bundle(self, tmp_path, capsys):
        store_dir = tmp_path / "store"
        ModerationStore(store_dir)
        code = main(["recalibrate", "--store", str(store_dir),
                     "--out", str(tmp_path / "new.json")])
        assert code == 1
        assert "no base bundle" in capsys.readouterr().err
