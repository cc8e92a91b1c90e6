import json
from pathlib import Path

import numpy as np
import pytest

import specwalk as sw
from specwalk.cli import main
from specwalk.images import write_rawj


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    ph = sw.make_phantom("blobs2d", (12, 10), rng_seed=1, noise_sigma=0.05,
                         num_regions=2)
    sw.save_image(ph.image, tmp_path / "img")
    seeds = sw.sample_region_seeds(ph.labels.labels, 2, 3,
                                   np.random.default_rng(0))
    seeds_json = [{"index": int(i), "label": int(l)}
                  for i, l in zip(seeds.seed_indices, seeds.seed_labels)]
    (tmp_path / "seeds.json").write_text(json.dumps(seeds_json))
    return tmp_path, ph


def test_precompute_multiple_betas(workdir, capsys):
    tmp_path, _ = workdir
    code = main(["precompute", str(tmp_path / "img.json"),
                 "--beta", "10", "--beta", "20", "--m", "24"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    for line in lines:
        assert Path(line).exists()
        pack = sw.load_pack(line)
        assert pack.m == 24


def test_segment_flow(workdir, capsys):
    tmp_path, ph = workdir
    assert main(["precompute", str(tmp_path / "img.json"),
                 "--beta", "15", "--m", "32"]) == 0
    pack_path = capsys.readouterr().out.strip()
    code = main(["segment", str(tmp_path / "img.json"), pack_path,
                 str(tmp_path / "seeds.json"), "--gamma", "0",
                 "--adaptive", "--out-prefix", str(tmp_path / "seg")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["m_use"] >= 2 and report["refreshed"] is False
    labels = sw.load_labels(tmp_path / "seg_labels.json")
    assert labels.dims == (12, 10)
    _, dsc = sw.dice(labels, ph.labels, 2)
    assert dsc > 0.7


def test_segment_beta_online_refresh(workdir, capsys):
    tmp_path, _ = workdir
    assert main(["precompute", str(tmp_path / "img.json"),
                 "--beta", "10", "--beta", "30", "--m", "24"]) == 0
    packs = capsys.readouterr().out.split()
    code = main(["segment", str(tmp_path / "img.json"), *packs,
                 str(tmp_path / "seeds.json"), "--beta-online", "25",
                 "--out-prefix", str(tmp_path / "seg")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["refreshed"] is True
    assert report["base_beta"] == 30.0


def test_segment_missing_pack_exit2(workdir, capsys):
    tmp_path, _ = workdir
    code = main(["segment", str(tmp_path / "img.json"),
                 str(tmp_path / "nope.rwpk"), str(tmp_path / "seeds.json")])
    assert code == 2
    assert "nope.rwpk" in capsys.readouterr().err


def test_usage_error_exit1(capsys):
    with pytest.raises(SystemExit) as err:
        main(["precompute"])            # missing required args
    assert err.value.code == 1


def test_register_flow(workdir, capsys, tmp_path):
    ph = sw.make_phantom("shifted_pair", (12, 12), rng_seed=3,
                         noise_sigma=0.02, shift=(1, 0))
    sw.save_image(ph.image, tmp_path / "fixed")
    sw.save_image(ph.moving, tmp_path / "moving")
    sw.save_labels(ph.moving_labels, tmp_path / "mlabels")
    code = main(["register", str(tmp_path / "fixed.json"),
                 str(tmp_path / "moving.json"),
                 "--grid-extent", "3", "3", "--patch-radius", "1",
                 "--moving-labels", str(tmp_path / "mlabels.json"),
                 "--out-prefix", str(tmp_path / "reg")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["method"] == "basic"
    assert Path(report["field"]).exists()
    warped = sw.load_labels(report["warped_labels"])
    assert sw.mean_overlap(warped, ph.labels, 2) > 0.6


def test_bench_flow(workdir, capsys, tmp_path):
    cfg = {
        "task": "segment", "record_times": False, "master_seed": 1,
        "phantoms": [{"kind": "blobs2d", "dims": [10, 10], "rng_seed": 0,
                      "noise_sigma": 0.05, "num_regions": 2}],
        "methods": ["basic", "fast"], "m_values": [16], "pack_m": 16,
        "betas": [15.0], "gamma": 0.0, "seeds_per_region": 3,
        "repetitions": 1,
    }
    (tmp_path / "suite.json").write_text(json.dumps(cfg))
    code = main(["bench", str(tmp_path / "suite.json"),
                 "--out", str(tmp_path / "out.csv")])
    assert code == 0
    text = (tmp_path / "out.csv").read_text()
    from specwalk.bench import BenchReport
    assert len(BenchReport.from_csv(text).rows) == 2
