import json

import numpy as np
import pytest

from svdeconv.cli import main
from svdeconv.dataio import read_dataset, read_image, read_manifest

SMALL_RUN = [
    "--iterations", "2", "--tiles", "2", "2", "--support-radius", "5",
    "--apod-width", "300", "--apod-width-delta", "100", "--epsilon", "1e-4",
]


def simulate_small(outdir, seed=1):
    assert main([
        "simulate", "--out", str(outdir), "--size", "48", "--frames", "4",
        "--sigma", "1e-4", "--seed", str(seed), "--psf-radius", "4",
        "--psf-sigma", "0.9", "1.6", "--shift", "0.5", "2.0",
    ]) == 0


class TestSimulate:
    def test_writes_dataset(self, tmp_path):
        simulate_small(tmp_path / "ds")
        frames, truth, info = read_dataset(tmp_path / "ds")
        assert frames.shape == (4, 48, 48)
        assert truth.shape == (48, 48)
        assert info["dataset"]["sigma"] == 1e-4
        assert len(info["frames"]) == 4

    def test_reproducible_from_seed(self, tmp_path):
        simulate_small(tmp_path / "a", seed=7)
        simulate_small(tmp_path / "b", seed=7)
        for name in ["ground_truth.png"] + [f"frame_{i:03d}.png" for i in range(4)]:
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, name

    def test_validation_before_writing(self, tmp_path):
        out = tmp_path / "nope"
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--out", str(out), "--frames", "0", "--sigma", "-1"])
        assert exc.value.code == 2
        assert not out.exists()


class TestDeconvolve:
    def test_run_writes_outputs_and_manifest(self, tmp_path):
        simulate_small(tmp_path / "ds")
        out = tmp_path / "run"
        assert main([
            "deconvolve", "--dataset", str(tmp_path / "ds"), "--out", str(out),
            "--quiet", *SMALL_RUN,
        ]) == 0
        assert (out / "object.npy").exists()
        assert (out / "object.png").exists()
        assert (out / "diagnostics.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["iterations"] == 2
        assert len(manifest["inputs"]) == 4
        obj = np.load(out / "object.npy")
        assert obj.sum() == pytest.approx(1.0, abs=1e-10)
        # one PSF montage per frame
        assert len(list(out.glob("psfs_frame_*.png"))) == 4

    def test_manifest_replay_is_byte_identical(self, tmp_path):
        simulate_small(tmp_path / "ds")
        first = tmp_path / "first"
        main(["deconvolve", "--dataset", str(tmp_path / "ds"), "--out", str(first),
              "--quiet", *SMALL_RUN])
        replay = tmp_path / "replay"
        assert main([
            "deconvolve", "--from-manifest", str(first / "manifest.json"),
            "--out", str(replay), "--threads", "3", "--quiet",
        ]) == 0
        assert (first / "object.npy").read_bytes() == (replay / "object.npy").read_bytes()
        assert (first / "object.png").read_bytes() == (replay / "object.png").read_bytes()

    def test_exhaustive_validation_before_any_output(self, tmp_path):
        simulate_small(tmp_path / "ds")
        out = tmp_path / "bad"
        with pytest.raises(SystemExit) as exc:
            main([
                "deconvolve", "--dataset", str(tmp_path / "ds"), "--out", str(out),
                "--iterations", "0", "--epsilon", "0", "--tiles", "1", "2",
            ])
        assert exc.value.code == 2
        assert not out.exists()

    def test_requires_input_source(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["deconvolve", "--out", str(tmp_path / "x")])

    def test_online_window_mode(self, tmp_path):
        simulate_small(tmp_path / "ds")
        out = tmp_path / "online"
        assert main([
            "deconvolve", "--dataset", str(tmp_path / "ds"), "--out", str(out),
            "--quiet", "--window", "3", *SMALL_RUN, "--iterations", "1",
        ]) == 0
        assert (out / "object.npy").exists()


class TestEvaluate:
    def test_writes_frc_csv_and_prints_metrics(self, tmp_path, capsys):
        simulate_small(tmp_path / "ds")
        out = tmp_path / "run"
        main(["deconvolve", "--dataset", str(tmp_path / "ds"), "--out", str(out),
              "--quiet", *SMALL_RUN])
        ev = tmp_path / "eval"
        assert main([
            "evaluate", "--estimate", str(out / "object.npy"),
            "--truth", str(tmp_path / "ds" / "ground_truth.png"),
            "--out", str(ev),
        ]) == 0
        printed = capsys.readouterr().out
        assert "rn_max:" in printed
        assert "ssim:" in printed
        header = (ev / "frc.csv").read_text().splitlines()[0]
        assert header == "ring,n_r,frc,threshold"

    def test_shape_mismatch_rejected(self, tmp_path):
        np.save(tmp_path / "a.npy", np.ones((8, 8)))
        np.save(tmp_path / "b.npy", np.ones((9, 9)))
        with pytest.raises(SystemExit):
            main(["evaluate", "--estimate", str(tmp_path / "a.npy"),
                  "--truth", str(tmp_path / "b.npy"), "--out", str(tmp_path / "e")])


class TestSweep:
    def test_noise_axis_csv(self, tmp_path):
        out = tmp_path / "sweep"
        assert main([
            "sweep", "--axis", "noise", "--out", str(out), "--size", "48",
            "--frames", "3", "--reps", "1", "--sigmas", "1e-4", "1e-2",
            *SMALL_RUN,
        ]) == 0
        rows = (out / "noise_sweep.csv").read_text().splitlines()
        assert rows[0] == "sigma,rep,seed,ssim,rel_l2"
        assert len(rows) == 3

    def test_tiles_axis_csv(self, tmp_path):
        out = tmp_path / "tsweep"
        assert main([
            "sweep", "--axis", "tiles", "--out", str(out), "--size", "48",
            "--frames", "3", "--reps", "1", "--sigmas", "1e-4",
            "--tile-counts", "2", "3", *SMALL_RUN,
        ]) == 0
        rows = (out / "tile_sweep.csv").read_text().splitlines()
        assert rows[0] == "tiles,pq,efficiency,rn_max,rel_l2"
        assert len(rows) == 3

    def test_bad_axis_flags(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--axis", "noise", "--out", str(tmp_path / "x"),
                  "--reps", "0"])


class TestDataIo:
    def test_png16_round_trip(self, tmp_path):
        from svdeconv.dataio import write_png16

        rng = np.random.default_rng(0)
        img = rng.random((16, 16))
        write_png16(tmp_path / "x.png", img)
        back = read_image(tmp_path / "x.png")
        assert np.abs(back - img).max() <= 0.5 / 65535 + 1e-12

    def test_manifest_reader(self, tmp_path):
        simulate_small(tmp_path / "ds")
        info = read_manifest(tmp_path / "ds")
        assert info["dataset"]["record"] == "dataset"
        assert [f["index"] for f in info["frames"]] == [0, 1, 2, 3]
