import numpy as np
import pytest

from pksvd.cli import main, resolve_config
from pksvd.errors import ConfigError
from pksvd.formats import load_codes, load_dictionary
from pksvd.imaging import read_pgm, write_pgm


@pytest.fixture(scope="module")
def train_image(tmp_path_factory):
    rng = np.random.default_rng(0)
    yy, xx = np.mgrid[0:64, 0:64].astype(float)
    img = 120 + 50 * np.sin(0.5 * xx) * np.cos(0.3 * yy) + 25 * (xx > 32)
    img = np.clip(np.round(img + rng.normal(0, 2, img.shape)), 0, 255)
    path = tmp_path_factory.mktemp("data") / "train.pgm"
    write_pgm(img, path)
    return path


CFG = ["--block_size", "4", "--m", "24", "--k", "3", "--ksvd_iters", "4",
       "--max_iters", "4", "--x_sweeps", "4"]


class TestConfig:
    def test_defaults(self):
        import argparse
        cfg = resolve_config(argparse.Namespace(config=None))
        assert cfg["block_size"] == 8 and cfg["n"] == 64
        assert cfg["rho2"] == pytest.approx(1e11)

    def test_file_and_flag_merge(self, tmp_path):
        import argparse
        cfile = tmp_path / "run.cfg"
        cfile.write_text("block_size = 4\nm = 20  # inline comment\nseed = 7\n")
        args = argparse.Namespace(config=str(cfile), m=24)
        cfg = resolve_config(args)
        assert cfg["block_size"] == 4
        assert cfg["n"] == 16  # derived from block_size
        assert cfg["m"] == 24  # flag beats file
        assert cfg["seed"] == 7

    def test_unknown_key_rejected(self, tmp_path):
        import argparse
        cfile = tmp_path / "run.cfg"
        cfile.write_text("sparsity = 3\n")
        with pytest.raises(ConfigError):
            resolve_config(argparse.Namespace(config=str(cfile)))

    def test_inconsistent_n_rejected(self, tmp_path):
        import argparse
        with pytest.raises(ConfigError):
            resolve_config(argparse.Namespace(config=None, block_size=4, n=64))


class TestTrain:
    def test_ksvd_writes_only_synthesis(self, train_image, tmp_path):
        out = tmp_path / "k.pk"
        code = main(["train", str(train_image), "--method", "ksvd",
                     "--out", str(out), *CFG])
        assert code == 0
        d = load_dictionary(out)
        assert d.mat.shape == (16, 24)
        assert not (tmp_path / "k.dual.pk").exists()

    def test_parseval_writes_pair_trace_codes(self, train_image, tmp_path):
        out = tmp_path / "p.pk"
        trace = tmp_path / "trace.csv"
        codes = tmp_path / "x.pkx"
        code = main(["train", str(train_image), "--method", "parseval",
                     "--out", str(out), "--trace", str(trace),
                     "--out-codes", str(codes), *CFG])
        assert code == 0
        synth = load_dictionary(out)
        dual = load_dictionary(tmp_path / "p.dual.pk")
        assert synth.mat.shape == dual.mat.shape == (16, 24)
        lines = trace.read_text().strip().split("\n")
        assert len(lines) == 1 + 4  # header + max_iters rows
        assert load_codes(codes).shape[0] == 24

    def test_deterministic_outputs(self, train_image, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{tag}.pk"
            trace = tmp_path / f"{tag}.csv"
            assert main(["train", str(train_image), "--method", "parseval",
                         "--out", str(out), "--trace", str(trace), *CFG]) == 0
            outs.append((out.read_bytes(),
                         (tmp_path / f"{tag}.dual.pk").read_bytes(),
                         trace.read_bytes()))
        assert outs[0] == outs[1]

    def test_missing_image_fails(self, tmp_path):
        code = main(["train", str(tmp_path / "none.pgm"), "--method", "ksvd",
                     "--out", str(tmp_path / "o.pk"), *CFG])
        assert code != 0


@pytest.fixture(scope="module")
def trained(train_image, tmp_path_factory):
    # converged pair: enough iterations for the constraints to bind tightly
    base = tmp_path_factory.mktemp("dicts")
    out = base / "p.pk"
    args = CFG.copy()
    args[args.index("--max_iters") + 1] = "40"
    assert main(["train", str(train_image), "--method", "parseval",
                 "--out", str(out), *args]) == 0
    return {"synth": out, "dual": base / "p.dual.pk", "image": train_image}


class TestVerify:
    def test_identity_dictionary(self, tmp_path, capsys):
        from pksvd.formats import save_dictionary
        from pksvd.frames import Dictionary

        path = tmp_path / "i.pk"
        save_dictionary(Dictionary(np.eye(4)), path)
        assert main(["verify", str(path)]) == 0
        text = capsys.readouterr().out
        assert "A=1" in text and "B=1" in text

    def test_trained_pair(self, trained, capsys):
        assert main(["verify", str(trained["synth"]), str(trained["dual"])]) == 0
        text = capsys.readouterr().out
        assert "pair residuals" in text

    def test_mismatched_shapes_rejected(self, trained, tmp_path, capsys):
        from pksvd.formats import save_dictionary
        from pksvd.frames import Dictionary

        other = tmp_path / "o.pk"
        save_dictionary(Dictionary(np.eye(4)), other)
        assert main(["verify", str(trained["synth"]), str(other)]) != 0

    def test_malformed_file(self, tmp_path):
        bad = tmp_path / "bad.pk"
        bad.write_bytes(b"garbage")
        assert main(["verify", str(bad)]) != 0


class TestReconstruct:
    def test_roundtrip_high_psnr(self, trained, tmp_path, capsys):
        out = tmp_path / "rec.pgm"
        code = main(["reconstruct", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--dual", str(trained["dual"]),
                     "--out", str(out), "--block_size", "4"])
        assert code == 0
        text = capsys.readouterr().out
        psnr_value = float(text.split("psnr:")[1].split("dB")[0])
        assert psnr_value > 80.0
        assert out.exists()


class TestDenoise:
    def test_sigma_zero_tiny_eps(self, trained, tmp_path, capsys):
        prefix = tmp_path / "dn"
        code = main(["denoise", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--dual", str(trained["dual"]),
                     "--sigma", "0", "--eps", "0.01",
                     "--out-prefix", str(prefix), "--block_size", "4"])
        assert code == 0
        assert float(capsys.readouterr().out.split("denoised")[1].split("dB")[0]) >= 100.0
        csv_lines = (tmp_path / "dn.csv").read_text().strip().split("\n")
        assert csv_lines[0] == "image,sigma_or_fraction,dictionary,psnr,ssim,eps_used"
        assert len(csv_lines) == 2

    def test_denoise_improves_noisy_image(self, trained, tmp_path):
        prefix = tmp_path / "dn2"
        code = main(["denoise", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--dual", str(trained["dual"]),
                     "--sigma", "15", "--eps", "8,16,24",
                     "--out-prefix", str(prefix), "--block_size", "4"])
        assert code == 0
        row = (tmp_path / "dn2.csv").read_text().strip().split("\n")[1].split(",")
        original = read_pgm(trained["image"])
        from pksvd.applications import add_gaussian_noise
        from pksvd.imaging import psnr

        noisy_psnr = psnr(original, add_gaussian_noise(original, 15, 0))
        assert float(row[3]) > noisy_psnr

    def test_byte_identical_reruns(self, trained, tmp_path):
        blobs = []
        for tag in ("x", "y"):
            prefix = tmp_path / tag
            assert main(["denoise", str(trained["image"]),
                         "--dict", str(trained["synth"]),
                         "--dual", str(trained["dual"]),
                         "--sigma", "10", "--eps", "8,16",
                         "--seed", "3",
                         "--out-prefix", str(prefix), "--block_size", "4"]) == 0
            blobs.append((tmp_path / f"{tag}.pgm").read_bytes()
                         + (tmp_path / f"{tag}.csv").read_bytes())
        assert blobs[0] == blobs[1]


class TestInpaint:
    def test_fraction_zero_identity(self, trained, tmp_path):
        prefix = tmp_path / "ip"
        code = main(["inpaint", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--fraction", "0", "--eps", "0.01",
                     "--out-prefix", str(prefix), "--block_size", "4"])
        assert code == 0
        original = read_pgm(trained["image"])
        restored = read_pgm(tmp_path / "ip.pgm")
        assert np.abs(restored - original).max() <= 1.0

    def test_metrics_row(self, trained, tmp_path):
        prefix = tmp_path / "ip2"
        code = main(["inpaint", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--fraction", "0.3",
                     "--out-prefix", str(prefix), "--block_size", "4"])
        assert code == 0
        lines = (tmp_path / "ip2.csv").read_text().strip().split("\n")
        row = lines[1].split(",")
        assert row[1] == "0.3"
        assert float(row[3]) > 15.0
        assert (tmp_path / "ip2.corrupted.pgm").exists()


class TestCompress:
    def test_one_point_per_step(self, trained, tmp_path):
        prefix = tmp_path / "rd"
        code = main(["compress", str(trained["image"]),
                     "--dict", str(trained["synth"]),
                     "--dual", str(trained["dual"]),
                     "--steps", "1,4,16",
                     "--out-prefix", str(prefix), "--block_size", "4"])
        assert code == 0
        lines = (tmp_path / "rd.csv").read_text().strip().split("\n")
        assert lines[0] == "quant_step,bpp,psnr"
        assert len(lines) == 4


class TestTheory:
    def test_runs_and_reports(self, tmp_path, capsys):
        out = tmp_path / "theory.csv"
        code = main(["theory", "--trials", "10", "--seed", "1",
                     "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "optimal proxy" in text
        assert "ruled out" in text
        assert out.exists()
