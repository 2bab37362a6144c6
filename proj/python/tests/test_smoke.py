import math

import numpy as np
import pytest

import relight


def test_closed_forms():
    assert relight.f_ac(0.0) == pytest.approx(0.1)
    assert relight.f_ac(1.0) == pytest.approx(1.1)
    assert relight.f_ac(-1.0) == pytest.approx(0.1 * math.exp(-1.0))
    assert relight.mps(0.9151, 0.0700) == pytest.approx(0.92255)
    assert relight.psnr_from_mse(0.01) == pytest.approx(20.0)
    assert max(relight.planckian_rgb(6500.0)) == pytest.approx(1.0)


def test_light_encoding():
    code = relight.encode_light(pan=0.5, tilt=0.25, temperature=4000.0)
    assert len(code) == 7
    assert code[0] == pytest.approx(math.sin(0.5))
    assert code[3] == pytest.approx(math.cos(0.25))
    with pytest.raises(ValueError):
        relight.encode_light(pan=0.0, tilt=0.0)


def test_render_identity():
    maps = relight.render(scene_seed=3, light_seed=4, resolution=64)
    assert maps["image"].shape == (64, 64, 3)
    assert maps["image"].dtype == np.float32
    product = relight.compose(maps["reflectance"], maps["shading"])
    assert np.array_equal(product, maps["image"])
    assert relight.validate(maps["image"]) == []
    assert relight.psnr(maps["image"], maps["image"]) == 100.0
    assert relight.ssim(maps["image"], maps["image"]) == pytest.approx(1.0)


def test_validate_reports_out_of_range():
    bad = np.full((4, 4, 3), 1.5, dtype=np.float32)
    assert relight.validate(bad, "reflectance")


def test_train_and_relight(tmp_path):
    data = tmp_path / "data"
    code, _, err = relight.run_cli(
        ["gen", "--out", str(data), "--scenes", "2", "--lights", "2", "--resolution", "64"]
    )
    assert code == 0, err
    tiny = [
        "--base-channels", "4", "--bottleneck-channels", "8", "--light-channels", "2",
        "--stage1-shared-blocks", "1", "--stage1-branch-blocks", "1",
        "--stage2-pre-blocks", "1", "--stage2-post-blocks", "1",
        "--image-size", "64", "--disc-channels", "4",
    ]
    run = tmp_path / "run"
    code, out, err = relight.run_cli(
        ["train", "--data", str(data), "--out", str(run), "--steps", "1",
         "--batch-size", "2", "--split", "all", "--quiet"] + tiny
    )
    assert code == 0, err
    model = relight.Relighter(str(run / "checkpoint.rlckpt"))
    assert model.two_stage
    assert model.parameter_count > 0
    image = relight.render(scene_seed=1, light_seed=2, resolution=64)["image"][:48]
    result = model.relight(image, pan=1.0, tilt=0.5, temperature=5000.0, intrinsics=True)
    assert result["relit"].shape == (48, 64, 3)
    assert np.array_equal(relight.compose(result["reflectance"], result["shading"]), result["relit"])
    assert len(result["original_light"]) == 7
    with pytest.raises(ValueError):
        model.relight(image, pan=0.0, tilt=0.2, temperature=100.0)


def test_cli_exit_codes():
    code, _, _ = relight.run_cli(["no-such-command"])
    assert code == 2
    code, _, _ = relight.run_cli(["stats", "--data", "/nonexistent"])
    assert code == 3
