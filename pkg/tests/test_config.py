import pytest

from orientkit.config import ConfigError, RunConfig, load_config
from orientkit.objective import ObjectiveKind


def test_defaults_validate():
    cfg = load_config()
    assert cfg == RunConfig()
    t = cfg.train_config()
    assert (t.lr_backbone, t.lr_heads, t.batch_size, t.steps) == (1e-3, 1e-3, 64, 3000)
    assert (t.sigma_polar, t.sigma_azimuth, t.sigma_rotation, t.lam) == (2.0, 20.0, 1.0, 1.0)
    assert cfg.dataset_config().views_per_object == 40


def test_file_then_flags(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("seed: 4\nsteps: 100\nobjective: regression\nhidden: [32, 16]\ncrop_augment: false\n")
    cfg = load_config(p, {"steps": 7, "seed": None})
    assert cfg.seed == 4 and cfg.steps == 7
    assert cfg.hidden_widths() == (32, 16)
    t = cfg.train_config(24, 24)
    assert t.objective is ObjectiveKind.DirectRegression and not t.crop_augment
    assert t.arch.hidden == (32, 16) and t.arch.height == 24


@pytest.mark.parametrize(
    "text",
    [
        "unknown_key: 1\n",
        "objects: 0\n",
        "objective: ranking\n",
        "theta_min: 100\ntheta_max: 20\n",
        "steps: 1.5\n",
        "crop_augment: maybe\n",
        "hidden: 1,2,3\n",
        "size: 49\n",
        "nested: {a: 1}\n",
        "- just\n- a list\n",
        "steps: [1\n",
    ],
)
def test_bad_files(tmp_path, text):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.yaml")


def test_unknown_override():
    with pytest.raises(ConfigError):
        load_config(None, {"colour": "red"})
