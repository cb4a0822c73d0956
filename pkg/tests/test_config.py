import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdlab.config import PRESETS, ConfigError, ExperimentConfig


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_roundtrip(name):
    cfg = PRESETS[name]()
    assert ExperimentConfig.from_toml(cfg.to_toml()) == cfg


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 30), min_size=1, max_size=4), st.lists(st.floats(1, 1e4), min_size=1, max_size=3),
       st.integers(1, 500), st.integers(0, 2**64 - 1), st.sampled_from(["derived", "paper"]))
def test_roundtrip_property(x0, levels, n_seeds, seed, channel):
    cfg = PRESETS["additive"](n_seeds=n_seeds, seed=seed)
    cfg.run.x0, cfg.run.levels, cfg.schedule.channel = x0, levels, channel
    assert ExperimentConfig.from_toml(cfg.to_toml()) == cfg


def test_unknown_key():
    with pytest.raises(ConfigError, match=r"\[oracle\]"):
        ExperimentConfig.from_toml('[oracle]\nkind = "exact"\nbogus = 1\n')


def test_unknown_section():
    with pytest.raises(ConfigError, match="section"):
        ExperimentConfig.from_toml("[extra]\na = 1\n")


def test_syntax_error_has_line():
    with pytest.raises(ConfigError, match="line 2"):
        ExperimentConfig.from_toml('[run]\nx0 = = 1\n')


@pytest.mark.parametrize("text", ['[run]\nn_seeds = "ten"\n', '[run]\nx0 = ["a"]\n', '[oracle]\nkind = "cauchy"\n',
                                  '[schedule]\nrule = "constant"\n', "[run]\nk_max = 0\n", '[run]\nseed = -1\n'])
def test_invalid_values(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(text)


def test_build_noise_level_rule():
    f, o, s = PRESETS["multiplicative"]().build(1000.0)
    assert o.b == 1000.0 and s.stepsize(0) == pytest.approx(5e-4)


def test_build_sigma_level():
    f, o, s = PRESETS["value-dependent"]().build(100.0, "paper")
    assert (o.sigma, o.b, o.alpha_ref) == (100.0, 10.0, 0.05)
    assert s.channel == "paper" and s.stepsize(3) == 0.05


def test_shipped_files_match_presets():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for name, make in PRESETS.items():
        assert ExperimentConfig.read(root / f"{name}.toml") == make()
