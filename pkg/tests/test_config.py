import pytest

from nvgd.config import ConfigError, parse_config, parse_config_text, resolved_text

MINIMAL_FUNNEL = """
[experiment]
name = funnel
method = nvgd
output_dir = runs/out
"""


def test_minimal_funnel_resolves_defaults():
    cfg = parse_config_text(MINIMAL_FUNNEL)
    assert cfg.n_particles == 100
    assert cfg.dim == 2
    assert cfg.nvgd.hidden == (32, 32)
    assert cfg.seeds == (0,)
    assert cfg.svgd.bandwidth is None  # median heuristic


def test_resolved_text_roundtrips():
    cfg = parse_config_text(MINIMAL_FUNNEL)
    again = parse_config_text(resolved_text(cfg))
    assert again == cfg


def test_negative_step_rejected():
    bad = MINIMAL_FUNNEL + "\n[ula]\nstep_size = -0.1\n"
    with pytest.raises(ConfigError, match="step_size"):
        parse_config_text(bad)


def test_unknown_key_suggests_correction():
    bad = MINIMAL_FUNNEL + "\n[svgd]\nstepsize = 0.2\n"
    with pytest.raises(ConfigError, match=r"stepsize.*step_size"):
        parse_config_text(bad)


def test_unknown_key_reports_line_number():
    bad = "[experiment]\nname = funnel\nmethod = svgd\noutput_dir = o\nbogus_key = 1\n"
    with pytest.raises(ConfigError, match="line 5"):
        parse_config_text(bad)


def test_type_mismatch_reports_key_and_line():
    bad = "[experiment]\nname = funnel\nmethod = svgd\noutput_dir = o\nn_particles = many\n"
    with pytest.raises(ConfigError, match=r"line 5.*n_particles.*int"):
        parse_config_text(bad)


def test_unknown_method_and_experiment():
    with pytest.raises(ConfigError, match="method"):
        parse_config_text("[experiment]\nname = funnel\nmethod = hmc\noutput_dir = o\n")
    with pytest.raises(ConfigError, match="experiment"):
        parse_config_text("[experiment]\nname = mystery\nmethod = svgd\noutput_dir = o\n")


def test_sgld_alias_maps_to_parallel_langevin():
    cfg = parse_config_text("[experiment]\nname = funnel\nmethod = sgld\noutput_dir = o\n")
    assert cfg.method == "ula_parallel"


def test_empty_seed_list_rejected():
    bad = MINIMAL_FUNNEL.replace("method = nvgd", "method = nvgd\nseeds =")
    with pytest.raises(ConfigError, match="seed"):
        parse_config_text(bad)


def test_duplicate_key_rejected():
    bad = MINIMAL_FUNNEL + "\n[target]\ndim = 2\ndim = 3\n"
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text(bad)


def test_covertype_requires_dataset_path():
    text = "[experiment]\nname = covertype\nmethod = svgd\noutput_dir = o\n"
    with pytest.raises(ConfigError, match="dataset_path"):
        parse_config_text(text)


def test_key_outside_section_rejected():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("name = funnel\n")


def test_missing_file_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.ini")
