import pytest

from homoclinic.cli import PRESETS, preset_text
from homoclinic.config import ConfigError, dump_config, parse_config
from homoclinic.nonlinearity import CustomFamily, ZeroFamily

DECAY = """# homoclinic-config v1
[problem]
exponent = constant(2)
a = constant(1)
b = abs_fix1

[family]
id = decay
q = 2
"""


def issues(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value.issues


@pytest.mark.parametrize("name", PRESETS)
def test_presets_parse_and_round_trip(name):
    cfg = parse_config(preset_text(name))
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


def test_decay_preset_contents():
    cfg = parse_config(preset_text("decay"))
    assert cfg.solver.window_halfwidth == 40
    assert cfg.family.id == "decay" and cfg.family.q == 2
    assert cfg.problem.b == "abs_fix1"
    assert list(cfg.rungs()) == [1, 2, 3]


def test_bad_q_names_the_inequality():
    found = issues(DECAY.replace("q = 2", "q = 1.4"))
    assert any("(p+ + 1)/p- < q" in i.reason for i in found)
    assert all(i.line is not None for i in found)


def test_empty_file():
    assert any("missing problem block" in i.reason for i in issues(""))


def test_missing_family():
    text = DECAY.split("[family]")[0]
    assert any("missing family block" in i.reason for i in issues(text))


def test_unknown_key_is_located():
    found = issues(DECAY + "colour = blue\n")
    bad = [i for i in found if i.field.endswith("colour")]
    assert bad and bad[0].line == DECAY.count("\n") + 1


def test_unknown_section():
    assert any("extra" in i.field for i in issues(DECAY + "[extra]\nx = 1\n"))


def test_exponent_bounds_must_match():
    found = issues(DECAY + "pminus = 3\n")
    assert any("pminus" in i.field for i in found)


def test_k0_only_for_single_site():
    assert issues(DECAY + "k0 = 2\n")


def test_custom_family():
    text = DECAY.replace("id = decay\nq = 2", "id = custom\nsite.3 = 0.1:0, 0.2:1, 0.3:0")
    cfg = parse_config(text)
    fam = cfg.build_family()
    assert isinstance(fam, CustomFamily)
    assert fam.f(3, 0.2) == 1.0
    assert parse_config(dump_config(cfg)) == cfg


def test_zero_family_and_vector():
    text = DECAY.replace("id = decay\nq = 2", "id = zero") + "\n[run]\nvector = 0:1, 2:-0.5\n"
    cfg = parse_config(text)
    assert isinstance(cfg.build_family(), ZeroFamily)
    v = cfg.vector()
    assert (v[0], v[1], v[2]) == (1.0, 0.0, -0.5)


def test_bad_values_are_reported():
    assert issues(DECAY + "\n[solver]\nK = many\n")
    assert issues(DECAY + "\n[run]\nrungs = 3..1\n")
    assert issues(DECAY + "\n[run]\ndirection = sideways\n")
    assert issues(DECAY.replace("abs_fix1", "abs_plus(0)"))
