import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from misblowup.config import SCHEMA, ConfigError, parse_config, parse_config_text

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
[eos]
family = ideal_gas
gamma_ad = 2
m = 1

[background]
rho_bar = 1
n_bar = 0.5
"""


def errors_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    return info.value.errors


def test_minimal_config_takes_documented_defaults():
    cfg = parse_config_text(MINIMAL)
    for section, keys in SCHEMA.items():
        for key, spec in keys.items():
            if section == "background":
                continue
            got = cfg.get(section, key)
            if isinstance(spec.default, float) and math.isnan(spec.default):
                assert math.isnan(got)
            else:
                assert got == spec.default, (section, key)
    cset = cfg.constitutive_set()
    assert cset.zeta.identically_zero
    assert float(cset.tau0(1.0, 1.0)) == 1.0
    assert cfg.shell_data().width == pytest.approx(0.005)


def test_negative_sigma_is_a_range_error():
    errs = errors_of(MINIMAL + "\n[data]\nsigma = -1\n")
    assert len(errs) == 1
    assert "sigma" in errs[0] and "line 12" in errs[0]


def test_misspelled_key_gets_a_suggestion():
    errs = errors_of(MINIMAL.replace("gamma_ad = 2", "gamma_adx = 2"))
    assert any("gamma_adx" in e and "did you mean 'gamma_ad'" in e for e in errs)


def test_all_errors_reported_with_line_numbers():
    text = "[eos]\nfamily = ideal_gaz\n[grid]\nN = lots\ncfl = 2\n"
    errs = errors_of(text)
    assert any("line 2" in e and "ideal_gas" in e for e in errs)
    assert any("line 4" in e and "N" in e for e in errs)
    assert any("line 5" in e and "cfl" in e for e in errs)
    assert any("missing required section [background]" in e for e in errs)


def test_repeated_keys_and_sections_rejected():
    errs = errors_of(MINIMAL + "\n[background]\nrho_bar = 2\n")
    assert any("repeated" in e for e in errs)
    errs = errors_of(MINIMAL.replace("m = 1", "m = 1\nm = 2"))
    assert any("repeated" in e for e in errs)


def test_unknown_section_rejected():
    errs = errors_of(MINIMAL + "\n[grdi]\nN = 10\n")
    assert any("[grdi]" in e and "grid" in e for e in errs)


def test_transport_family_parameters():
    cfg = parse_config_text(MINIMAL + "\n[transport]\nzeta = n_exp\nzeta_coef = 2\nlambda = saturating\n"
                            "lambda_coef = 0.1\nlambda_slope = 1\n")
    cset = cfg.constitutive_set()
    assert float(cset.zeta(0.0, 1.0)) == pytest.approx(2 * math.exp(-1))
    assert float(cset.lam(0.0, 1.0)) == pytest.approx(0.1)


def test_missing_family_parameter_reported():
    errs = errors_of(MINIMAL + "\n[transport]\nlambda = saturating\nlambda_coef = 0.1\n")
    assert any("lambda_slope" in e for e in errs)


def test_table_path_resolves_next_to_config(tmp_path):
    (tmp_path / "p.txt").write_text("0 0\n1 0.3\n2 0.6\n")
    cfg_path = tmp_path / "t.cfg"
    cfg_path.write_text(MINIMAL.replace("family = ideal_gas\ngamma_ad = 2\nm = 1",
                                        "family = table\npath = p.txt"))
    cset = parse_config(cfg_path).constitutive_set()
    assert float(cset.p(1.5, 1.0)) == pytest.approx(0.45)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


@pytest.mark.parametrize("name", ["shell.cfg", "minimal.cfg", "flowline.cfg"])
def test_shipped_configs_load(name):
    parse_config(CONFIGS / name)


@settings(max_examples=100, deadline=None)
@given(N=st.integers(8, 10**6), cfl=st.floats(0.01, 1.0), eps=st.floats(0.0, 10.0))
def test_grid_values_round_trip(N, cfl, eps):
    cfg = parse_config_text(MINIMAL + f"\n[grid]\nN = {N}\ncfl = {cfl!r}\neps_d = {eps!r}\n")
    assert cfg.get("grid", "N") == N
    assert cfg.get("grid", "cfl") == cfl
    assert cfg.get("grid", "eps_d") == eps
