import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bioflux.config import SCHEMA, load_config, parse_config
from bioflux.errors import BiofluxError, ConfigError
from bioflux.model import Purpose, Regime, admissible_gamma

MINIMAL = """\
[grid]
nx = 64
ny = 64

[model]
m = 2

[nonlinearity.f]
kind = fisher
mu = 1

[run]
scenario = tuval_plume
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.params.regime is Regime.SUPERCRITICAL
    assert cfg.params.K2 == 1.0 and cfg.params.c_O == 1.0 and cfg.params.gamma == 0.0
    assert cfg.run.tol == 1e-10 and cfg.run.safety == 0.4 and cfg.run.dt is None
    assert cfg.run.t_end == 1.0 and cfg.run.dt_max == math.inf
    assert (cfg.grid.nx, cfg.grid.ny, cfg.grid.Lx) == (64, 64, 1.0)
    assert cfg.scenario.name == "tuval_plume" and cfg.scenario.seed == 0
    assert cfg.output.csv == "diagnostics.csv"
    assert cfg.purpose is Purpose.EXISTENCE and cfg.report.ok


def test_m_below_one_is_rejected_with_line():
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL.replace("m = 2", "m = 0.5"))
    assert err.value.line == 6


def test_subcritical_zero_growth_names_asf2():
    text = "[model]\nm = 1\n[nonlinearity.f]\nkind = zero\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert "asf2" in str(err.value) and err.value.line == 4


def test_supercritical_zero_growth_is_accepted():
    cfg = parse_config("[model]\nm = 2\n[nonlinearity.f]\nkind = zero\n")
    assert cfg.params.regime is Regime.SUPERCRITICAL and cfg.report.ok


def test_attractor_purpose_sets_admissible_gamma():
    cfg = parse_config(MINIMAL + "purpose = attractor\n")
    assert cfg.params.gamma == pytest.approx(admissible_gamma(cfg.grid))
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "purpose = attractor\n[model]\n")
    big = parse_config(MINIMAL.replace("m = 2", "m = 2\ngamma = 100") + "purpose = attractor\n")
    assert big.params.gamma == cfg.params.gamma  # requests above lambda_1/4 are clamped
    small = parse_config(MINIMAL.replace("m = 2", "m = 2\ngamma = 0.5"))
    assert small.params.gamma == 0.5


@pytest.mark.parametrize("text, line", [
    ("[model]\nm = 2\nbogus = 1\n", 3),
    ("[model]\nm = 2\n[weird]\n", 3),
    ("m = 2\n", 1),
    ("[model]\nm = two\n", 2),
    ("[model]\nm = 2\nm = 3\n", 3),
    ("[model]\nm = 2\n[model]\n", 3),
    ("[model\nm = 2\n", 1),
    ("[model]\nm 2\n", 2),
    ("[grid]\nnx = 2.5\n[model]\nm = 2\n", 2),
    ("[grid]\nnx = 2\n[model]\nm = 2\n", 2),
    ("[model]\nm = 2\n[run]\ndebug = maybe\n", 4),
    ("[model]\nm = 2\n[run]\nscenario = vortex\n", 4),
    ("[model]\nm = 2\n[run]\ndt_policy = fixed\n", 4),
    ("[model]\nm = 2\n[run]\ndt_policy = sometimes\n", 4),
    ("[model]\nm = 2\n[run]\ntol = 0.1\n", 4),
    ("[model]\nm = 2\n[nonlinearity.chi]\nkind = table\ntable = 0:1, oops\n", 5),
    ("[grid]\nnx = 8\n", 2),
    ("", 1),
])
def test_errors_are_located(text, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_comments_tables_and_fixed_dt():
    text = """
    # comment
    [model]   ; trailing
    m = 1.5
    [nonlinearity.chi]
    kind = table
    table = 0:0, 0.5:0.2, 1:1
    [nonlinearity.f]
    kind = fisher
    [run]
    dt = 1e-4
    debug = yes
    """
    cfg = parse_config("\n".join(s.strip() for s in text.splitlines()))
    assert cfg.run.dt == 1e-4 and cfg.run.debug
    assert cfg.params.chi(np.array([0.25]))[0] == pytest.approx(0.1)
    assert ("model", "m") in cfg.lines


def test_potential_from_file(tmp_path):
    phi = np.random.default_rng(0).random((8, 8))
    np.save(tmp_path / "phi.npy", phi)
    path = tmp_path / "c.cfg"
    path.write_text("[grid]\nnx = 8\nny = 8\n[model]\nm = 2\n[nonlinearity.phi]\nfile = phi.npy\n")
    cfg = load_config(path)
    assert np.array_equal(cfg.params.phi.values, phi)
    path.write_text("[grid]\nnx = 16\nny = 16\n[model]\nm = 2\n[nonlinearity.phi]\nfile = phi.npy\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[model]\nm = 2\n[nonlinearity.phi]\nfile = missing.npy\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert err.value.line == 4


_line = st.one_of(
    st.sampled_from([f"[{s}]" for s in SCHEMA] + ["[bad]", "[model", "", "# c"]),
    st.builds(lambda s, k, v: f"{k} = {v}",
              st.sampled_from(sorted(SCHEMA)),
              st.sampled_from(sorted({k for keys in SCHEMA.values() for k in keys}) + ["zzz"]),
              st.sampled_from(["1", "2", "0.5", "-1", "x", "fisher", "true", "0:0, 1:1", ""])),
    st.text(max_size=12),
)


@given(st.lists(_line, max_size=12))
def test_parsing_is_total(lines):
    text = "\n".join(lines)
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        assert 1 <= exc.line <= max(1, len(text.splitlines()))
        return
    except BiofluxError as exc:  # pragma: no cover - any other escape is a bug
        pytest.fail(f"unlocated error {exc!r}")
    assert cfg.report.ok
