import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisgan.config import ConfigError, dump_config, parse_config, parse_phases
from lisgan.training import TrainConfig

GOOD = """
# two-phase G-LIS run
architecture = g-lis
n_r = 3
lambda_r = 0.9   # similarity strength
phases = 100000:0.0005, 200000:0.0001
prior = uniform
"""


def test_parses_values_and_comments():
    c = parse_config(GOOD)
    assert c.architecture == "g-lis" and c.n_r == 3 and c.lambda_r == 0.9
    assert c.phases == [(100000, 5e-4), (200000, 1e-4)]
    assert c.prior == "uniform" and c.batch_size == 32


def test_every_bad_line_is_reported_with_its_number():
    text = "n_r = 3\nbogus = 1\nthis line has no equals\nbatch_size = many\nn_r = 4\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text, "run.cfg")
    diags = info.value.diagnostics
    assert [d.split(":")[1] for d in diags] == ["2", "3", "4", "5"]
    assert "bogus" in diags[0] and "duplicate" in diags[3]


def test_semantic_errors_are_config_errors():
    with pytest.raises(ConfigError, match="n_r = 0"):
        parse_config("architecture = r-iterative\nn_r = 0\n")
    with pytest.raises(ConfigError):
        parse_config("phases = 100\n")


def test_dump_round_trips():
    c = parse_config(GOOD)
    assert parse_config(dump_config(c)) == c


@given(st.lists(st.tuples(st.integers(0, 10**6), st.floats(1e-6, 1.0)), min_size=1, max_size=4))
def test_phase_strings_round_trip(phases):
    text = ",".join(f"{n}:{lr!r}" for n, lr in phases)
    assert parse_phases(text) == phases


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200))
def test_parsing_is_total(text):
    try:
        c = parse_config(text)
    except ConfigError as exc:
        assert exc.diagnostics
    else:
        assert isinstance(c, TrainConfig)
