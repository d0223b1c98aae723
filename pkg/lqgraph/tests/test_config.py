"""
Tests the lqgraph settings and synthesis options.
"""

import pytest
from pydantic import ValidationError

from lqgraph import LQGraphSettings, SynthesisOptions


def test_threads_from_environment(monkeypatch):
    assert LQGraphSettings().threads == 1

    monkeypatch.setenv("LQGRAPH_THREADS", "4")
    assert LQGraphSettings().threads == 4

    monkeypatch.setenv("LQGRAPH_THREADS", "0")
    with pytest.raises(ValidationError):
        LQGraphSettings()


def test_synthesis_defaults():
    opts = SynthesisOptions()
    assert opts.horizon == 40
    assert opts.memory is None
    assert opts.trials == 1000


@pytest.mark.parametrize("bad", [{"horizon": 0}, {"memory": 0}, {"riccati_tol": 0.0}, {"trials": -3}])
def test_synthesis_bad_values(bad):
    with pytest.raises(ValidationError):
        SynthesisOptions(**bad)


def test_synthesis_unknown_key():
    with pytest.raises(ValidationError):
        SynthesisOptions(horizon=10, horizn=12)


def test_synthesis_frozen():
    opts = SynthesisOptions()
    with pytest.raises(ValidationError):
        opts.horizon = 3

    assert opts.model_copy(update={"horizon": 3}).horizon == 3


def test_help_info():
    assert SynthesisOptions.help_info("memory")["type"] is int
    assert SynthesisOptions.help_info("riccati_tol")["type"] is float
    assert "register" in SynthesisOptions.help_info("memory")["help"]
    assert "closure_pairs" in SynthesisOptions.field_names()

    # Every option maps onto a plain argparse converter
    for field in SynthesisOptions.field_names():
        assert SynthesisOptions.help_info(field)["type"] in (int, float)
