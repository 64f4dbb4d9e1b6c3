import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tracelens.synthgen import (RequestBlock, WorkloadTemplate, build_preset, fault_free_corpus,
                                idle_corpus)
from tracelens.trace_model import Event, EventSequence, Layer, SymbolTable


def make_seq(symbols, name="t", table=None):
    """EventSequence over single-letter pairs; 'A'..'Z' become client calls."""
    events = []
    for k, s in enumerate(symbols):
        s = str(s)
        layer = Layer.CLIENT if s.isupper() else Layer.INTERNAL
        events.append(Event("comp", s, 1000 + 10 * k, 5, layer, name))
    table = table if table is not None else SymbolTable()
    return EventSequence([table.register(e.pair) for e in events], events, name=name)


@pytest.fixture
def small_template():
    blocks = [
        RequestBlock(("cli", "A"), [("x", "a1"), ("y", "a2"), ("z", "a3"), ("x", "a4")],
                     commutable=[(1, 2)]),
        RequestBlock(("cli", "B"), [("y", "b1"), ("z", "b2"), ("x", "b3")],
                     commutable=[(0, 1)]),
        RequestBlock(("cli", "C"), [("z", "c1"), ("x", "c2"), ("y", "c3"), ("z", "c4")]),
    ]
    return WorkloadTemplate("small", blocks, [(("bg", "tick"), 1.5)])


@pytest.fixture(scope="session")
def depl():
    return build_preset("depl")


@pytest.fixture(scope="session")
def depl_corpus(depl):
    table = depl.symbol_table()
    ff = fault_free_corpus(depl, 30, seed=11, noise=0.05, table=table)
    idle = idle_corpus(depl, 3, seed=11, table=table)
    return depl, table, ff, idle


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
