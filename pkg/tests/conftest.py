import pytest
from hypothesis import settings
from hypothesis import strategies as st

from cdacheck.core import Command, Instruction, Order, OrderDomain

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def admissible_domains(draw, max_side=4, max_qty=6, max_price=10):
    nb = draw(st.integers(0, max_side))
    na = draw(st.integers(0, max_side))
    n = nb + na
    ids = draw(st.lists(st.integers(0, 50), min_size=n, max_size=n, unique=True))
    stamps = draw(st.lists(st.integers(0, 50), min_size=n, max_size=n, unique=True))
    orders = [
        Order(ids[k], stamps[k], draw(st.integers(1, max_qty)), draw(st.integers(0, max_price)))
        for k in range(n)
    ]
    return OrderDomain(tuple(orders[:nb]), tuple(orders[nb:]))


@st.composite
def legal_inputs(draw, max_side=5, max_qty=8, max_price=12):
    """Non-matchable residents plus a fresh-id, fresh-timestamp instruction."""
    split = draw(st.integers(0, max_price - 1))
    nb = draw(st.integers(0, max_side))
    na = draw(st.integers(0, max_side))
    n = nb + na + 1
    ids = draw(st.lists(st.integers(0, 60), min_size=n, max_size=n, unique=True))
    stamps = draw(st.lists(st.integers(0, 60), min_size=n, max_size=n, unique=True))
    bids = tuple(
        Order(ids[k], stamps[k], draw(st.integers(1, max_qty)), draw(st.integers(0, split)))
        for k in range(nb)
    )
    asks = tuple(
        Order(ids[nb + k], stamps[nb + k], draw(st.integers(1, max_qty)), draw(st.integers(split + 1, max_price)))
        for k in range(na)
    )
    cmd = draw(st.sampled_from(list(Command)))
    if cmd is Command.DEL:
        pool = [o.id for o in bids + asks] + [ids[-1]]
        instr = Instruction.delete(draw(st.sampled_from(pool)), stamps[-1])
    else:
        instr = Instruction(cmd, Order(ids[-1], stamps[-1], draw(st.integers(1, max_qty)), draw(st.integers(0, max_price))))
    return bids, asks, instr
