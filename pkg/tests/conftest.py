import numpy as np
import pytest

from enroute.scheduling import assign_schedule, causal_sets_for
from enroute.topology import Network, RadioModel, random_network


def make_network(parent, positions=None, broadcast=(), radio=None):
    """Network from a pre-order parent list; ``-1`` marks the sink."""
    n = len(parent)
    par = [n if p < 0 else p for p in parent]
    if positions is None:
        positions = np.column_stack([np.arange(n + 1, dtype=float), np.zeros(n + 1)])
    return Network(np.asarray(positions, dtype=float), np.array(par), tuple(broadcast), radio or RadioModel())


def path_network(n):
    """Chain ``sink <- 0 <- 1 <- ... <- n-1`` on a line, 10 m apart."""
    pos = np.zeros((n + 1, 2))
    pos[:n, 0] = 10.0 * np.arange(1, n + 1)
    return make_network([-1] + list(range(n - 1)), pos)


def five_node_network():
    """Five-node example: 0 <- 1 <- 2 and 0 <- 3 <- 4, overhearing 2->3 and 3->1."""
    return make_network([-1, 0, 1, 0, 3], broadcast=[(2, 3), (3, 1)])


FIVE_NODE_ORDER = [2, 4, 3, 1, 0]


def setup(net, order=None):
    sched = assign_schedule(net, order)
    return sched, causal_sets_for(net, sched)


def random_setups(count, nodes=30, seed=0, radius=150.0):
    out = []
    for i in range(count):
        radio = RadioModel.fixed(radius) if i % 2 else RadioModel.variable()
        net = random_network(int(np.random.default_rng(seed + i).integers(2, nodes + 1)), radio=radio, seed=seed + i)
        out.append((net,) + setup(net))
    return out


@pytest.fixture
def five_node():
    net = five_node_network()
    return (net,) + setup(net, FIVE_NODE_ORDER)


ACCEPTANCE: dict = {}


def record(criterion, ok, detail):
    """Remember one acceptance verdict and echo it."""
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
