import csv
import io
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from patchmeso.commsim import (
    NEVER,
    Topology,
    exchange_count,
    grid2d_periodic,
    inject_delay,
    line1d,
    reduction_factor,
    ring1d,
    simulate_exchange,
    write_ledger_csv,
)


def test_topologies():
    g = grid2d_periodic(4)
    assert (g.P, g.degree, g.links) == (16, 4, 64)
    assert set(g.neighbours[0]) == {4, 12, 1, 3}
    assert ring1d(5).degree == 2
    assert line1d(3).degree is None and line1d(3).links == 4
    for bad in (lambda: ring1d(2), lambda: line1d(1), lambda: grid2d_periodic(2, 5)):
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(ValueError):
        Topology("x", ((1,), ()))


def test_grid_example():
    meso = simulate_exchange(grid2d_periodic(4), "meso", 0.2, 0.4)
    micro = simulate_exchange(grid2d_periodic(4), "micro", 1e-3, 0.4)
    assert meso.total_messages == 128
    assert micro.total_messages == 25600
    assert reduction_factor(micro, meso) == 200


def test_ring_and_payload():
    led = simulate_exchange(ring1d(8), "meso", 0.5, 0.5, payload=3)
    assert led.total_messages == 16 and led.total_scalars == 48
    assert led.sent_at[(0, 1)] == [0.0]


def test_exact_counts():
    assert exchange_count(1e-3, 0.4) == 400
    assert exchange_count(0.1, 0.3) == 3
    with pytest.raises(ValueError):
        exchange_count(0.3, 1.0)
    with pytest.raises(ValueError):
        exchange_count(1 / 30, 0.1)
    with pytest.raises(ValueError):
        simulate_exchange(ring1d(3), "often", 0.1, 1.0)


def test_delays():
    led = simulate_exchange(ring1d(4), "meso", 0.1, 0.5)
    rep = inject_delay(led, {(0, 1): 1, (2, 3): NEVER})
    assert rep.ages[(0, 1)] == [1] * 5 and rep.ages[(1, 0)] == [0] * 5
    assert rep.never_arrives == {(2, 3)}
    assert rep.patch_max_age()[1] == 1
    assert rep.ledger.total_messages == led.total_messages
    for bad in ({(0, 2): 1}, {(0, 1): -1}, {(0, 1): 0.5}):
        with pytest.raises(ValueError):
            inject_delay(led, bad)


def test_ledger_csv():
    led = simulate_exchange(ring1d(3), "meso", 0.2, 0.4)
    rep = inject_delay(led, {(0, 1): NEVER, (1, 2): 2})
    buf = io.StringIO()
    write_ledger_csv(rep.ledger, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["edge_src", "edge_dst", "messages", "scalars", "max_age"]
    by_edge = {(r[0], r[1]): r[2:] for r in rows[1:]}
    assert by_edge[("0", "1")] == ["2", "2", "never"]
    assert by_edge[("1", "2")] == ["2", "2", "2"]
    assert by_edge[("2", "0")] == ["2", "2", "0"]


@given(st.integers(3, 7), st.integers(3, 7), st.integers(1, 5), st.sampled_from([1, 2, 4, 5, 8, 10, 20, 25, 50]))
def test_closed_form(Px, Py, M, ratio):
    topo = grid2d_periodic(Px, Py)
    t_end = float(Fraction(M, 10))
    meso = simulate_exchange(topo, "meso", 0.1, t_end)
    micro = simulate_exchange(topo, "micro", float(Fraction(1, 10 * ratio)), t_end)
    assert meso.total_messages == 4 * Px * Py * M
    assert micro.total_messages == 4 * Px * Py * M * ratio
    assert reduction_factor(micro, meso) == ratio
