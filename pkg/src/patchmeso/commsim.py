"""Message accounting for inter-patch data exchange.

Every exchange instant each patch sends its macroscale value (``payload``
scalars) to each neighbour. Counting is the whole model: nothing here touches
the numerics unless the exchange hook is passed to ``gl2d.run_gl2d``, and
even then it only observes.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "Topology",
    "MessageLedger",
    "StalenessReport",
    "NEVER",
    "ring1d",
    "line1d",
    "grid2d_periodic",
    "exchange_count",
    "simulate_exchange",
    "reduction_factor",
    "inject_delay",
    "gl_exchange_hook",
    "write_ledger_csv",
]

NEVER = math.inf


def _exact(x) -> Fraction:
    # decimal reading, so 0.2 / 1e-3 is exactly 200
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class Topology:
    name: str
    neighbours: tuple

    def __post_init__(self):
        P = len(self.neighbours)
        for i, nb in enumerate(self.neighbours):
            for j in nb:
                if not 0 <= j < P or j == i:
                    raise ValueError(f"bad neighbour {j} of patch {i}")
                if self.neighbours[j].count(i) != nb.count(j):
                    raise ValueError(f"neighbour relation not symmetric at ({i}, {j})")

    @property
    def P(self) -> int:
        return len(self.neighbours)

    @property
    def degree(self) -> int | None:
        """Common degree, or ``None`` when patches differ."""
        degs = {len(nb) for nb in self.neighbours}
        return degs.pop() if len(degs) == 1 else None

    @property
    def links(self) -> int:
        """Directed patch-to-patch links, ``sum`` of degrees."""
        return sum(len(nb) for nb in self.neighbours)

    def edges(self):
        for i, nb in enumerate(self.neighbours):
            for j in nb:
                yield i, j


def ring1d(P: int) -> Topology:
    if P < 3:
        raise ValueError("a ring needs at least 3 patches")
    return Topology("ring1d", tuple(((i - 1) % P, (i + 1) % P) for i in range(P)))


def line1d(P: int) -> Topology:
    if P < 2:
        raise ValueError("a line needs at least 2 patches")
    return Topology("line1d", tuple(tuple(j for j in (i - 1, i + 1) if 0 <= j < P) for i in range(P)))


def grid2d_periodic(Px: int, Py: int | None = None) -> Topology:
    """Patch ``(ix, iy)`` has index ``ix * Py + iy``; neighbours +x, -x, +y, -y."""
    Py = Px if Py is None else Py
    if Px < 3 or Py < 3:
        raise ValueError("a periodic grid needs at least 3 patches per direction")
    nb = []
    for ix in range(Px):
        for iy in range(Py):
            nb.append((
                ((ix + 1) % Px) * Py + iy,
                ((ix - 1) % Px) * Py + iy,
                ix * Py + (iy + 1) % Py,
                ix * Py + (iy - 1) % Py,
            ))
    return Topology("grid2d_periodic", tuple(nb))


@dataclass
class MessageLedger:
    """Per directed edge ``(src, dst)`` message and scalar counters."""

    topology: Topology
    cadence: str
    step: float
    exchanges: int = 0
    messages: dict = field(default_factory=lambda: defaultdict(int))
    scalars: dict = field(default_factory=lambda: defaultdict(int))
    sent_at: dict = field(default_factory=lambda: defaultdict(list))
    max_age: dict = field(default_factory=lambda: defaultdict(int))

    def record(self, src: int, dst: int, t: float, scalars: int) -> None:
        if scalars < 0:
            raise ValueError("payload must be nonnegative")
        self.messages[(src, dst)] += 1
        self.scalars[(src, dst)] += scalars
        self.sent_at[(src, dst)].append(t)

    @property
    def total_messages(self) -> int:
        return sum(self.messages.values())

    @property
    def total_scalars(self) -> int:
        return sum(self.scalars.values())


def exchange_count(step, t_end) -> int:
    """``t_end / step`` as an exact integer."""
    q = _exact(t_end) / _exact(step)
    if q.denominator != 1 or q < 0:
        raise ValueError(f"t_end={t_end} is not a multiple of the cadence step {step}")
    return int(q)


def simulate_exchange(topology: Topology, cadence: str, step: float, t_end: float,
                      payload: int = 1) -> MessageLedger:
    """Ledger of a run exchanging at ``m * step`` for ``m = 0 .. t_end/step - 1``.

    ``cadence`` is ``"micro"`` (step is the integrator step) or ``"meso"``
    (step is the mesoscale step). With Q > 1 the payload is Q scalars.
    """
    if cadence not in ("micro", "meso"):
        raise ValueError("cadence must be 'micro' or 'meso'")
    M = exchange_count(step, t_end)
    led = MessageLedger(topology, cadence, step)
    for m in range(M):
        t = float(m * _exact(step))
        for src, dst in topology.edges():
            led.record(src, dst, t, payload)
        led.exchanges += 1
    return led


def reduction_factor(micro: MessageLedger, meso: MessageLedger) -> Fraction:
    """Ratio of message totals, exact."""
    return Fraction(micro.total_messages, meso.total_messages)


@dataclass
class StalenessReport:
    """Age, in exchange steps, of the neighbour data behind each coupling evaluation."""

    ages: dict
    never_arrives: set
    ledger: MessageLedger

    def patch_max_age(self) -> dict:
        out = defaultdict(int)
        for (src, dst), a in self.ages.items():
            out[dst] = max(out[dst], max(a) if a else 0)
        return dict(out)


def inject_delay(ledger: MessageLedger, delays: dict | None = None) -> StalenessReport:
    """Account for messages on some edges arriving ``delay`` exchanges late.

    ``delays`` maps ``(src, dst)`` to a nonnegative integer or ``NEVER``.
    Each receiver evaluates its coupling once per exchange with the newest
    data it holds, so a delay ``d`` gives age ``d`` at every evaluation.
    Numerics are untouched.
    """
    delays = dict(delays or {})
    edges = set(ledger.topology.edges())
    for e, d in delays.items():
        if e not in edges:
            raise ValueError(f"{e} is not an edge of the topology")
        if d != NEVER and (int(d) != d or d < 0):
            raise ValueError(f"delay on {e} must be a nonnegative integer or NEVER")
    out = MessageLedger(ledger.topology, ledger.cadence, ledger.step, ledger.exchanges,
                        ledger.messages.copy(), ledger.scalars.copy(), ledger.sent_at.copy())
    ages, never = {}, set()
    for e in sorted(edges):
        d = delays.get(e, 0)
        if d == NEVER:
            never.add(e)
        ages[e] = [d] * ledger.exchanges
        out.max_age[e] = d
    return StalenessReport(ages, never, out)


def gl_exchange_hook(ledger: MessageLedger, Py: int, payload: int = 1):
    """``on_exchange`` callback for ``gl2d.run_gl2d`` that fills ``ledger``."""
    topo = ledger.topology

    def hook(m, t, held):
        if held.shape[0] * held.shape[1] != topo.P or held.shape[1] != Py:
            raise ValueError("exchange data does not match the ledger topology")
        for src, dst in topo.edges():
            ledger.record(src, dst, t, payload)
        ledger.exchanges += 1

    return hook


def write_ledger_csv(ledger: MessageLedger, fh) -> None:
    """Columns ``edge_src, edge_dst, messages, scalars, max_age``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["edge_src", "edge_dst", "messages", "scalars", "max_age"])
    for src, dst in sorted(set(ledger.topology.edges())):
        age = ledger.max_age.get((src, dst), 0)
        w.writerow([src, dst, ledger.messages.get((src, dst), 0), ledger.scalars.get((src, dst), 0),
                    "never" if age == NEVER else age])
