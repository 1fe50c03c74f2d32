"""Splitting recorded test cases into per-location sections.

A recording is cut where the *nominal* model trajectory (zero disturbance,
rolled forward from the recorded initial state) triggers a guard.  The
triggering sample closes the running section as its exit state and, after
the reset, opens the next section's clock at the same timestamp.  The
measurement at the shared boundary sample belongs to the new section, where
the transition-disturbance set absorbs its error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import HybridAutomaton, ZenoError, apply_reset, guard_trigger
from .linsys import discretize_step

__all__ = ["TestCase", "Section", "split_test_case", "downsample"]

MAX_SECTIONS = 100


@dataclass(frozen=True)
class TestCase:
    """A recorded trajectory: initial state and location, inputs, measured
    outputs, and strictly increasing timestamps (equal lengths)."""

    x0: np.ndarray
    m0: int
    u: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        u = np.atleast_2d(np.asarray(self.u, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if not (u.shape[0] == y.shape[0] == t.shape[0]):
            raise ValueError("u, y, t must have equal sample counts")
        if t.shape[0] < 1:
            raise ValueError("empty test case")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    @property
    def k_star(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class Section:
    """One per-location slice of a test case.

    ``q`` is the source-transition index in the section convention: 0 for
    the virtual initial transition (set Q0), q >= 1 for automaton transition
    q - 1.  ``t`` and ``u`` cover the section's full clock 0..j_star; ``y``
    covers the measurements the section owns, which excludes the exit sample
    when ``x_exit`` is present (that measurement opens the next section).
    """

    location: int
    q: int
    x_entry: np.ndarray
    u: np.ndarray
    y: np.ndarray
    t: np.ndarray
    x_exit: np.ndarray | None
    start_index: int  # sample index of t[0] in the parent test case

    @property
    def j_star(self) -> int:
        return self.t.shape[0] - 1

    @property
    def n_constrained(self) -> int:
        """Number of measurement samples this section owns."""
        return self.y.shape[0]

    @property
    def is_terminal(self) -> bool:
        return self.x_exit is None


def split_test_case(h: HybridAutomaton, c: TestCase) -> dict:
    """Section a test case by locations; returns {location: [Section, ...]}.

    The nominal state is rolled forward with the exact discretization of
    the current location; the first sample whose nominal state crosses a
    guard closes the section.  More than MAX_SECTIONS sections raise
    :class:`ZenoError`.
    """
    K = c.k_star
    sections: dict[int, list] = {}
    loc = c.m0
    q_in = 0
    x_entry = c.x0.copy()
    x = x_entry
    start = 0
    states = [x]
    cache = {}
    n_sections = 0

    def close(end, x_exit):
        nonlocal n_sections
        y_end = end if x_exit is not None else end + 1
        sec = Section(
            location=loc,
            q=q_in,
            x_entry=x_entry,
            u=c.u[start : end + 1],
            y=c.y[start:y_end],
            t=c.t[start : end + 1],
            x_exit=x_exit,
            start_index=start,
        )
        sections.setdefault(loc, []).append(sec)
        n_sections += 1
        if n_sections > MAX_SECTIONS:
            raise ZenoError(f"more than {MAX_SECTIONS} sections in one test case")

    for k in range(start, K - 1):
        dt = float(c.t[k + 1] - c.t[k])
        key = (loc, dt)
        if key not in cache:
            cache[key] = discretize_step(h.dynamics(loc), dt)
        Abar, Bbar, _ = cache[key]
        x_next = Abar @ x + Bbar @ c.u[k]
        q = guard_trigger(h, loc, x, x_next)
        x = x_next
        states.append(x)
        if q is not None:
            close(k + 1, x_exit=x)
            x_entry = apply_reset(h, q, x)
            x = x_entry
            loc = h.transitions[q].destination
            q_in = q + 1
            start = k + 1
            states = [x]
    close(K - 1, x_exit=None)
    return sections


def downsample(c: TestCase, factor: int) -> TestCase:
    """Keep every factor-th sample starting at index 0 (timestamps kept)."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return c
    return TestCase(c.x0, c.m0, c.u[::factor], c.y[::factor], c.t[::factor])
