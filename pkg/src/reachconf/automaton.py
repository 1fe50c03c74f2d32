"""Hybrid automata with linear per-location dynamics, and the two-location
contact-scenario model.

An automaton couples locations (linear flow + output), guarded transitions
with affine resets, and the non-determinism sets that conformance synthesis
identifies: a process-disturbance set W and measurement-error set V per
location, a reset-disturbance set Q per transition, and a dedicated Q0 for
the start of a recording.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .linsys import LinearLocationDynamics, discretize_step
from .zonotope import HalfspaceSystem, ScaledTemplateZonotope

__all__ = [
    "LinearGuard",
    "Transition",
    "Location",
    "HybridAutomaton",
    "ContactModelParams",
    "ZenoError",
    "contact_automaton",
    "guard_trigger",
    "apply_reset",
    "simulate",
    "automaton_to_dict",
    "automaton_from_dict",
    "save_model",
    "load_model",
]

ASCENDING = "ascending"
DESCENDING = "descending"

# Trajectories with more discrete jumps than this are treated as Zeno.
MAX_TRANSITIONS = 100


class ZenoError(RuntimeError):
    """Raised when a single trajectory exceeds MAX_TRANSITIONS jumps."""


@dataclass(frozen=True)
class LinearGuard:
    """Hyperplane guard g.x = level, triggered when the crossing happens
    in the stated sense (value g.x - level going down or up through 0).
    Landing exactly on the level counts as crossed."""

    normal: np.ndarray
    level: float
    direction: str

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float).reshape(-1)
        if not np.any(normal):
            raise ValueError("guard normal must be nonzero")
        if self.direction not in (ASCENDING, DESCENDING):
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "level", float(self.level))

    def value(self, x) -> float:
        return float(self.normal @ np.asarray(x, dtype=float)) - self.level

    def crossed(self, x_prev, x_next) -> bool:
        a, b = self.value(x_prev), self.value(x_next)
        if self.direction == DESCENDING:
            return a > 0.0 and b <= 0.0
        return a < 0.0 and b >= 0.0


@dataclass(frozen=True)
class Transition:
    """Guarded jump from location ``source`` to ``destination`` with affine
    reset x' = reset_matrix x + reset_offset (the transition-disturbance set
    Q is added only in set-valued contexts)."""

    guard: LinearGuard
    reset_matrix: np.ndarray
    reset_offset: np.ndarray
    source: int
    destination: int

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.reset_matrix, dtype=float))
        r0 = np.asarray(self.reset_offset, dtype=float).reshape(-1)
        if R.shape[0] != R.shape[1] or R.shape[0] != r0.shape[0]:
            raise ValueError("reset must be square and match the offset")
        object.__setattr__(self, "reset_matrix", R)
        object.__setattr__(self, "reset_offset", r0)


@dataclass(frozen=True)
class Location:
    dynamics: LinearLocationDynamics
    invariant: HalfspaceSystem | None = None
    label: str = ""


@dataclass
class HybridAutomaton:
    """Locations, transitions, and per-location / per-transition
    non-determinism sets.

    ``W[m]`` and ``V[m]`` are the process and measurement sets of location
    m; ``Q[q]`` belongs to transition q and ``Q0`` to the virtual transition
    that starts every recording.  Fresh automata carry all-zero sets.
    """

    locations: list
    transitions: list
    W: list = None
    V: list = None
    Q: list = None
    Q0: ScaledTemplateZonotope = None
    params: "ContactModelParams | None" = None
    state_names: list = None
    input_names: list = None
    output_names: list = None

    def __post_init__(self):
        n, o = self.n_states, self.n_outputs
        for loc in self.locations:
            if loc.dynamics.n_states != n or loc.dynamics.n_outputs != o:
                raise ValueError("all locations must share state/output dimensions")
        for q, tr in enumerate(self.transitions):
            if not (0 <= tr.source < len(self.locations)) or not (
                0 <= tr.destination < len(self.locations)
            ):
                raise ValueError(f"transition {q} has an out-of-range location")
            if tr.guard.normal.shape[0] != n or tr.reset_matrix.shape[0] != n:
                raise ValueError(f"transition {q} dimension mismatch")
        if self.W is None:
            self.W = [ScaledTemplateZonotope.zero(n) for _ in self.locations]
        if self.V is None:
            self.V = [ScaledTemplateZonotope.zero(o) for _ in self.locations]
        if self.Q is None:
            self.Q = [ScaledTemplateZonotope.zero(n) for _ in self.transitions]
        if self.Q0 is None:
            self.Q0 = ScaledTemplateZonotope.zero(n)
        for s, d in ((self.W, n), (self.Q, n), (self.V, o)):
            for z in s:
                if z.dim != d:
                    raise ValueError("non-determinism set dimension mismatch")
        if self.state_names is None:
            self.state_names = [f"x{i+1}" for i in range(n)]
        if self.input_names is None:
            self.input_names = [f"u{i+1}" for i in range(self.n_inputs)]
        if self.output_names is None:
            self.output_names = [f"y{i+1}" for i in range(o)]

    @property
    def n_states(self) -> int:
        return self.locations[0].dynamics.n_states

    @property
    def n_inputs(self) -> int:
        return self.locations[0].dynamics.n_inputs

    @property
    def n_outputs(self) -> int:
        return self.locations[0].dynamics.n_outputs

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    def dynamics(self, m: int) -> LinearLocationDynamics:
        return self.locations[m].dynamics

    def incoming_set(self, q: int) -> ScaledTemplateZonotope:
        """Reset-disturbance set by section convention: q = 0 is the virtual
        initial transition (Q0), q >= 1 refers to transitions[q - 1]."""
        return self.Q0 if q == 0 else self.Q[q - 1]

    def with_sets(self, W=None, V=None, Q=None, Q0=None) -> "HybridAutomaton":
        """Copy of the automaton with some non-determinism sets replaced."""
        return HybridAutomaton(
            locations=self.locations,
            transitions=self.transitions,
            W=list(W if W is not None else self.W),
            V=list(V if V is not None else self.V),
            Q=list(Q if Q is not None else self.Q),
            Q0=Q0 if Q0 is not None else self.Q0,
            params=self.params,
            state_names=list(self.state_names),
            input_names=list(self.input_names),
            output_names=list(self.output_names),
        )


@dataclass(frozen=True)
class ContactModelParams:
    """Physical parameters of the surface-contact scenario.

    h1/h2 are the surface-hit and surface-leave heights, m_r the effective
    mass seen by the admittance controller with spring k_r and damper d_r,
    and k_e/d_e the contact (Kelvin-Voigt) stiffness and damping.
    """

    h1: float
    h2: float
    m_r: float
    k_r: float
    d_r: float
    k_e: float
    d_e: float

    FIELDS = ("h1", "h2", "m_r", "k_r", "d_r", "k_e", "d_e")

    def __post_init__(self):
        if self.m_r <= 0:
            raise ValueError("m_r must be positive")
        for name in ("k_r", "d_r", "k_e", "d_e"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=float)

    @staticmethod
    def from_vector(v) -> "ContactModelParams":
        v = np.asarray(v, dtype=float).reshape(-1)
        return ContactModelParams(*(float(x) for x in v))

    def replace(self, **kw) -> "ContactModelParams":
        return replace(self, **kw)


CONTACT_STATE_NAMES = ["p_z", "v_z", "f_e", "p_x", "theta_y"]
CONTACT_INPUT_NAMES = ["p_zd", "v_zd", "v_xd", "omega_yd"]
CONTACT_OUTPUT_NAMES = ["p_z", "f_e", "p_x", "theta_y"]
# Indices of the measured states in the state vector.
_CONTACT_OUTPUT_ROWS = [0, 2, 3, 4]


def contact_automaton(p: ContactModelParams) -> HybridAutomaton:
    """Two-location automaton of a vertical surface-contact task.

    State [p_z, v_z, f_e, p_x, theta_y], input [p_zd, v_zd, v_xd, omega_yd],
    output [p_z, f_e, p_x, theta_y].  Location 0 flies freely with the
    contact force frozen at zero; location 1 adds the Kelvin-Voigt contact
    force, carried as a state whose flow is the differentiated force law so
    that f_e = -k_e (p_z - h1) - d_e v_z holds along the flow once the entry
    reset establishes it.
    """
    n, o, zeta = 5, 4, 4
    m_r, k_r, d_r, k_e, d_e = p.m_r, p.k_r, p.d_r, p.k_e, p.d_e

    A_free = np.zeros((n, n))
    A_free[0, 1] = 1.0
    A_free[1, :3] = [-k_r / m_r, -d_r / m_r, 1.0 / m_r]
    B = np.zeros((n, zeta))
    B[1, 0] = k_r / m_r
    B[1, 1] = d_r / m_r
    B[3, 2] = 1.0
    B[4, 3] = 1.0
    C = np.zeros((o, n))
    for i, row in enumerate(_CONTACT_OUTPUT_ROWS):
        C[i, row] = 1.0
    D = np.zeros((o, zeta))

    A_contact = A_free.copy()
    A_contact[2, :3] = [
        d_e * k_r / m_r,
        -k_e + d_e * d_r / m_r,
        -d_e / m_r,
    ]
    B_contact = B.copy()
    B_contact[2, 0] = -d_e * k_r / m_r
    B_contact[2, 1] = -d_e * d_r / m_r

    e_pz = np.zeros(n)
    e_pz[0] = 1.0
    loc_free = Location(
        LinearLocationDynamics(A_free, B, C, D),
        invariant=HalfspaceSystem(-e_pz, [-p.h1]),
        label="no_contact",
    )
    loc_contact = Location(
        LinearLocationDynamics(A_contact, B_contact, C, D),
        invariant=HalfspaceSystem(e_pz, [p.h2]),
        label="contact",
    )

    # Hitting the surface initializes f_e consistently with the force law.
    R_hit = np.eye(n)
    R_hit[2, :] = 0.0
    R_hit[2, 0] = -k_e
    R_hit[2, 1] = -d_e
    r0_hit = np.zeros(n)
    r0_hit[2] = k_e * p.h1
    hit = Transition(
        LinearGuard(e_pz, p.h1, DESCENDING), R_hit, r0_hit, source=0, destination=1
    )

    R_leave = np.eye(n)
    R_leave[2, 2] = 0.0
    leave = Transition(
        LinearGuard(e_pz, p.h2, ASCENDING),
        R_leave,
        np.zeros(n),
        source=1,
        destination=0,
    )

    return HybridAutomaton(
        locations=[loc_free, loc_contact],
        transitions=[hit, leave],
        params=p,
        state_names=list(CONTACT_STATE_NAMES),
        input_names=list(CONTACT_INPUT_NAMES),
        output_names=list(CONTACT_OUTPUT_NAMES),
    )


def guard_trigger(h: HybridAutomaton, m: int, x_prev, x_next) -> int | None:
    """Lowest-index transition out of location m whose guard is crossed
    between the two states, or None."""
    for q, tr in enumerate(h.transitions):
        if tr.source == m and tr.guard.crossed(x_prev, x_next):
            return q
    return None


def apply_reset(h: HybridAutomaton, q: int, x) -> np.ndarray:
    """Nominal reset of transition q: R x + r0."""
    tr = h.transitions[q]
    return tr.reset_matrix @ np.asarray(x, dtype=float).reshape(-1) + tr.reset_offset


def simulate(
    h: HybridAutomaton,
    x0,
    m0: int,
    u,
    t,
    w_sampler=None,
    v_sampler=None,
    q_sampler=None,
):
    """Zero-order-hold rollout of the automaton with sampled disturbances.

    Per step the state advances with the current location's exact
    discretization plus Ew @ w for a sampled w; when a guard is crossed the
    reset (plus a sampled transition disturbance) is applied at the crossing
    sample and the location switches before the output of that sample is
    recorded.  Outputs carry sampled measurement errors.

    Samplers (all optional, zeros when None):
      w_sampler(location, step) -> state-space disturbance,
      v_sampler(location, sample) -> output error,
      q_sampler(transition, event_count) -> reset disturbance.

    Returns (y, locations, transition_log) where the log holds
    (sample_index, transition_index, time) triples.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    K = t.shape[0]
    if u.shape[0] != K:
        raise ValueError("u and t must have equal length")
    n, o = h.n_states, h.n_outputs
    zero_w = np.zeros(n)
    zero_v = np.zeros(o)

    loc = m0
    cache = {}
    y = np.empty((K, o))
    locations = np.empty(K, dtype=int)
    log = []

    def output(k):
        dyn = h.dynamics(loc)
        v = v_sampler(loc, k) if v_sampler is not None else zero_v
        return dyn.C @ x + dyn.D @ u[k] + v

    locations[0] = loc
    y[0] = output(0)
    for k in range(K - 1):
        dt = float(t[k + 1] - t[k])
        key = (loc, dt)
        if key not in cache:
            cache[key] = discretize_step(h.dynamics(loc), dt)
        Abar, Bbar, Ew = cache[key]
        w = w_sampler(loc, k) if w_sampler is not None else zero_w
        x_next = Abar @ x + Bbar @ u[k] + Ew @ w
        q = guard_trigger(h, loc, x, x_next)
        if q is not None:
            x_next = apply_reset(h, q, x_next)
            if q_sampler is not None:
                x_next = x_next + q_sampler(q, len(log))
            loc = h.transitions[q].destination
            log.append((k + 1, q, float(t[k + 1])))
            if len(log) > MAX_TRANSITIONS:
                raise ZenoError(
                    f"more than {MAX_TRANSITIONS} transitions in one trajectory"
                )
        x = x_next
        locations[k + 1] = loc
        y[k + 1] = output(k + 1)
    return y, locations, log


# ---------------------------------------------------------------------------
# Model serialization (JSON).  float -> repr round-trips bit-exactly.


def _matrix(M) -> list:
    return [[float(x) for x in row] for row in np.atleast_2d(M)]


def _vector(v) -> list:
    return [float(x) for x in np.asarray(v).reshape(-1)]


def _set_to_dict(s: ScaledTemplateZonotope) -> dict:
    return {"c": _vector(s.c), "G": _matrix(s.template), "alpha": _vector(s.alpha)}


def _set_from_dict(d: dict) -> ScaledTemplateZonotope:
    return ScaledTemplateZonotope(
        np.array(d["c"], dtype=float),
        np.array(d["G"], dtype=float),
        np.array(d["alpha"], dtype=float),
    )


def automaton_to_dict(h: HybridAutomaton) -> dict:
    out = {
        "params": None
        if h.params is None
        else {f: getattr(h.params, f) for f in ContactModelParams.FIELDS},
        "state_names": list(h.state_names),
        "input_names": list(h.input_names),
        "output_names": list(h.output_names),
        "locations": [
            {
                "label": loc.label,
                "A": _matrix(loc.dynamics.A),
                "B": _matrix(loc.dynamics.B),
                "C": _matrix(loc.dynamics.C),
                "D": _matrix(loc.dynamics.D),
                "invariant": None
                if loc.invariant is None
                else {
                    "normals": _matrix(loc.invariant.normals),
                    "offsets": _vector(loc.invariant.offsets),
                },
            }
            for loc in h.locations
        ],
        "transitions": [
            {
                "source": tr.source,
                "destination": tr.destination,
                "guard": {
                    "normal": _vector(tr.guard.normal),
                    "level": tr.guard.level,
                    "direction": tr.guard.direction,
                },
                "reset_matrix": _matrix(tr.reset_matrix),
                "reset_offset": _vector(tr.reset_offset),
            }
            for tr in h.transitions
        ],
        "sets": {
            "W": [_set_to_dict(s) for s in h.W],
            "V": [_set_to_dict(s) for s in h.V],
            "Q": [_set_to_dict(s) for s in h.Q],
            "Q0": _set_to_dict(h.Q0),
        },
    }
    return out


def automaton_from_dict(d: dict) -> HybridAutomaton:
    locations = [
        Location(
            LinearLocationDynamics(
                np.array(L["A"]), np.array(L["B"]), np.array(L["C"]), np.array(L["D"])
            ),
            invariant=None
            if L.get("invariant") is None
            else HalfspaceSystem(
                np.array(L["invariant"]["normals"]),
                np.array(L["invariant"]["offsets"]),
            ),
            label=L.get("label", ""),
        )
        for L in d["locations"]
    ]
    transitions = [
        Transition(
            LinearGuard(
                np.array(T["guard"]["normal"]),
                T["guard"]["level"],
                T["guard"]["direction"],
            ),
            np.array(T["reset_matrix"]),
            np.array(T["reset_offset"]),
            source=T["source"],
            destination=T["destination"],
        )
        for T in d["transitions"]
    ]
    params = None
    if d.get("params") is not None:
        params = ContactModelParams(**d["params"])
    sets = d["sets"]
    return HybridAutomaton(
        locations=locations,
        transitions=transitions,
        W=[_set_from_dict(s) for s in sets["W"]],
        V=[_set_from_dict(s) for s in sets["V"]],
        Q=[_set_from_dict(s) for s in sets["Q"]],
        Q0=_set_from_dict(sets["Q0"]),
        params=params,
        state_names=d.get("state_names"),
        input_names=d.get("input_names"),
        output_names=d.get("output_names"),
    )


def save_model(h: HybridAutomaton, path, extra: dict | None = None) -> None:
    """Write the model JSON; ``extra`` entries (e.g. synthesis metadata)
    are merged at top level."""
    doc = automaton_to_dict(h)
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_model(path) -> HybridAutomaton:
    with open(path) as f:
        return automaton_from_dict(json.load(f))
