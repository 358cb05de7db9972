"""Closed-loop simulation with an abrupt operational-region change.

A scenario integrates ``dx/dt = A_cl (x - x_ref)`` from ``x0`` under the
original reference.  At ``t_change`` the operational region is swapped and
the chosen rescue method runs on the frozen state ``x(t_change)``; its
measured wall-clock time is converted to a switch delay of
``ceil(elapsed / dt)`` samples, so slow solvers are penalized inside the
simulation.  At the scheduled switch sample the certificate is re-verified
against the live state (the solve certified the frozen state; the plant
has kept moving in the meantime) and the switch is postponed while that
re-verification fails.  Violations of the active operational region are
recorded per sample.

Two rescue methods exist: ``orsop`` re-optimizes the reference state with
this package's solver, and ``ocr`` is a deliberately conventional
controller-redesign baseline (a ladder of LQR designs with increasing
state weights, each followed by a Lyapunov re-solve, accepting the first
design whose ellipsoid fits).  The baseline is a timing/success stand-in
for full online redesign, not a faithful LMI synthesis.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_continuous_are

from .barrier import NewtonConfig
from .errors import InputError
from .geometry import Polytope, RegionKind, as_vector, contains
from .lyapunov import (
    Ellipsoid,
    PlantModel,
    SpdMatrix,
    ellipsoid_in_region,
    ellipsoid_through,
    ellipsoid_volume,
    solve_lyapunov,
)
from .solver import CERT_TOL, ReferenceProblem, SolveReport, SolveStatus, solve

#: A sample violates the active region when its worst constraint value
#: exceeds this (leaves room for integrator error and certificate slack).
VIOLATION_TOL = 1e-6

#: LQR state-weight scalings tried by the redesign baseline, in order.
REDESIGN_WEIGHTS = (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4)

METHODS = ("orsop", "ocr")


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    plant: PlantModel
    p: SpdMatrix
    x0: np.ndarray
    x_ref0: np.ndarray
    ref_region: Polytope
    op_before: Polytope
    op_after: Polytope
    t_change: float
    dt: float
    t_end: float
    integrator: str = "rk4"

    @property
    def dim(self) -> int:
        return self.plant.dim


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (samples, n)
    references: np.ndarray  # (samples, n), reference active at each sample
    events: List[Tuple[float, str]] = field(default_factory=list)
    change_index: int = -1
    switch_index: int = -1
    latency_samples: int = 0

    @property
    def switched(self) -> bool:
        return self.switch_index >= 0

    @property
    def switch_time(self) -> Optional[float]:
        return float(self.times[self.switch_index]) if self.switched else None

    def violation_count(self, after_index: int = 0) -> int:
        return sum(1 for t, kind in self.events
                   if kind == "violation" and t > self.times[after_index] + 1e-12)

    @property
    def post_switch_violations(self) -> int:
        if not self.switched:
            return 0
        return self.violation_count(after_index=self.switch_index)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _step(a_cl: np.ndarray, x: np.ndarray, ref: np.ndarray, dt: float, method: str) -> np.ndarray:
    if method == "euler":
        return x + dt * (a_cl @ (x - ref))
    k1 = a_cl @ (x - ref)
    k2 = a_cl @ (x + 0.5 * dt * k1 - ref)
    k3 = a_cl @ (x + 0.5 * dt * k2 - ref)
    k4 = a_cl @ (x + dt * k3 - ref)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(plant: PlantModel, x_ref, x_start, dt: float, steps: int, method: str = "rk4") -> np.ndarray:
    """Fixed-reference closed-loop rollout; returns (steps + 1, n) states."""
    if dt <= 0:
        raise InputError("dt must be positive")
    if method not in ("rk4", "euler"):
        raise InputError(f"unknown integrator {method!r}")
    ref = as_vector(x_ref, plant.dim, "reference")
    x = as_vector(x_start, plant.dim, "start state")
    out = np.empty((steps + 1, plant.dim))
    out[0] = x
    for i in range(steps):
        x = _step(plant.a_cl, x, ref, dt, method)
        out[i + 1] = x
    return out


# ---------------------------------------------------------------------------
# Redesign baseline
# ---------------------------------------------------------------------------

def ocr_surrogate(
    plant: PlantModel,
    op_after: Polytope,
    x_t1,
    x_ref,
    weights=REDESIGN_WEIGHTS,
) -> Tuple[Optional[np.ndarray], Optional[SpdMatrix], SolveReport]:
    """Controller-redesign baseline: LQR ladder + Lyapunov re-solve per rung.

    Keeps the reference and searches increasing state weights for a gain
    whose Lyapunov ellipsoid through the current state fits the new region.
    Returns (new gain, new Lyapunov matrix, report); gain and matrix are
    None when the ladder is exhausted.
    """
    t0 = time.perf_counter()
    xt = as_vector(x_t1, plant.dim, "current state")
    ref = as_vector(x_ref, plant.dim, "reference")
    n, m = plant.dim, plant.n_inputs
    r_mat = np.eye(m)
    for rung, w in enumerate(weights):
        try:
            s = solve_continuous_are(plant.a, plant.b, w * np.eye(n), r_mat)
        except np.linalg.LinAlgError as exc:
            raise InputError(f"plant is not stabilizable: {exc}") from exc
        k_new = plant.b.T @ s  # R = I
        p_new = solve_lyapunov(plant.a - plant.b @ k_new, np.eye(n))
        ell = ellipsoid_through(ref, p_new, xt)
        cert = ellipsoid_in_region(ell, op_after, CERT_TOL)
        if cert.feasible:
            return (
                k_new,
                p_new,
                SolveReport(
                    status=SolveStatus.REDESIGN,
                    reference=ref.copy(),
                    ellipsoid=ell,
                    objective_volume=ellipsoid_volume(ell),
                    elapsed=time.perf_counter() - t0,
                    margin=cert.worst_violation,
                    reason=f"accepted ladder rung {rung} (state weight {w:g})",
                ),
            )
    return (
        None,
        None,
        SolveReport(
            status=SolveStatus.FAILURE,
            reference=None,
            ellipsoid=None,
            objective_volume=float("nan"),
            elapsed=time.perf_counter() - t0,
            margin=float("nan"),
            reason=f"all {len(weights)} redesign rungs rejected",
        ),
    )


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def prefix_state(scenario: Scenario) -> Tuple[int, np.ndarray]:
    """Sample index of the constraint change and the state frozen there."""
    n_steps = int(round(scenario.t_end / scenario.dt))
    i_change = int(math.ceil(scenario.t_change / scenario.dt - 1e-9))
    if not 0 < i_change < n_steps:
        raise InputError("t_change must fall strictly inside the simulated horizon")
    states = integrate(scenario.plant, scenario.x_ref0, scenario.x0,
                       scenario.dt, i_change, scenario.integrator)
    return i_change, states[-1]


def run_scenario(
    scenario: Scenario,
    method: str = "orsop",
    cfg: Optional[NewtonConfig] = None,
    deadline_s: Optional[float] = None,
) -> Tuple[Trajectory, SolveReport]:
    """Simulate one scenario under the chosen rescue method.

    The solve always runs on the frozen state at the change instant; the
    deadline (if any) does not alter the trajectory, it only matters for
    success accounting by the benchmark layer.  A failed solve leaves the
    old reference active and the trajectory is monitored as such.
    """
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = cfg or NewtonConfig()
    n_steps = int(round(scenario.t_end / scenario.dt))
    times = np.arange(n_steps + 1) * scenario.dt
    n = scenario.dim

    i_change, xp = prefix_state(scenario)
    states = np.empty((n_steps + 1, n))
    states[: i_change + 1] = integrate(
        scenario.plant, scenario.x_ref0, scenario.x0, scenario.dt, i_change, scenario.integrator
    )

    inside = contains(scenario.op_after, xp, 0.0)
    if not inside.feasible or inside.worst_violation >= 0.0:
        raise InputError(
            "state at the change instant is not strictly inside the new operational "
            f"region (worst slack {inside.worst_violation:.3e})"
        )

    if method == "orsop":
        problem = ReferenceProblem(scenario.ref_region, scenario.op_after, xp, scenario.p)
        report = solve(problem, cfg)
        new_ref = report.reference
        new_a_cl = scenario.plant.a_cl  # gain unchanged; only the reference moves
        new_p = scenario.p
    else:
        k_new, p_new, report = ocr_surrogate(scenario.plant, scenario.op_after, xp, scenario.x_ref0)
        new_ref = report.reference
        if report.succeeded:
            new_a_cl = scenario.plant.a - scenario.plant.b @ k_new
            new_p = p_new
        else:
            new_a_cl = None
            new_p = None

    latency = max(1, int(math.ceil(report.elapsed / scenario.dt)))
    i_target = i_change + latency

    refs = np.tile(scenario.x_ref0, (n_steps + 1, 1))
    events: List[Tuple[float, str]] = [(float(times[i_change]), "change")]
    switch_index = -1
    active_ref = scenario.x_ref0
    active_a_cl = scenario.plant.a_cl

    for i in range(i_change, n_steps):
        if switch_index < 0 and report.succeeded and i >= i_target:
            live = ellipsoid_through(new_ref, new_p, states[i])
            if ellipsoid_in_region(live, scenario.op_after, CERT_TOL).feasible:
                switch_index = i
                active_ref = new_ref
                active_a_cl = new_a_cl
                events.append((float(times[i]), "switch"))
        refs[i] = active_ref
        states[i + 1] = _step(active_a_cl, states[i], active_ref, scenario.dt, scenario.integrator)
    refs[n_steps] = active_ref

    for i in range(n_steps + 1):
        region = scenario.op_after if i >= i_change else scenario.op_before
        if not contains(region, states[i], VIOLATION_TOL).feasible:
            events.append((float(times[i]), "violation"))
    events.sort(key=lambda e: (e[0], e[1]))

    traj = Trajectory(
        times=times,
        states=states,
        references=refs,
        events=events,
        change_index=i_change,
        switch_index=switch_index,
        latency_samples=latency,
    )
    return traj, report


# ---------------------------------------------------------------------------
# Scenario (de)serialization — JSON schema version 1
# ---------------------------------------------------------------------------

def _region_from_json(rows, kind: RegionKind, what: str) -> Polytope:
    if not isinstance(rows, list) or not rows:
        raise InputError(f"{what} must be a nonempty list of half-spaces")
    pairs = []
    for row in rows:
        try:
            pairs.append((row["normal"], row["offset"]))
        except (TypeError, KeyError) as exc:
            raise InputError(f"{what} entries need 'normal' and 'offset': {exc}") from exc
    return Polytope.from_raw(pairs, kind)


def _region_to_json(poly: Polytope):
    return [
        {"normal": [float(v) for v in h.normal], "offset": float(h.offset)}
        for h in poly.halfspaces
    ]


def scenario_from_dict(data: dict, scenario_id: str = "scenario") -> Scenario:
    """Validate and build a scenario from schema-1 JSON data."""
    if not isinstance(data, dict):
        raise InputError("scenario must be a JSON object")
    if data.get("schema") != 1:
        raise InputError(f"unsupported scenario schema {data.get('schema')!r} (expected 1)")
    try:
        n = int(data["n"])
        m = int(data["m"])
        plant = PlantModel(data["A"], data["B"], data["K"])
    except KeyError as exc:
        raise InputError(f"scenario is missing field {exc}") from exc
    if plant.dim != n or plant.n_inputs != m:
        raise InputError("matrix shapes disagree with the declared n/m")
    if "P" in data and "Q" in data:
        raise InputError("give either P or Q, not both")
    if "P" in data:
        p = SpdMatrix(data["P"])
        if p.dim != n:
            raise InputError("P has the wrong dimension")
    elif "Q" in data:
        p = solve_lyapunov(plant.a_cl, SpdMatrix(data["Q"]))
    else:
        raise InputError("scenario needs P or Q")
    try:
        x0 = as_vector(data["x0"], n, "x0")
        x_ref0 = as_vector(data["x_ref0"], n, "x_ref0")
        ref_region = _region_from_json(data["ref_region"], RegionKind.REFERENCE, "ref_region")
        op_before = _region_from_json(data["op_before"], RegionKind.OPERATIONAL, "op_before")
        op_after = _region_from_json(data["op_after"], RegionKind.OPERATIONAL, "op_after")
        t_change = float(data["t_change"])
        sim = data["sim"]
        dt = float(sim["dt"])
        t_end = float(sim["t_end"])
        integrator = str(sim.get("integrator", "rk4")).lower()
    except KeyError as exc:
        raise InputError(f"scenario is missing field {exc}") from exc
    if ref_region.dim != n or op_before.dim != n or op_after.dim != n:
        raise InputError("region dimensions disagree with n")
    if dt <= 0 or t_end <= 0 or not 0 < t_change < t_end:
        raise InputError("need dt > 0 and 0 < t_change < t_end")
    if integrator not in ("rk4", "euler"):
        raise InputError(f"unknown integrator {integrator!r}")
    original = ellipsoid_through(x_ref0, p, x0)
    cert = ellipsoid_in_region(original, op_before, CERT_TOL)
    if not cert.feasible:
        raise InputError(
            "design-time premise violated: the original ellipsoid leaves the "
            f"original operational region (slack {cert.worst_violation:.3e})"
        )
    return Scenario(
        scenario_id=scenario_id,
        plant=plant,
        p=p,
        x0=x0,
        x_ref0=x_ref0,
        ref_region=ref_region,
        op_before=op_before,
        op_after=op_after,
        t_change=t_change,
        dt=dt,
        t_end=t_end,
        integrator=integrator,
    )


def scenario_to_dict(s: Scenario, q: Optional[np.ndarray] = None) -> dict:
    """Schema-1 JSON data for a scenario.

    When ``q`` is given it is emitted instead of P (the loader re-derives
    P from the Lyapunov equation, which is deterministic).
    """
    data = {
        "schema": 1,
        "n": s.dim,
        "m": s.plant.n_inputs,
        "A": s.plant.a.tolist(),
        "B": s.plant.b.tolist(),
        "K": s.plant.k.tolist(),
        "x0": s.x0.tolist(),
        "x_ref0": s.x_ref0.tolist(),
        "ref_region": _region_to_json(s.ref_region),
        "op_before": _region_to_json(s.op_before),
        "op_after": _region_to_json(s.op_after),
        "t_change": s.t_change,
        "sim": {"dt": s.dt, "t_end": s.t_end, "integrator": s.integrator},
    }
    if q is not None:
        data["Q"] = np.asarray(q, dtype=float).tolist()
    else:
        data["P"] = s.p.dense.tolist()
    return data


def load_scenario(path) -> Scenario:
    import os

    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"scenario file {path} is not valid JSON: {exc}") from exc
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(data, scenario_id=stem)


def save_scenario(s: Scenario, path, q: Optional[np.ndarray] = None) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(s, q=q), fh, indent=2, sort_keys=True)
        fh.write("\n")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write one row per sample: t, states, references, event token.

    Tokens are change/switch/violation (joined with '+' when a sample has
    several) or '-' for none.
    """
    n = traj.states.shape[1]
    by_time = {}
    for t, kind in traj.events:
        by_time.setdefault(round(t, 12), []).append(kind)
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"ref{i + 1}" for i in range(n)] + ["event"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(traj.times):
            kinds = by_time.get(round(float(t), 12))
            token = "+".join(kinds) if kinds else "-"
            row = [f"{t:.9g}"]
            row += [f"{v:.12g}" for v in traj.states[i]]
            row += [f"{v:.12g}" for v in traj.references[i]]
            row.append(token)
            fh.write(",".join(row) + "\n")
