"""Benchmark harness: scenario generation, batch runs, CSV/JSON reporting.

A run is a success when the solve did not fail, the reference switch was
actually applied, no sample after the switch violated the new operational
region, and (when a deadline is set) the measured solve time met it.

Reproducibility split: everything scenario-dependent (statuses, margins,
violations, simulated latency) is deterministic given the seed and goes to
the results CSV; measured wall-clock times are inherently jittery and go
to the summary JSON only.  The ``elapsed_us`` CSV column is therefore the
latency the simulation actually applied (switch-delay samples times dt),
not the raw measurement.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import place_poles

from .barrier import NewtonConfig
from .errors import InputError
from .geometry import Polytope, RegionKind, contains
from .lyapunov import PlantModel, ellipsoid_in_region, ellipsoid_through, solve_lyapunov
from .simulate import METHODS, Scenario, Trajectory, integrate, run_scenario
from .solver import SolveReport, SolveStatus


@dataclass
class RunRecord:
    scenario_id: str
    method: str
    status: str
    elapsed_s: float
    latency_samples: int
    dt: float
    margin: float
    post_switch_violations: int
    switched: bool
    objective_volume: float
    success: bool

    @property
    def simulated_latency_us(self) -> int:
        return int(round(self.latency_samples * self.dt * 1e6))


@dataclass
class MethodStats:
    records: List[RunRecord] = field(default_factory=list)

    @property
    def success_count(self) -> int:
        return sum(1 for r in self.records if r.success)

    @property
    def failure_count(self) -> int:
        return len(self.records) - self.success_count

    @property
    def success_rate(self) -> float:
        return self.success_count / len(self.records) if self.records else 0.0

    @property
    def times(self) -> List[float]:
        return [r.elapsed_s for r in self.records]

    @property
    def margins(self) -> List[float]:
        return [r.margin for r in self.records if math.isfinite(r.margin)]

    def times_for_status(self, status: str) -> List[float]:
        return [r.elapsed_s for r in self.records if r.status == status]


@dataclass
class BenchResult:
    per_method: Dict[str, MethodStats]
    deadline_s: Optional[float]

    def records(self) -> List[RunRecord]:
        out = []
        for stats in self.per_method.values():
            out.extend(stats.records)
        return sorted(out, key=lambda r: (r.scenario_id, r.method))


def _is_success(report: SolveReport, traj: Trajectory, deadline_s: Optional[float]) -> bool:
    if not report.succeeded:
        return False
    if deadline_s is not None and report.elapsed > deadline_s:
        return False
    if not traj.switched:
        return False
    return traj.post_switch_violations == 0


def _run_one(args) -> RunRecord:
    scenario, method, cfg, deadline_s = args
    traj, report = run_scenario(scenario, method=method, cfg=cfg, deadline_s=deadline_s)
    return RunRecord(
        scenario_id=scenario.scenario_id,
        method=method,
        status=report.status.value,
        elapsed_s=report.elapsed,
        latency_samples=traj.latency_samples,
        dt=scenario.dt,
        margin=report.margin,
        post_switch_violations=traj.post_switch_violations,
        switched=traj.switched,
        objective_volume=report.objective_volume,
        success=_is_success(report, traj, deadline_s),
    )


def run_benchmark(
    scenarios: Sequence[Scenario],
    methods: Sequence[str] = METHODS,
    cfg: Optional[NewtonConfig] = None,
    deadline_s: Optional[float] = None,
    workers: int = 1,
) -> BenchResult:
    """Run every (scenario, method) pair and aggregate.

    With ``workers > 1`` scenarios run in a process pool; aggregation is
    sorted by scenario id, so the result does not depend on completion
    order (measured times will reflect contention, which is why the
    default is serial).
    """
    if not scenarios:
        raise InputError("benchmark needs at least one scenario")
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    cfg = cfg or NewtonConfig()
    jobs = [(s, m, cfg, deadline_s) for s in scenarios for m in methods]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    per_method: Dict[str, MethodStats] = {m: MethodStats() for m in methods}
    for rec in sorted(records, key=lambda r: (r.scenario_id, r.method)):
        per_method[rec.method].records.append(rec)
    return BenchResult(per_method=per_method, deadline_s=deadline_s)


RESULTS_HEADER = "scenario_id,method,status,elapsed_us,margin,violations,objective_volume"


def write_results_csv(result: BenchResult, path) -> None:
    with open(path, "w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in result.records():
            fh.write(
                f"{r.scenario_id},{r.method},{r.status},{r.simulated_latency_us},"
                f"{r.margin:.12g},{r.post_switch_violations},{r.objective_volume:.12g}\n"
            )


def _percentiles(values: List[float]) -> Dict[str, float]:
    if not values:
        return {"p50": float("nan"), "p90": float("nan"), "p99": float("nan")}
    arr = np.asarray(values)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "p99": float(np.percentile(arr, 99)),
    }


def summary_dict(result: BenchResult) -> dict:
    out = {
        "deadline_s": result.deadline_s,
        "methods": {},
        "note": "times are measured wall clock and vary run to run; the results CSV is deterministic",
    }
    for method, stats in result.per_method.items():
        statuses: Dict[str, int] = {}
        for r in stats.records:
            statuses[r.status] = statuses.get(r.status, 0) + 1
        margins = stats.margins
        out["methods"][method] = {
            "runs": len(stats.records),
            "success_count": stats.success_count,
            "failure_count": stats.failure_count,
            "success_rate": stats.success_rate,
            "statuses": statuses,
            "time_s": _percentiles(stats.times),
            "time_s_by_status": {
                status: _percentiles(stats.times_for_status(status)) for status in statuses
            },
            "margin": {
                "median": float(np.median(margins)) if margins else float("nan"),
                "min": float(np.min(margins)) if margins else float("nan"),
                "max": float(np.max(margins)) if margins else float("nan"),
            },
        }
    return out


def write_summary_json(result: BenchResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Scenario generation
# ---------------------------------------------------------------------------

def _box_rows(center: np.ndarray, half: np.ndarray) -> List[Tuple[np.ndarray, float]]:
    n = center.shape[0]
    rows = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append((e.copy(), -(center[i] + half[i])))
        e[i] = -1.0
        rows.append((e.copy(), center[i] - half[i]))
    return rows


def _stable_plant(rng: np.random.Generator, n: int, m: int) -> PlantModel:
    for _ in range(50):
        a = rng.normal(0.0, 1.0, (n, n))
        b = rng.normal(0.0, 1.0, (n, m))
        poles = np.sort(rng.uniform(-3.0, -0.5, n))
        # place_poles wants distinct poles; spread any near-collisions
        for i in range(1, n):
            if poles[i] - poles[i - 1] < 0.05:
                poles[i] = poles[i - 1] + 0.05
        try:
            k = place_poles(a, b, poles).gain_matrix
            return PlantModel(a, b, k)
        except ValueError:
            continue
    raise InputError("could not synthesize a stable plant (pole placement kept failing)")


def generate_scenarios(
    n: int,
    m: int,
    count: int,
    seed: int,
    shrink_range: Tuple[float, float] = (0.55, 0.95),
    dt: float = 0.025,
) -> List[Scenario]:
    """Deterministic random scenario suite.

    Random stable closed loops (pole placement at random negative poles),
    Q = I with P from the Lyapunov equation, a reference box inside the
    original operational box, an initial state chosen so the original
    ellipsoid fits the original region, and a post-change region formed by
    shrinking a random subset of faces while keeping the mid-transient
    state strictly interior.  Scenarios violating any premise are
    rejection-resampled (up to 100 attempts each).
    """
    if not 2 <= n <= 10:
        raise InputError("n must be in [2, 10]")
    if not 1 <= m <= n:
        raise InputError("m must be in [1, n]")
    if count < 1:
        raise InputError("count must be positive")
    lo_s, hi_s = shrink_range
    if not 0.0 < lo_s <= hi_s <= 1.0:
        raise InputError("shrink_range must satisfy 0 < lo <= hi <= 1")
    rng = np.random.default_rng(seed)
    scenarios: List[Scenario] = []
    for idx in range(count):
        scenario = None
        for _attempt in range(100):
            scenario = _generate_one(rng, n, m, idx, seed, (lo_s, hi_s), dt)
            if scenario is not None:
                break
        if scenario is None:
            raise InputError(f"scenario {idx} failed to generate after 100 attempts")
        scenarios.append(scenario)
    return scenarios


def _generate_one(rng, n, m, idx, seed, shrink_range, dt) -> Optional[Scenario]:
    plant = _stable_plant(rng, n, m)
    p = solve_lyapunov(plant.a_cl, np.eye(n))

    half = rng.uniform(2.5, 5.0, n)
    op_before = Polytope.from_raw(_box_rows(np.zeros(n), half), RegionKind.OPERATIONAL)

    ref_center = rng.uniform(-0.25, 0.25, n) * half
    ref_half = rng.uniform(0.15, 0.45, n) * half
    ref_region = Polytope.from_raw(_box_rows(ref_center, ref_half), RegionKind.REFERENCE)
    x_ref0 = ref_center + rng.uniform(-0.6, 0.6, n) * ref_half

    # scale the initial offset so the original ellipsoid clears op_before
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    d_quad = math.sqrt(float(direction @ p.dense @ direction))
    proj = op_before.normals @ p.eigenvectors
    sup = np.sqrt(np.sum(proj * proj / p.eigenvalues, axis=1))
    slack0 = op_before.normals @ x_ref0 + op_before.offsets
    if np.max(slack0) >= -1e-9:
        return None
    t_max = float(np.min(-slack0 / (d_quad * sup)))
    x0 = x_ref0 + rng.uniform(0.55, 0.9) * t_max * direction

    original = ellipsoid_through(x_ref0, p, x0)
    if not ellipsoid_in_region(original, op_before, 1e-9).feasible:
        return None

    t_change = float(rng.uniform(0.25, 0.9))
    t_end = t_change + float(rng.uniform(2.5, 4.0))

    # shrink a random subset of faces of the original box
    new_rows = []
    for normal, offset in _box_rows(np.zeros(n), half):
        if rng.uniform() < 0.6:
            offset = offset * float(rng.uniform(*shrink_range))
        new_rows.append((normal, offset))
    try:
        op_after = Polytope.from_raw(new_rows, RegionKind.OPERATIONAL)
    except InputError:
        return None

    i_change = int(math.ceil(t_change / dt - 1e-9))
    states = integrate(plant, x_ref0, x0, dt, i_change)
    x_t1 = states[-1]
    inside = contains(op_after, x_t1, 0.0)
    if not inside.feasible or inside.worst_violation >= -0.05:
        return None

    return Scenario(
        scenario_id=f"n{n}m{m}s{seed}i{idx:04d}",
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
        integrator="rk4",
    )


def suite_from_spec(spec: dict) -> List[Scenario]:
    """Generate a suite from a generator-spec mapping (the ``bench --spec`` file)."""
    try:
        n = int(spec["n"])
        m = int(spec["m"])
        count = int(spec["count"])
        seed = int(spec["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"generator spec needs integer n, m, count, seed: {exc}") from exc
    shrink = tuple(spec.get("shrink_range", (0.55, 0.95)))
    if len(shrink) != 2:
        raise InputError("shrink_range must be [lo, hi]")
    dt = float(spec.get("dt", 0.025))
    return generate_scenarios(n, m, count, seed, shrink_range=shrink, dt=dt)
