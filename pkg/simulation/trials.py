"""
Monte-Carlo trials: re-place the users, run a heuristic against the fixed mirror design and
record throughput and lighting metrics. Every trial draws from its own spawned seed stream,
so serial and threaded runs give identical records.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from optimizers.design_optimizer import MirrorDesign
from optimizers.link_budget import Assignment, LinkBudget
from optimizers.nua_assigner import NearestUserAssigner
from optimizers.ssa_led_assigner import StrongestSignalLedAssigner
from optimizers.ssa_user_assigner import StrongestSignalUserAssigner
from simulation.channel import ChannelTensor
from simulation.photometry import PhotometryError, illumination_field
from simulation.scenario import HEURISTICS, Scenario, build_user_tensor, place_users

METRICS = ("min_tp_bps", "avg_tp_bps", "avg_lux", "uniformity")


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    min_tp_bps: float
    avg_tp_bps: float
    avg_lux: float
    uniformity: float


@dataclass(eq=False)
class TrialReport:
    records: List[TrialRecord]
    metadata: Dict[str, str] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def mean(self) -> Dict[str, float]:
        return {name: float(np.mean(self.column(name))) if self.records else math.nan for name in METRICS}

    def stderr(self) -> Dict[str, float]:
        if len(self.records) < 2:
            return {name: math.nan for name in METRICS}
        return {
            name: float(np.std(self.column(name), ddof=1) / math.sqrt(len(self.records)))
            for name in METRICS
        }


def trial_rngs(seed: int, trials: int) -> List[np.random.Generator]:
    """One independent PCG64 stream per trial, spawned from the scenario seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(trials)]


def make_assigner(heuristic: str, scenario: Scenario, rng: Optional[np.random.Generator] = None):
    if heuristic == "nua":
        return NearestUserAssigner()
    if heuristic == "ssa-user":
        order = None if rng is None else rng.permutation(scenario.users)
        return StrongestSignalUserAssigner(order)
    if heuristic == "ssa-led":
        return StrongestSignalLedAssigner(scenario.effective_crowd_threshold)
    raise ValueError(f"Unknown heuristic {heuristic!r}; expected one of {', '.join(HEURISTICS)}")


def run_trial(
    scenario: Scenario,
    design: MirrorDesign,
    heuristic: str,
    trial: int,
    rng: np.random.Generator,
    sensor_tensor: Optional[ChannelTensor] = None,
) -> TrialRecord:
    users = place_users(scenario, rng)
    assigner = make_assigner(heuristic, scenario, rng)
    tensor = build_user_tensor(scenario, users)
    link = LinkBudget.from_tensor(tensor, design.xi, scenario.leds, users, scenario)
    assignment: Assignment = assigner.assign(link, design.powers_prev)

    if sensor_tensor is None:
        sensor_tensor = scenario.sensor_tensor
    lighting = illumination_field(
        assignment.powers, sensor_tensor, design.xi, scenario.alpha0, scenario.lux_per_area
    )
    try:
        evenness = lighting.uniformity
    except PhotometryError:
        evenness = math.nan
    return TrialRecord(
        trial=trial,
        min_tp_bps=assignment.min_throughput,
        avg_tp_bps=assignment.avg_throughput,
        avg_lux=lighting.average,
        uniformity=evenness,
    )


def run_trials(
    scenario: Scenario,
    design: MirrorDesign,
    heuristic: str,
    threads: int = 1,
    sensor_tensor: Optional[ChannelTensor] = None,
) -> TrialReport:
    if not design.feasible:
        raise ValueError("Trials need a feasible mirror design")
    # built once here, shared read-only by the workers
    sensors = scenario.sensor_tensor if sensor_tensor is None else sensor_tensor
    rngs = trial_rngs(scenario.seed, scenario.trials)

    def one(t: int) -> TrialRecord:
        return run_trial(scenario, design, heuristic, t, rngs[t], sensors)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, range(scenario.trials)))
    else:
        records = [one(t) for t in range(scenario.trials)]

    metadata = {
        "seed": str(scenario.seed),
        "regime": design.regime,
        "heuristic": heuristic,
        "users": str(scenario.users),
        "trials": str(scenario.trials),
        "divergence_deg": repr(float(scenario.divergence_deg)),
        "interference": scenario.interference,
    }
    return TrialReport(records=records, metadata=metadata)


def summarise(report: TrialReport) -> Dict[str, float]:
    summary = {f"mean_{k}": v for k, v in report.mean().items()}
    summary.update({f"stderr_{k}": v for k, v in report.stderr().items()})
    return summary
