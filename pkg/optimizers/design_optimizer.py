"""
Stage-1 solvers: the fixed-mirror LP, a best-bound branch-and-bound over the mirror bits,
an exhaustive oracle for small grids and a feasibility checker for any candidate design.
"""

import heapq
import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import OptimizeWarning, linprog

from optimizers.design_model import DesignModel, ModelError

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
LP_OPTIONS = {
    "primal_feasibility_tolerance": FEASIBILITY_TOL,
    "dual_feasibility_tolerance": FEASIBILITY_TOL,
    "presolve": True,
}
BRUTE_FORCE_MAX_CELLS = 20


class DesignInfeasibleError(ValueError):
    """Stage 1 has no feasible mirror design; carries the row that cannot be met."""

    def __init__(self, regime: str, certificate: Optional[str], status: str = INFEASIBLE,
                 min_p_max: Optional[float] = None):
        self.regime = regime
        self.certificate = certificate
        self.status = status
        self.min_p_max = min_p_max
        detail = f", violated row {certificate}" if certificate else ""
        if min_p_max is not None:
            detail += f"; the lux floor needs p_max >= {min_p_max:.4g} W"
        super().__init__(f"Stage-1 design for regime '{regime}' is {status}{detail}")


@dataclass
class LpResult:
    status: str
    phi: float = float("nan")
    powers: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    certificate: Optional[str] = None
    message: str = ""


@dataclass(eq=False)
class MirrorDesign:
    xi: np.ndarray
    powers_prev: Optional[np.ndarray]
    objective_phi: float
    status: str
    rho: Optional[np.ndarray] = None
    regime: str = "four"
    nodes_explored: int = 0
    certificate: Optional[str] = None
    bound: float = float("nan")

    @property
    def feasible(self) -> bool:
        return self.powers_prev is not None and self.status in (OPTIMAL, FEASIBLE, ITERATION_LIMIT)

    @property
    def mirror_count(self) -> int:
        return int(np.sum(self.xi))

    def sensor_lux(self, model: DesignModel) -> np.ndarray:
        return model.sensor_lux(self.powers_prev, self.rho)


@dataclass(frozen=True)
class Violation:
    row: str
    residual: float


def _better(value: float, reference: Optional[float]) -> bool:
    if reference is None:
        return True
    return value > reference + 1e-9 * max(1.0, abs(reference))


def _relax(model: DesignModel, xi_lo, xi_hi) -> LpResult:
    A, b = model.matrices()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        res = linprog(
            model.objective(),
            A_ub=A,
            b_ub=b,
            bounds=model.bounds(xi_lo, xi_hi),
            method="highs-ds",
            options=LP_OPTIONS,
        )
    if res.status == 2:
        return LpResult(INFEASIBLE, message=res.message)
    if res.status == 1:
        return LpResult(ITERATION_LIMIT, message=res.message)
    if res.status != 0 or res.x is None:
        # phi is capped by the lux rows, so anything else is a solver failure
        raise ModelError(f"LP solver failed: {res.message}")
    x = res.x
    M, Q = model.num_leds, model.num_pairs
    return LpResult(
        status=OPTIMAL,
        phi=float(x[model.phi_index]),
        powers=np.clip(x[:M], model.p_min, model.p_max),
        rho=x[M:M + Q],
        xi=x[model.xi_offset:],
        message=res.message,
    )


def solve_lp(model: DesignModel, xi) -> LpResult:
    """Optimal powers and phi for a fixed binary mirror vector."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape[0] != model.num_cells:
        raise ModelError(f"Mirror vector has length {xi.shape[0]}, expected {model.num_cells}")
    if np.any((xi != 0) & (xi != 1)):
        raise ModelError("Mirror vector must be binary")
    if np.any(xi[~model.allowed_cells] != 0):
        return LpResult(INFEASIBLE, xi=xi, certificate="regime", message="mirror on an excluded wall")
    result = _relax(model, xi, xi)
    if result.status == INFEASIBLE:
        result.xi = xi
        result.certificate = infeasibility_certificate(model, xi)
        return result
    result.xi = xi
    result.rho = model.derived_rho(result.powers, xi)
    return result


def infeasibility_certificate(model: DesignModel, xi=None) -> str:
    """Name of a row that cannot be satisfied, checked from the cheapest argument up."""
    if model.phi2 > model.phi1:
        return "lux_window"
    xi = model.allowed_cells.astype(float) if xi is None else np.asarray(xi, dtype=float)
    full = model.sensor_lux(np.full(model.num_leds, model.p_max), model.p_max * xi[model.pair_cell])
    dark = np.flatnonzero(full < model.phi2 - FEASIBILITY_TOL)
    if dark.size:
        return f"lux_min_{dark[0]}"
    floor = model.sensor_lux(np.full(model.num_leds, model.p_min), model.p_min * xi[model.pair_cell])
    bright = np.flatnonzero(floor > model.phi1 + FEASIBILITY_TOL)
    if bright.size:
        return f"lux_max_{bright[0]}"
    return "uniformity"


def lux_floor_power(model: DesignModel, xi=None) -> Optional[float]:
    """Smallest p_max at which every sensor could reach phi2 with all LEDs and mirrors at full power.

    Sensor lux is linear in p_max, so this is a necessary bound only. None when some sensor
    stays dark at any power.
    """
    xi = model.allowed_cells.astype(float) if xi is None else np.asarray(xi, dtype=float)
    full = model.sensor_lux(np.full(model.num_leds, model.p_max), model.p_max * xi[model.pair_cell])
    if full.size == 0 or model.phi2 <= 0:
        return model.p_max
    if not np.all(full > 0):
        return None
    return float(model.p_max * model.phi2 / full.min())


def _design_from(model: DesignModel, result: LpResult, status: str, explored: int, bound: float):
    return MirrorDesign(
        xi=np.rint(result.xi).astype(int),
        powers_prev=result.powers,
        objective_phi=result.phi,
        status=status,
        rho=result.rho,
        regime=model.regime,
        nodes_explored=explored,
        bound=bound,
    )


def _infeasible_design(model: DesignModel, explored: int, certificate: Optional[str]) -> MirrorDesign:
    return MirrorDesign(
        xi=np.zeros(model.num_cells, dtype=int),
        powers_prev=None,
        objective_phi=float("nan"),
        status=INFEASIBLE,
        regime=model.regime,
        nodes_explored=explored,
        certificate=certificate,
    )


def _no_incumbent(model: DesignModel, explored: int, bound: float) -> MirrorDesign:
    return MirrorDesign(
        xi=np.zeros(model.num_cells, dtype=int),
        powers_prev=None,
        objective_phi=float("nan"),
        status=ITERATION_LIMIT,
        regime=model.regime,
        nodes_explored=explored,
        bound=bound,
    )


@dataclass(order=True)
class _Node:
    neg_bound: float
    order: int
    xi_lo: np.ndarray = field(compare=False)
    xi_hi: np.ndarray = field(compare=False)
    relaxation: LpResult = field(compare=False)


class DesignOptimizer:
    """Best-bound branch-and-bound over the mirror bits with LP relaxation bounds."""

    def __init__(self, node_budget: int = 1_000_000, time_limit: Optional[float] = None, verbose: bool = False):
        if node_budget < 1:
            raise ValueError("node_budget must be at least 1")
        self.node_budget = node_budget
        self.time_limit = time_limit
        self.verbose = verbose
        self.lp_solves = 0

    def _relax(self, model, lo, hi) -> LpResult:
        self.lp_solves += 1
        return _relax(model, lo, hi)

    def _solve_fixed(self, model, xi) -> LpResult:
        self.lp_solves += 1
        return solve_lp(model, xi)

    @staticmethod
    def _branch_cell(xi: np.ndarray) -> Optional[int]:
        """Most fractional mirror bit, lowest index on ties; None when integral."""
        distance = np.abs(xi - np.rint(xi))
        if np.all(distance <= INTEGRALITY_TOL):
            return None
        closeness = np.abs(xi - 0.5)
        candidates = np.flatnonzero(distance > INTEGRALITY_TOL)
        return int(candidates[np.argmin(closeness[candidates])])

    def solve(self, model: DesignModel) -> MirrorDesign:
        started = time.perf_counter()
        Z = model.num_cells
        lo = np.zeros(Z)
        hi = model.allowed_cells.astype(float)

        root = self._relax(model, lo, hi)
        if root.status == INFEASIBLE:
            return _infeasible_design(model, 1, infeasibility_certificate(model))
        if root.status != OPTIMAL:
            return _no_incumbent(model, 1, float("nan"))

        incumbent: Optional[LpResult] = None
        for guess in ((root.xi >= 0.5) & model.allowed_cells, np.zeros(Z, dtype=bool)):
            trial = self._solve_fixed(model, guess.astype(float))
            if trial.status == OPTIMAL:
                incumbent = trial
                break

        counter = itertools.count()
        heap: List[_Node] = [_Node(-root.phi, next(counter), lo, hi, root)]
        explored = 0
        limit_hit = False
        while heap:
            if explored >= self.node_budget or (
                self.time_limit is not None and time.perf_counter() - started > self.time_limit
            ):
                limit_hit = True
                break
            node = heapq.heappop(heap)
            explored += 1
            if incumbent is not None and not _better(-node.neg_bound, incumbent.phi):
                heap.clear()
                break

            z = self._branch_cell(node.relaxation.xi)
            if z is None:
                fixed = self._solve_fixed(model, np.rint(node.relaxation.xi))
                if fixed.status == OPTIMAL and _better(fixed.phi, None if incumbent is None else incumbent.phi):
                    incumbent = fixed
                continue

            for value in (1.0, 0.0):
                child_lo, child_hi = node.xi_lo.copy(), node.xi_hi.copy()
                child_lo[z] = child_hi[z] = value
                child = self._relax(model, child_lo, child_hi)
                if child.status != OPTIMAL:
                    continue
                if incumbent is None or _better(child.phi, incumbent.phi):
                    heapq.heappush(heap, _Node(-child.phi, next(counter), child_lo, child_hi, child))

        bound = root.phi
        if limit_hit:
            bound = max(-heap[0].neg_bound, incumbent.phi if incumbent else -math.inf) if heap else root.phi
            if self.verbose:
                print(f"⚠️  Branch-and-bound stopped after {explored} nodes; returning best incumbent")
            if incumbent is None:
                return _no_incumbent(model, explored, bound)
            return _design_from(model, incumbent, ITERATION_LIMIT, explored, bound)

        if incumbent is None:
            return _infeasible_design(model, explored, infeasibility_certificate(model))
        return _design_from(model, incumbent, OPTIMAL, explored, incumbent.phi)


def solve_design(model: DesignModel, budget: int = 1_000_000, time_limit: Optional[float] = None,
                 verbose: bool = False) -> MirrorDesign:
    return DesignOptimizer(budget, time_limit, verbose).solve(model)


def brute_force_design(model: DesignModel) -> MirrorDesign:
    """Try every mirror vector; ties go to the lexicographically smallest xi."""
    if model.num_cells > BRUTE_FORCE_MAX_CELLS:
        raise ModelError(
            f"Exhaustive design search is limited to {BRUTE_FORCE_MAX_CELLS} cells, got {model.num_cells}"
        )
    free = np.flatnonzero(model.allowed_cells)
    # bits outside every reflection area cannot change the LP
    relevant = np.isin(free, model.pair_cell)
    cache = {}
    best: Optional[LpResult] = None
    explored = 0
    for bits in itertools.product((0, 1), repeat=free.shape[0]):
        xi = np.zeros(model.num_cells)
        xi[free] = bits
        key = tuple(np.asarray(bits, dtype=int)[relevant])
        if key not in cache:
            cache[key] = solve_lp(model, xi)
            explored += 1
        result = cache[key]
        if result.status != OPTIMAL:
            continue
        if _better(result.phi, None if best is None else best.phi):
            best = LpResult(OPTIMAL, result.phi, result.powers, model.derived_rho(result.powers, xi), xi)
    if best is None:
        return _infeasible_design(model, explored, infeasibility_certificate(model))
    return _design_from(model, best, OPTIMAL, explored, best.phi)


def verify_design(model: DesignModel, design: MirrorDesign, tol: float = 1e-6) -> List[Violation]:
    """Every violated row or bound of the design, with its residual; empty when feasible."""
    if design.powers_prev is None:
        return [Violation("powers", math.inf)]
    xi = np.asarray(design.xi, dtype=float)
    P = np.asarray(design.powers_prev, dtype=float)
    rho = model.derived_rho(P, xi) if design.rho is None else np.asarray(design.rho, dtype=float)
    violations = []

    off_grid = np.abs(xi - np.rint(xi))
    for z in np.flatnonzero(off_grid > tol):
        violations.append(Violation(f"xi_{z}", float(off_grid[z])))
    for z in np.flatnonzero((xi > tol) & ~model.allowed_cells):
        violations.append(Violation(f"xi_{z}", float(xi[z])))
    for m in np.flatnonzero(P < model.p_min - tol):
        violations.append(Violation(f"P_{m}", float(model.p_min - P[m])))
    for m in np.flatnonzero(P > model.p_max + tol):
        violations.append(Violation(f"P_{m}", float(P[m] - model.p_max)))
    for q in np.flatnonzero(rho < -tol):
        violations.append(Violation(f"rho_{model.pair_led[q]}_{model.pair_cell[q]}", float(-rho[q])))

    A, b = model.matrices()
    x = model.pack(P, rho, design.objective_phi, xi)
    residual = A @ x - b
    activity = abs(A) @ np.abs(x)
    slack = tol * (1.0 + np.abs(b) + activity)
    names = model.row_names()
    for r in np.flatnonzero(residual > slack):
        violations.append(Violation(names[r], float(residual[r])))

    gap = np.abs(rho - model.derived_rho(P, np.rint(xi)))
    for q in np.flatnonzero(gap > tol):
        violations.append(Violation(f"linearize_{model.pair_led[q]}_{model.pair_cell[q]}", float(gap[q])))
    return violations
