"""
LPWriter: writes the stage-1 model in the textual LP interchange format and reads solver
solution files back.

Variable names: P_m, rho_m_z, chi_m_z, xi_z, phi. The file keeps chi_m_z as its own binary
tied to xi_z by a link row (chi_m_z - xi_z = 0), so an external solver sees the gated
model, while the built-in model substitutes chi by xi directly.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from optimizers.design_model import DesignModel, ModelError
from optimizers.design_optimizer import FEASIBLE, MirrorDesign, verify_design
from utils import format_float

TERMS_PER_LINE = 6
INTEGRALITY_TOL = 1e-6

_TOKEN = re.compile(
    r"\s*(?:(?P<sense><=|>=|=<|=>|=)|(?P<sign>[+-])|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*))"
)
_NUMBER = r"[+-]?(?:inf(?:inity)?|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
_DOUBLE_BOUND = re.compile(rf"^({_NUMBER})\s*<=\s*(\w+)\s*<=\s*({_NUMBER})$", re.IGNORECASE)
_FIXED_BOUND = re.compile(rf"^(\w+)\s*=\s*({_NUMBER})$", re.IGNORECASE)
_FREE_BOUND = re.compile(r"^(\w+)\s+free$", re.IGNORECASE)
_SOLUTION_LINE = re.compile(r"^([A-Za-z_][\w.]*)\s*(?:=\s*|\s+)(\S+)$")
_VARIABLE = re.compile(r"^(?:P_(\d+)|rho_(\d+)_(\d+)|chi_(\d+)_(\d+)|xi_(\d+)|phi)$")

_SECTIONS = {
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "binaries", "binary": "binaries", "bin": "binaries",
    "end": "end",
}


class SolutionFileError(ValueError):
    """Malformed, unknown or infeasible content in an imported solution file."""


@dataclass(frozen=True)
class Row:
    name: str
    coeffs: Dict[str, float]
    sense: str
    rhs: float


@dataclass
class LinearProgram:
    sense: str = "max"
    objective: Dict[str, float] = field(default_factory=dict)
    rows: List[Row] = field(default_factory=list)
    bounds: Dict[str, Tuple[Optional[float], Optional[float]]] = field(default_factory=dict)
    binaries: List[str] = field(default_factory=list)
    comments: List[str] = field(default_factory=list, compare=False)


def _chi_names(model: DesignModel) -> List[str]:
    return [f"chi_{m}_{z}" for m, z in zip(model.pair_led, model.pair_cell)]


def model_to_lp(model: DesignModel) -> LinearProgram:
    """Express the model with explicit chi binaries and link rows."""
    A, b = model.matrices()
    names = model.variable_names()
    chi = _chi_names(model)
    rows = model.row_names()
    Q = model.num_pairs
    first_pair_row = 3 * model.num_sensors + 1

    lp = LinearProgram(sense="max", objective={"phi": 1.0})
    lp.comments = [
        "mirrorvlc stage-1 design model",
        f"regime={model.regime} leds={model.num_leds} cells={model.num_cells} "
        f"sensors={model.num_sensors} pairs={Q}",
    ]
    for r in range(A.shape[0]):
        start, stop = A.indptr[r], A.indptr[r + 1]
        coeffs = {}
        for col, value in zip(A.indices[start:stop], A.data[start:stop]):
            name = names[col]
            if r >= first_pair_row and col >= model.xi_offset:
                name = chi[(r - first_pair_row) % Q]
            coeffs[name] = float(value)
        if not coeffs:
            coeffs = {names[0]: 0.0}
        lp.rows.append(Row(rows[r], coeffs, "<=", float(b[r])))
    for q in range(Q):
        z = int(model.pair_cell[q])
        lp.rows.append(Row(f"link_{model.pair_led[q]}_{z}", {chi[q]: 1.0, f"xi_{z}": -1.0}, "=", 0.0))

    for m in range(model.num_leds):
        lp.bounds[f"P_{m}"] = (model.p_min, model.p_max)
    for name in names[model.rho_offset:model.phi_index]:
        lp.bounds[name] = (0.0, model.p_max)
    lp.bounds["phi"] = (None, None)
    for z in range(model.num_cells):
        lp.bounds[f"xi_{z}"] = (0.0, 1.0) if model.allowed_cells[z] else (0.0, 0.0)
    for name in chi:
        lp.bounds[name] = (0.0, 1.0)
    lp.binaries = [f"xi_{z}" for z in range(model.num_cells)] + chi
    return lp


def _terms(coeffs: Dict[str, float]) -> List[str]:
    return [f"{'-' if v < 0 else '+'} {format_float(abs(v))} {name}" for name, v in coeffs.items()]


class LPWriter:
    """Incrementally writes one LP file: header, rows as they come, then bounds and binaries."""

    def __init__(self, output_path: Path):
        self.output_path = Path(output_path)
        self.row_count = 0
        self.file_handle = None

    def _statement(self, label: str, terms: List[str], tail: str = ""):
        lines = []
        for i in range(0, len(terms), TERMS_PER_LINE):
            chunk = " ".join(terms[i:i + TERMS_PER_LINE])
            lines.append(f" {label}: {chunk}" if i == 0 else f"   {chunk}")
        if tail:
            lines[-1] += f" {tail}"
        self.file_handle.write("\n".join(lines) + "\n")

    def initialize(self, lp: LinearProgram):
        self.file_handle = open(self.output_path, "w", encoding="utf-8")
        for comment in lp.comments:
            self.file_handle.write(f"\\ {comment}\n")
        self.file_handle.write("Maximize\n" if lp.sense == "max" else "Minimize\n")
        self._statement("obj", _terms(lp.objective))
        self.file_handle.write("Subject To\n")

    def write_row(self, row: Row):
        if self.file_handle is None:
            raise RuntimeError("LPWriter.initialize() must be called first")
        self._statement(row.name, _terms(row.coeffs), f"{row.sense} {format_float(row.rhs)}")
        self.row_count += 1

    def finalize(self, lp: LinearProgram):
        self.file_handle.write("Bounds\n")
        for name, (lo, hi) in lp.bounds.items():
            if lo is None and hi is None:
                self.file_handle.write(f" {name} free\n")
            elif lo is not None and lo == hi:
                self.file_handle.write(f" {name} = {format_float(lo)}\n")
            else:
                low = "-inf" if lo is None else format_float(lo)
                high = "inf" if hi is None else format_float(hi)
                self.file_handle.write(f" {low} <= {name} <= {high}\n")
        self.file_handle.write("Binaries\n")
        for i in range(0, len(lp.binaries), 10):
            self.file_handle.write(" " + " ".join(lp.binaries[i:i + 10]) + "\n")
        self.file_handle.write("End\n")
        self.file_handle.close()
        self.file_handle = None


def write_lp(lp: LinearProgram, path) -> Path:
    writer = LPWriter(Path(path))
    writer.initialize(lp)
    for row in lp.rows:
        writer.write_row(row)
    writer.finalize(lp)
    return writer.output_path


def export_model(model: DesignModel, path) -> LinearProgram:
    lp = model_to_lp(model)
    try:
        write_lp(lp, path)
    except OSError as e:
        raise OSError(f"Cannot write LP file {path}: {e}") from e
    return lp


def _parse_expression(text: str, where: str):
    coeffs: Dict[str, float] = {}
    sense, rhs = None, None
    sign, number = 1.0, None
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise ModelError(f"{where}: cannot read {text[pos:pos + 20]!r}")
        pos = match.end()
        kind = match.lastgroup
        token = match.group(kind)
        if kind == "sense":
            if sense is not None:
                raise ModelError(f"{where}: more than one comparison")
            sense = {"=<": "<=", "=>": ">="}.get(token, token)
        elif kind == "sign":
            sign = -sign if token == "-" else sign
        elif kind == "number":
            if sense is not None:
                rhs = sign * float(token)
            else:
                number = float(token)
                continue
        elif kind == "name":
            if sense is not None:
                raise ModelError(f"{where}: variable {token!r} on the right-hand side")
            coeffs[token] = coeffs.get(token, 0.0) + sign * (1.0 if number is None else number)
        if kind != "sign":
            sign, number = 1.0, None
    if number is not None:
        raise ModelError(f"{where}: dangling coefficient")
    return coeffs, sense, rhs


def _bound_value(text: str) -> Optional[float]:
    value = float(text.lower().replace("infinity", "inf"))
    return None if np.isinf(value) else value


def parse_lp(text: str) -> LinearProgram:
    """Read the LP subset written by LPWriter (objective, rows, bounds, binaries)."""
    lp = LinearProgram()
    section = None
    statements: List[Tuple[str, int, str]] = []

    for number, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("\\"):
            lp.comments.append(raw[1:].strip())
            continue
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key is not None:
            section = key
            if key in ("max", "min"):
                lp.sense = key
            continue
        if section in ("max", "min", "rows"):
            if ":" in line or not statements or statements[-1][0] != section:
                statements.append((section, number, line))
            else:
                kind, start, body = statements[-1]
                statements[-1] = (kind, start, f"{body} {line}")
        elif section == "bounds":
            for pattern, unpack in (
                (_DOUBLE_BOUND, lambda m: (m.group(2), _bound_value(m.group(1)), _bound_value(m.group(3)))),
                (_FIXED_BOUND, lambda m: (m.group(1), _bound_value(m.group(2)), _bound_value(m.group(2)))),
                (_FREE_BOUND, lambda m: (m.group(1), None, None)),
            ):
                match = pattern.match(line)
                if match:
                    name, lo, hi = unpack(match)
                    lp.bounds[name] = (lo, hi)
                    break
            else:
                raise ModelError(f"line {number}: cannot read bound {line!r}")
        elif section == "binaries":
            lp.binaries.extend(line.split())
        elif section == "end":
            raise ModelError(f"line {number}: content after End")
        else:
            raise ModelError(f"line {number}: text outside any section")

    for kind, number, body in statements:
        name, _, expression = body.partition(":") if ":" in body else ("obj", "", body)
        coeffs, sense, rhs = _parse_expression(expression, f"line {number}")
        if kind == "rows":
            if sense is None or rhs is None:
                raise ModelError(f"line {number}: row {name.strip()!r} has no comparison")
            lp.rows.append(Row(name.strip(), coeffs, sense, rhs))
        else:
            if sense is not None:
                raise ModelError(f"line {number}: objective cannot contain a comparison")
            lp.objective.update(coeffs)
    return lp


def read_lp(path) -> LinearProgram:
    return parse_lp(Path(path).read_text(encoding="utf-8"))


def _read_values(path: Path) -> Dict[str, Tuple[float, int]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise OSError(f"Cannot read solution file {path}: {e}") from e
    values = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _SOLUTION_LINE.match(line)
        if match is None:
            raise SolutionFileError(f"{path}:{number}: expected 'name=value', got {line!r}")
        name, text = match.groups()
        try:
            value = float(text)
        except ValueError:
            raise SolutionFileError(f"{path}:{number}: {text!r} is not a number") from None
        if name in values:
            raise SolutionFileError(f"{path}:{number}: {name} given twice")
        values[name] = (value, number)
    return values


def import_solution(path, model: DesignModel) -> MirrorDesign:
    """Load an external solver's solution and accept it only if it is feasible for the model."""
    path = Path(path)
    values = _read_values(path)
    pair_index = {(int(m), int(z)): q for q, (m, z) in enumerate(zip(model.pair_led, model.pair_cell))}

    powers = np.full(model.num_leds, np.nan)
    rho = np.full(model.num_pairs, np.nan)
    chi = {}
    xi = np.zeros(model.num_cells)
    phi = None
    for name, (value, number) in values.items():
        match = _VARIABLE.match(name)
        if match is None:
            raise SolutionFileError(f"{path}:{number}: unknown variable {name!r}")
        g = match.groups()
        if g[0] is not None and int(g[0]) < model.num_leds:
            powers[int(g[0])] = value
        elif g[1] is not None and (int(g[1]), int(g[2])) in pair_index:
            rho[pair_index[(int(g[1]), int(g[2]))]] = value
        elif g[3] is not None and (int(g[3]), int(g[4])) in pair_index:
            chi[pair_index[(int(g[3]), int(g[4]))]] = (value, number)
        elif g[5] is not None and int(g[5]) < model.num_cells:
            xi[int(g[5])] = value
        elif name == "phi":
            phi = value
        else:
            raise SolutionFileError(f"{path}:{number}: unknown variable {name!r}")

    missing = [f"P_{m}" for m in np.flatnonzero(np.isnan(powers))]
    if missing:
        raise SolutionFileError(f"{path}: missing values for {', '.join(missing[:5])}")
    if np.any(np.abs(xi - np.rint(xi)) > INTEGRALITY_TOL):
        z = int(np.argmax(np.abs(xi - np.rint(xi))))
        raise SolutionFileError(f"{path}: xi_{z}={xi[z]} is not binary")
    xi = np.rint(xi)
    for q, (value, number) in chi.items():
        if abs(value - xi[model.pair_cell[q]]) > INTEGRALITY_TOL:
            raise SolutionFileError(f"{path}:{number}: chi must equal xi of its cell inside the reflection area")

    derived = model.derived_rho(powers, xi)
    rho = np.where(np.isnan(rho), derived, rho)
    if phi is None:
        phi = float(np.min(model.sensor_lux(powers, rho)))

    design = MirrorDesign(
        xi=xi.astype(int), powers_prev=powers, objective_phi=float(phi), status=FEASIBLE,
        rho=rho, regime=model.regime,
    )
    violations = verify_design(model, design)
    if violations:
        shown = ", ".join(f"{v.row} ({v.residual:.3g})" for v in violations[:5])
        raise SolutionFileError(f"{path}: solution violates {len(violations)} constraint(s): {shown}")
    return design


def write_solution(model: DesignModel, design: MirrorDesign, path) -> Path:
    """Write a design as name=value lines, the same format import_solution reads."""
    path = Path(path)
    lines = [f"# objective phi={format_float(design.objective_phi)} status={design.status}"]
    lines += [f"P_{m}={format_float(p)}" for m, p in enumerate(design.powers_prev)]
    rho = model.derived_rho(design.powers_prev, design.xi) if design.rho is None else design.rho
    for q, value in enumerate(rho):
        lines.append(f"rho_{model.pair_led[q]}_{model.pair_cell[q]}={format_float(value)}")
        lines.append(f"chi_{model.pair_led[q]}_{model.pair_cell[q]}={int(design.xi[model.pair_cell[q]])}")
    lines += [f"xi_{z}={int(v)}" for z, v in enumerate(design.xi)]
    lines.append(f"phi={format_float(design.objective_phi)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
