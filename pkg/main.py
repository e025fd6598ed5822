"""
Mirror-assisted multi-element VLC experiments.
Stage 1 places wall mirrors and sets LED powers for even lighting; stage 2 assigns LEDs to
users with a heuristic and measures throughput over Monte-Carlo trials.
"""

import sys
import argparse
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from optimizers.design_model import DesignModel, build_design_model
from optimizers.design_optimizer import (
    DesignInfeasibleError,
    DesignOptimizer,
    MirrorDesign,
    lux_floor_power,
    verify_design,
)
from simulation.scenario import HEURISTICS, REGIMES, Scenario, load_scenario
from simulation.trials import TrialReport, run_trials
from utils import default_output_dir, thread_count
from writers.heatmap_writer import emit_heatmap, render_heatmap_png
from writers.lp_writer import export_model, import_solution, write_solution
from writers.results_writer import emit_results, emit_sweep
from writers.tensor_writer import dump_tensor

load_dotenv()  # Load MIRRORVLC_* settings from .env file


class ExperimentRunner:
    """Main orchestrator: one stage-1 design per regime, then trials per heuristic."""

    def __init__(self, scenario: Scenario, output_dir: Optional[str] = None,
                 threads: Optional[int] = None, verbose: bool = True):
        self.scenario = scenario
        self.output_dir = Path(output_dir or default_output_dir())
        self.threads = threads or thread_count()
        self.verbose = verbose
        self.designs: Dict[str, Tuple[DesignModel, MirrorDesign]] = {}
        self.design_solves = 0

    def log(self, message: str):
        if self.verbose:
            print(message)

    def model(self, regime: Optional[str] = None) -> DesignModel:
        regime = regime or self.scenario.regime
        return build_design_model(self.scenario, self.scenario.sensor_tensor, regime)

    def design(self, regime: Optional[str] = None, solution_path: Optional[str] = None) -> Tuple[DesignModel, MirrorDesign]:
        """Solve (or import) the mirror design for a regime; solved once per runner."""
        regime = regime or self.scenario.regime
        if regime in self.designs and solution_path is None:
            return self.designs[regime]

        self.log(f"📐 Building stage-1 model for regime '{regime}'...")
        model = self.model(regime)
        self.log(f"   {model.num_vars} variables, {model.num_rows} rows, {model.num_pairs} LED-cell pairs")

        if solution_path is not None:
            self.log(f"📂 Importing solution from {solution_path}")
            design = import_solution(solution_path, model)
        else:
            optimizer = DesignOptimizer(self.scenario.node_budget, self.scenario.time_limit, self.verbose)
            design = optimizer.solve(model)
            self.design_solves += 1
            self.log(f"   Explored {design.nodes_explored} nodes with {optimizer.lp_solves} LP solves")

        if not design.feasible:
            hint = None
            if (design.certificate or "").startswith("lux_min"):
                hint = lux_floor_power(model)
            error = DesignInfeasibleError(regime, design.certificate, design.status, hint)
            print(f"❌ {error}")
            raise error
        if design.status != "optimal":
            print(f"⚠️  Stage-1 design for '{regime}' is {design.status}, not proven optimal")
        violations = verify_design(model, design)
        if violations:
            print(f"⚠️  Design violates {len(violations)} row(s), first: {violations[0].row}")

        self.log(f"✅ Design ready: phi={design.objective_phi:.3f} lux, {design.mirror_count} mirrors")
        self.designs[regime] = (model, design)
        return model, design

    def run_experiment(self, heuristic: Optional[str] = None, regime: Optional[str] = None,
                       scenario: Optional[Scenario] = None) -> TrialReport:
        """Mirrors stay fixed across trials; only users move."""
        scenario = scenario or self.scenario
        heuristic = heuristic or scenario.heuristic
        _, design = self.design(regime)
        self.log(f"🔄 Running {scenario.trials} trials of {heuristic} with {scenario.users} users "
                 f"({self.threads} thread{'s' if self.threads > 1 else ''})...")
        report = run_trials(scenario, design, heuristic, self.threads, self.scenario.sensor_tensor)
        mean = report.mean()
        self.log(f"✅ min {mean['min_tp_bps'] / 1e6:.3f} Mbit/s, avg {mean['avg_tp_bps'] / 1e6:.3f} Mbit/s, "
                 f"{mean['avg_lux']:.1f} lux")
        return report

    def _row(self, report: TrialReport, **point) -> Dict[str, object]:
        row: Dict[str, object] = dict(point)
        row.update({f"mean_{k}": v for k, v in report.mean().items()})
        row.update({f"stderr_{k}": v for k, v in report.stderr().items()})
        return row

    def sweep_users(self, counts: Sequence[int], heuristic: Optional[str] = None,
                    regime: Optional[str] = None) -> List[Dict[str, object]]:
        heuristic = heuristic or self.scenario.heuristic
        rows = []
        for users in counts:
            report = self.run_experiment(heuristic, regime, self.scenario.replace(users=int(users)))
            rows.append(self._row(report, heuristic=heuristic, users=int(users)))
        return rows

    def sweep_divergence(self, angles: Sequence[float], heuristic: Optional[str] = None,
                         regime: Optional[str] = None) -> List[Dict[str, object]]:
        """Every angle changes the beams, so each point gets its own channel and design."""
        heuristic = heuristic or self.scenario.heuristic
        rows = []
        for angle in angles:
            self.log(f"\n📐 Divergence {angle} degrees")
            runner = ExperimentRunner(self.scenario.replace(divergence_deg=float(angle)),
                                      str(self.output_dir), self.threads, self.verbose)
            report = runner.run_experiment(heuristic, regime)
            rows.append(self._row(report, heuristic=heuristic, divergence_deg=float(angle)))
        return rows

    def sweep_regimes(self, heuristic: Optional[str] = None) -> List[Dict[str, object]]:
        """Every regime side by side, with lux and throughput ratios against no mirrors."""
        heuristic = heuristic or self.scenario.heuristic
        rows = [self._row(self.run_experiment(heuristic, regime), heuristic=heuristic, regime=regime)
                for regime in REGIMES]
        base = rows[0]
        for row in rows:
            for key in ("mean_avg_lux", "mean_avg_tp_bps", "mean_min_tp_bps"):
                row[f"{key}_vs_none"] = row[key] / base[key] if base[key] else float("nan")
        return rows

    def write_design(self, regime: Optional[str] = None, png: bool = False) -> Dict[str, Path]:
        regime = regime or self.scenario.regime
        model, design = self.design(regime)
        outputs = {
            "heatmap": emit_heatmap(design, self.scenario.room, self.output_dir / f"heatmap_{regime}.txt"),
            "solution": write_solution(model, design, self.output_dir / f"design_{regime}.sol"),
        }
        if png:
            outputs["png"] = render_heatmap_png(design, self.scenario.room, self.output_dir / f"heatmap_{regime}.png",
                                                title=f"Mirror placement ({regime})")
        for path in outputs.values():
            self.log(f"   📄 {path}")
        return outputs

    def write_report(self, report: TrialReport, name: str) -> Path:
        path = emit_results(report, self.output_dir / name)
        self.log(f"   📄 {path}")
        return path


def run_experiment(scenario: Scenario, heuristic: Optional[str] = None, regime: Optional[str] = None,
                   threads: Optional[int] = None) -> TrialReport:
    return ExperimentRunner(scenario, threads=threads, verbose=False).run_experiment(heuristic, regime)


def _scenario_from_args(args) -> Scenario:
    scenario = load_scenario(args.config) if args.config else Scenario()
    changes = {}
    for key in ("regime", "heuristic", "users", "trials", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    return scenario.replace(**changes) if changes else scenario


def _parse_list(text: str, kind=float) -> List:
    return [kind(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str,
                        help="Scenario file of key = value lines (default: built-in room, whose p_max = 0.1 "
                             "cannot reach the 400 lux floor; set p_max = 1.0 in the file)")
    common.add_argument("--regime", choices=REGIMES, help="Walls that may carry mirrors")
    common.add_argument("--heuristic", choices=HEURISTICS, help="LED-user assignment heuristic")
    common.add_argument("--users", type=int, help="Number of users per trial")
    common.add_argument("--trials", type=int, help="Number of Monte-Carlo trials")
    common.add_argument("--seed", type=int, help="Seed for user placement")
    common.add_argument("--out", type=str, help="Output directory (default: $MIRRORVLC_OUTPUT_DIR or results)")
    common.add_argument("--quiet", action="store_true", help="Only print warnings and errors")

    parser = argparse.ArgumentParser(prog="mirrorvlc", description="Mirror placement and LED-user assignment for multi-element VLC.")
    sub = parser.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", parents=[common], help="Solve stage 1 and write the mirror heatmap")
    design.add_argument("--export", type=str, help="Also write the model as an LP file for an external solver")
    design.add_argument("--import", dest="import_path", type=str, help="Use a solver solution file instead of solving")
    design.add_argument("--png", action="store_true", help="Also render the heatmap as PNG")
    design.add_argument("--dump-tensor", type=str, help="Also write the sensor channel tensor as CSV")

    sub.add_parser("run", parents=[common], help="Solve stage 1 once, then run the trials")

    sweep = sub.add_parser("sweep", parents=[common], help="Repeat the experiment over a parameter")
    sweep.add_argument("--what", choices=("users", "divergence", "regimes"), required=True)
    sweep.add_argument("--values", type=str, help="Comma-separated points (users default 2..12, divergence 20,30,40,50)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = _scenario_from_args(args)
        runner = ExperimentRunner(scenario, args.out, verbose=not args.quiet)
        runner.log(f"🚀 mirrorvlc {args.command}: {scenario.num_leds} LEDs, "
                   f"{scenario.room.num_cells} wall cells, regime '{scenario.regime}'")

        if args.command == "design":
            runner.output_dir.mkdir(parents=True, exist_ok=True)
            if args.export:
                export_model(runner.model(), args.export)
                runner.log(f"   📄 LP model: {args.export}")
            runner.design(solution_path=args.import_path)
            runner.write_design(png=args.png)
            if args.dump_tensor:
                dump_tensor(scenario.sensor_tensor, args.dump_tensor)
                runner.log(f"   📄 Channel tensor: {args.dump_tensor}")
        elif args.command == "run":
            report = runner.run_experiment()
            runner.write_design()
            runner.write_report(report, f"results_{scenario.regime}_{scenario.heuristic}.csv")
        else:
            if args.what == "users":
                rows = runner.sweep_users(_parse_list(args.values, int) if args.values else range(2, 13, 2))
            elif args.what == "divergence":
                rows = runner.sweep_divergence(_parse_list(args.values) if args.values else (20, 30, 40, 50))
            else:
                rows = runner.sweep_regimes()
            path = emit_sweep(rows, runner.output_dir / f"sweep_{args.what}_{scenario.heuristic}.csv")
            runner.log(f"   📄 {path}")
    except DesignInfeasibleError:
        return 1
    except ValueError as e:
        print(f"❌ {e}")
        return 1
    except OSError as e:
        print(f"❌ {e}")
        return 2

    if not args.quiet:
        print("\n🎉 Done.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
