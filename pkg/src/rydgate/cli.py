"""Command-line front end: pulse synthesis, error budgets, sweeps, baselines.

Subcommands
-----------
optimize    synthesize a time-optimal (optionally vdW-robust) pulse
budget      score a pulse file against every noise channel
sweep       run a parameter sweep from a JSON spec file
protocols   tabulate the pi-J-pi and constant-pulse baselines
info        print the derived physical parameters of a configuration

All numeric inputs are in lab units (2pi x MHz, 2pi x kHz, um, uK); the
internal computation is SI.  Exit codes: 0 success, 2 configuration error,
3 numeric/optimizer failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .atomic import (
    GeometryConfig,
    lamb_dicke,
    load_pair_data,
    range_for_ratio,
    recoil_detuning,
)
from .constants import TWO_PI, khz_to_rad_s, mhz_to_rad_s, rad_s_to_mhz
from .grape import DurationScanResult, OptimizerOptions, find_time_optimal, robustify_vdw
from .hamiltonian import ConfigurationError, GateModel, NoiseConfig
from .pulses import PulseSchedule, load_pulse, save_pulse

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


@dataclasses.dataclass
class RunConfig:
    """Fully resolved, serializable run configuration.

    Exactly one of ``ratio`` / ``r_um`` is supplied on the command line;
    the other is derived and echoed so a run can be reproduced from its
    own config file.
    """

    species: str = "Rb87"
    n: int = 100
    omega_max_mhz: float = 10.0
    ratio: float | None = None
    r_um: float | None = None
    omega_z_khz: float = 100.0
    omega_x_khz: float | None = None
    omega_y_khz: float | None = None
    temp_uk: float = 1.0
    laser_axis: str = "z"
    cutoff: int = experiments.DEFAULT_CUTOFF
    robust_vdw: bool = False
    seed: int = 7
    jobs: int = 1
    restarts: int = 20
    max_iterations: int = 2000
    steps_per_omega: float = 10.0
    t_min: float = 6.0
    t_max: float = 20.0
    data_path: str | None = None
    out: str = "."

    def resolve(self) -> "RunConfig":
        """Fill in the derived member of the ratio/distance pair.

        Idempotent: a config echoed by a previous run carries both members
        and passes as long as they agree.
        """
        if self.ratio is None and self.r_um is None:
            raise ConfigurationError("supply exactly one of --ratio and --r-um")
        data = self.pair_data()
        omega = mhz_to_rad_s(self.omega_max_mhz)
        resolved = dataclasses.replace(self)
        if self.ratio is not None:
            derived_r = range_for_ratio(omega, self.ratio, data) * 1e6
            if self.r_um is not None and not math.isclose(self.r_um, derived_r, rel_tol=1e-6):
                raise ConfigurationError(
                    f"--ratio {self.ratio} implies R = {derived_r:.4f} um, which contradicts "
                    f"--r-um {self.r_um}; supply exactly one of them"
                )
            resolved.r_um = derived_r
        else:
            from .atomic import dipole_coupling

            resolved.ratio = omega / dipole_coupling(data, self.r_um * 1e-6)
        if resolved.omega_x_khz is None:
            resolved.omega_x_khz = resolved.omega_z_khz / 5.0
        if resolved.omega_y_khz is None:
            resolved.omega_y_khz = resolved.omega_z_khz
        return resolved

    def pair_data(self):
        path = self.data_path or os.environ.get("RYDGATE_DATA") or None
        return load_pair_data(self.species, self.n, path=path)

    def model(self, noise: NoiseConfig | None = None) -> GateModel:
        cfg = self.resolve()
        geom = GeometryConfig(
            distance=cfg.r_um * 1e-6,
            omega_x=khz_to_rad_s(cfg.omega_x_khz),
            omega_y=khz_to_rad_s(cfg.omega_y_khz),
            omega_z=khz_to_rad_s(cfg.omega_z_khz),
            temperature=cfg.temp_uk * 1e-6,
            laser_axis=cfg.laser_axis,
        )
        return GateModel(
            data=cfg.pair_data(),
            geom=geom,
            omega_max=mhz_to_rad_s(cfg.omega_max_mhz),
            noise=noise or NoiseConfig(),
        )

    def optimizer_options(self) -> OptimizerOptions:
        return OptimizerOptions(
            seed=self.seed,
            restart_count=self.restarts,
            max_iterations=self.max_iterations,
            steps_per_unit=self.steps_per_omega,
            t_min=self.t_min,
            t_max=self.t_max,
            jobs=self.jobs,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - fields
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, rows: list[dict], header_comment: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header_comment}\n")
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--species", default="Rb87")
    parser.add_argument("--n", type=int, default=100, help="principal quantum number")
    parser.add_argument("--omega-max-mhz", type=float, default=10.0,
                        help="maximum Rabi frequency, 2pi x MHz")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--ratio", type=float, help="drive-to-exchange ratio omega_max/J")
    group.add_argument("--r-um", type=float, help="interatomic distance, um")
    parser.add_argument("--omega-z-khz", type=float, default=100.0,
                        help="radial trap frequency, 2pi x kHz")
    parser.add_argument("--omega-x-khz", type=float, default=None,
                        help="axial trap frequency, 2pi x kHz (default omega_z/5)")
    parser.add_argument("--omega-y-khz", type=float, default=None,
                        help="second radial trap frequency, 2pi x kHz (default omega_z)")
    parser.add_argument("--temp-uk", type=float, default=1.0, help="temperature, uK")
    parser.add_argument("--laser-axis", choices=("x", "z"), default="z")
    parser.add_argument("--cutoff", type=int, default=experiments.DEFAULT_CUTOFF,
                        help="motional Fock cutoff")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--jobs", type=int, default=1, help="worker-process cap")
    parser.add_argument("--restarts", type=int, default=20)
    parser.add_argument("--max-iterations", type=int, default=2000)
    parser.add_argument("--steps-per-omega", type=float, default=10.0)
    parser.add_argument("--t-min", type=float, default=6.0,
                        help="lower end of the duration scan, units of 1/omega_max")
    parser.add_argument("--t-max", type=float, default=20.0)
    parser.add_argument("--data", dest="data_path", default=None,
                        help="species table path (env RYDGATE_DATA overrides the bundled one)")
    parser.add_argument("--out", default=".", help="output directory")


def _config_from_args(args: argparse.Namespace, need_geometry: bool = True) -> RunConfig:
    cfg = RunConfig(
        species=args.species, n=args.n, omega_max_mhz=args.omega_max_mhz,
        ratio=args.ratio, r_um=args.r_um,
        omega_z_khz=args.omega_z_khz, omega_x_khz=args.omega_x_khz,
        omega_y_khz=args.omega_y_khz, temp_uk=args.temp_uk,
        laser_axis=args.laser_axis, cutoff=args.cutoff,
        robust_vdw=getattr(args, "robust_vdw", False),
        seed=args.seed, jobs=args.jobs, restarts=args.restarts,
        max_iterations=args.max_iterations, steps_per_omega=args.steps_per_omega,
        t_min=args.t_min, t_max=args.t_max, data_path=args.data_path, out=args.out,
    )
    if need_geometry:
        cfg = cfg.resolve()
    return cfg


def _validate_positive(cfg: RunConfig) -> None:
    for name in ("omega_max_mhz", "omega_z_khz", "temp_uk"):
        value = getattr(cfg, name)
        if value is not None and name != "temp_uk" and value <= 0:
            raise ConfigurationError(f"--{name.replace('_', '-')} must be positive "
                                     f"(got {value}; units are stated in --help)")
    if cfg.temp_uk < 0:
        raise ConfigurationError(f"--temp-uk must be non-negative (got {cfg.temp_uk} uK)")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    _validate_positive(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    options = cfg.optimizer_options()
    model = cfg.model()

    scan: DurationScanResult = find_time_optimal(cfg.ratio, model, options)
    rows = [{"duration_T_omega": t, "best_cost": c} for t, c in scan.scan]
    _write_csv(out / "cost_vs_duration.csv", rows,
               "duration in units of 1/omega_max; best_cost = 1 - F")
    if not scan.success:
        _write_json(out / "report.json", {"success": False, "scan_points": len(scan.scan)})
        print("no feasible duration found up to the configured maximum", file=sys.stderr)
        return EXIT_NUMERIC

    pulse = scan.pulse
    report = {
        "success": True,
        "kind": "time-optimal",
        "duration_T_omega": scan.t_star,
        "final_cost": scan.report.final_cost,
        "iterations": scan.report.iterations,
        "status": scan.report.status,
    }
    if cfg.robust_vdw:
        robust_model = cfg.model(noise=NoiseConfig(vdw=True))
        robust = robustify_vdw(pulse, robust_model, options)
        pulse = robust.pulse
        report.update(
            kind="vdw-robust",
            duration_T_omega=pulse.duration,
            final_cost=robust.final_cost,
            status=robust.status,
            time_optimal_duration=scan.t_star,
        )
        if robust.final_cost > options.robust_cost:
            _write_json(out / "report.json", report)
            print("robust re-optimization did not reach its target cost", file=sys.stderr)
            return EXIT_NUMERIC
    pulse = dataclasses.replace(
        pulse, meta={**pulse.meta, "species": cfg.species, "n": cfg.n,
                     "R_um": cfg.r_um, "seed": cfg.seed})
    name = f"pulse_{'robust' if cfg.robust_vdw else 'to'}_ratio{cfg.ratio:g}.json"
    save_pulse(pulse, out / name)
    report["pulse_file"] = name
    _write_json(out / "report.json", report)
    print(f"wrote {out / name} (T*omega_max = {pulse.duration:g})")
    return EXIT_OK


def cmd_budget(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, need_geometry=False)
    try:
        pulse = load_pulse(args.pulse)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read pulse file: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_CONFIG
    if cfg.ratio is None and cfg.r_um is None:
        cfg.ratio = pulse.ratio
    cfg = cfg.resolve()
    _validate_positive(cfg)
    model = cfg.model()
    channels = None
    if args.channels:
        channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    report = experiments.error_budget(pulse, model, cutoff=cfg.cutoff, channels=channels)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    _write_json(out / "budget.json", experiments.budget_to_json_dict(report))
    _write_csv(out / "budget.csv", experiments.budget_csv_rows(report),
               "infidelity/excess dimensionless; analytic couplings in 2pi x Hz")
    failed = [r.channel for r in report.rows.values() if r.error]
    if failed:
        print(f"budget rows failed: {failed}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {out / 'budget.csv'} ({len(report.rows)} channels)")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, need_geometry=False)
    try:
        payload = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"cannot read sweep spec: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"sweep spec is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        variable = payload["variable"]
        grid = tuple(payload["grid"])
    except KeyError as exc:
        print(f"sweep spec missing key: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.ratio is None and cfg.r_um is None:
        cfg.ratio = float(payload.get("ratio", 2.1))
    cfg = cfg.resolve()
    _validate_positive(cfg)
    pulse = None
    if payload.get("pulse"):
        pulse = load_pulse(payload["pulse"])
    library = {}
    for key, path in payload.get("pulse_library", {}).items():
        library[type(grid[0])(key) if grid else float(key)] = load_pulse(path)
    spec = experiments.SweepSpec(
        variable=variable,
        grid=grid,
        model=cfg.model(),
        pulse_source=payload.get("pulse_source", "robust"),
        pulse=pulse,
        pulse_library=library,
        options=cfg.optimizer_options(),
        cutoff=cfg.cutoff,
    )
    rows = experiments.sweep(spec, jobs=cfg.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    units = {"ratio": "dimensionless", "n": "principal quantum number",
             "T_temp": "uK", "omega_z": "2pi x kHz"}[variable]
    _write_csv(out / "sweep.csv", rows, f"value in {units}; infidelity = 1 - F")
    failures = [r["value"] for r in rows if r.get("error")]
    if failures:
        print(f"sweep points failed: {failures}", file=sys.stderr)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} points)")
    return EXIT_OK


def cmd_protocols(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, need_geometry=False)
    ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    if not ratios:
        raise ConfigurationError("--ratios must list at least one value")
    rows = []
    for ratio in ratios:
        cfg_point = dataclasses.replace(cfg, ratio=ratio, r_um=None).resolve()
        model = cfg_point.model()
        decay_model = cfg_point.model(noise=NoiseConfig(decay=True))
        magic = experiments.find_magic_time(ratio)
        rows.append({
            "ratio": ratio,
            "pi_j_pi_T_omega": experiments.pi_j_pi_duration(ratio),
            "pi_j_pi_infidelity": 1.0 - experiments.simulate_pi_j_pi(model, ratio),
            "pi_j_pi_infidelity_with_decay": 1.0 - experiments.simulate_pi_j_pi(decay_model, ratio),
            "magic_T_omega": "" if magic is None else magic,
        })
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "protocols.csv", rows,
               "durations in units of 1/omega_max; infidelity = 1 - F")
    print(f"wrote {out / 'protocols.csv'} ({len(rows)} ratios)")
    return EXIT_OK


def cmd_info(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    _validate_positive(cfg)
    model = cfg.model()
    data = model.data
    shifts = model.vdw_shifts()
    couplings = experiments.coupling_strengths(model)
    info = {
        "species": cfg.species,
        "n": cfg.n,
        "ratio": cfg.ratio,
        "R_um": cfg.r_um,
        "J_2pi_MHz": rad_s_to_mhz(model.exchange_coupling),
        "V00_2pi_kHz": shifts["00"] / (TWO_PI * 1e3),
        "V01_2pi_kHz": shifts["01"] / (TWO_PI * 1e3),
        "V11_2pi_kHz": shifts["11"] / (TWO_PI * 1e3),
        "lamb_dicke_eta": lamb_dicke(data, model.geom.trap_frequency(cfg.laser_axis)),
        "recoil_detuning_2pi_kHz": recoil_detuning(data) / (TWO_PI * 1e3),
        "decay_total_2pi_kHz": (data.gamma0 + data.gamma1) / (TWO_PI * 1e3),
        "coupling_strengths_2pi_Hz": {k: v / TWO_PI for k, v in couplings.items()},
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydgate",
        description="Long-range dipolar-exchange iSWAP gates: pulse synthesis and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="synthesize a time-optimal or robust pulse")
    _add_common(p_opt)
    p_opt.add_argument("--robust-vdw", action="store_true",
                       help="re-optimize against van der Waals shifts")
    p_opt.set_defaults(func=cmd_optimize)

    p_budget = sub.add_parser("budget", help="per-channel error budget of a pulse file")
    _add_common(p_budget)
    p_budget.add_argument("--pulse", required=True, help="pulse JSON file")
    p_budget.add_argument("--channels", default=None,
                          help="comma-separated channel subset (default: all)")
    p_budget.set_defaults(func=cmd_budget)

    p_sweep = sub.add_parser("sweep", help="parameter sweep from a JSON spec")
    _add_common(p_sweep)
    p_sweep.add_argument("--spec", required=True, help="sweep spec JSON file")
    p_sweep.set_defaults(func=cmd_sweep)

    p_proto = sub.add_parser("protocols", help="pi-J-pi and constant-pulse baselines")
    _add_common(p_proto)
    p_proto.add_argument("--ratios", default="0.1,0.2,1,5,20,50",
                         help="comma-separated drive-to-exchange ratios")
    p_proto.set_defaults(func=cmd_protocols)

    p_info = sub.add_parser("info", help="derived parameters of a configuration")
    _add_common(p_info)
    p_info.set_defaults(func=cmd_info)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
