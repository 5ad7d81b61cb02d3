"""Command-line front end: modes -> turbulence -> plant -> synthesis -> simulation."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import fixtures, hinf, plate_modes, sim, turbulence
from .plant import build_default_plant, plant_to_json

log = logging.getLogger("bimorph_ao")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SIM = 0, 1, 2, 3, 4


class CommandError(Exception):
    def __init__(self, code, kind, message, details=None):
        super().__init__(message)
        self.code, self.kind, self.details = code, kind, details or {}


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(cfg.echo() + "\n")
    return out


def _note_wind_ratio(cfg):
    table_ratio = config_mod.TABLE_WIND_SPEED / config_mod.TABLE_PUPIL_DIAMETER
    if abs(cfg.V_over_D - table_ratio) > 1e-9 * table_ratio:
        log.info("V/D = %g 1/s is used for the shaping filter; V = %g m/s and D = %g m "
                 "would give %g 1/s", cfg.V_over_D, config_mod.TABLE_WIND_SPEED,
                 config_mod.TABLE_PUPIL_DIAMETER, table_ratio)


def _plant(cfg):
    plant, basis, turb = build_default_plant(
        cfg.params, cfg.n_shapes, cfg.k_max, cfg.n_zernike, cfg.V_over_D, cfg.D_over_r0,
        n_basis=cfg.n_basis)
    return plant, basis, turb


def cmd_validate_fixtures(cfg, args):
    try:
        report = fixtures.validate_all(args.fixtures, cap=max(15, cfg.n_zernike))
    except (fixtures.FixtureError, KeyError, TypeError, ValueError) as exc:
        raise CommandError(EXIT_CONFIG, "fixture", str(exc))
    out = _outdir(cfg)
    write_json(out / "fixture_report.json", report)
    for name in ("table1", "table2", "table3"):
        for row in report[name]:
            line = f"{name} row {row['row']:>2}: {row['status']}"
            if row["status"] == "fail":
                line += "  " + json.dumps({k: v for k, v in row.items() if k != "status"},
                                          default=_default)
            print(line)
    print(f"orthonormality: {report['orthonormality']['status']} "
          f"(max err {report['orthonormality']['max_abs_err']:.2e})")
    return EXIT_OK if report["ok"] else EXIT_FAIL


def cmd_modes(cfg, args):
    shapes = plate_modes.solve_mode_shapes(cfg.params.nu, cfg.k_max, cfg.n_shapes,
                                           params=cfg.params)
    out = _outdir(cfg)
    rows = plate_modes.to_rows(shapes)
    write_csv(out / "modes.csv", ["k", "j", "lambda", "c", "a", "omega_sq"],
              [[r["k"], r["j"], r["lambda_kj"], r["c_kj"], r["a_kj"], r["omega_sq"]] for r in rows])
    for r in rows:
        print(f"k={r['k']} j={r['j']} lambda={r['lambda_kj']:.5f} c={r['c_kj']:.6g} "
              f"a={r['a_kj']:.5f} omega={np.sqrt(r['omega_sq']):.1f} rad/s")
    return EXIT_OK


def cmd_turbulence(cfg, args):
    model = turbulence.build_model(cfg.n_zernike, cfg.V_over_D, cfg.D_over_r0)
    out = _outdir(cfg)
    write_json(out / "turbulence.json", dict(
        modes=[m.noll_index for m in model.modes], F=model.F, G=model.G, P_inf=model.P_inf,
        V_over_D=model.V_over_D, D_over_r0=model.D_over_r0,
        lyapunov_residual=model.lyapunov_residual()))
    steps = args.steps
    if steps:
        path = turbulence.sample_path(model, cfg.dt, steps, cfg.seed)
        header, rows = turbulence.to_csv_rows(model, path, cfg.dt)
        write_csv(out / "turbulence_path.csv", header, rows)
    print(f"F diagonal: {np.round(np.diag(model.F), 1).tolist()}")
    print(f"Lyapunov residual: {model.lyapunov_residual():.2e}")
    return EXIT_OK


def cmd_synth(cfg, args):
    plant, _, _ = _plant(cfg)
    out = _outdir(cfg)
    if args.export_plant:
        (out / "plant.json").write_text(plant_to_json(plant, cfg.params) + "\n")
    try:
        res = hinf.gamma_bisect(plant, cfg.gamma_lo, cfg.gamma_hi, cfg.gamma_tol, cfg.gamma_cap)
    except hinf.InfeasibleError as exc:
        raise CommandError(EXIT_INFEASIBLE, "infeasible", str(exc),
                           dict(failing=hinf.failing_conditions(exc.diagnostics)
                                if exc.diagnostics else []))
    K = res["controller"]
    norm = hinf.closed_loop_hinf_norm(plant, K)
    K.certs["closed_loop_hinf_norm"] = norm
    K.certs.pop("_P"), K.certs.pop("_Q")
    (out / "controller.json").write_text(K.to_json() + "\n")
    report = dict(
        gamma=res["gamma"], gamma_lower=res["lower"],
        conditions={"i": K.certs["P_residual"] <= hinf.RESIDUAL_TOL,
                    "ii": K.certs["Q_residual"] <= hinf.RESIDUAL_TOL,
                    "iii": K.certs["rho_PQ"] < res["gamma"] ** 2},
        P_residual=K.certs["P_residual"], Q_residual=K.certs["Q_residual"],
        rho_PQ=K.certs["rho_PQ"], closed_loop_hinf_norm=norm,
        certified=norm <= res["gamma"],
        closed_loop_abscissa=K.certs["closed_loop_abscissa"],
    )
    write_json(out / "synthesis_report.json", report)
    print(f"gamma = {res['gamma']:.6g}, closed-loop norm = {norm:.6g}, rho(PQ) = {report['rho_PQ']:.3g}")
    return EXIT_OK


def _load_controller(plant, path):
    try:
        K = hinf.HinfController.from_json(Path(path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise CommandError(EXIT_CONFIG, "controller", f"cannot load controller {path}: {exc}")
    if (K.M.shape != (plant.order, plant.order) or K.N.shape != (plant.order, plant.C2.shape[0])
            or K.L.shape != (plant.B2.shape[1], plant.order)):
        raise CommandError(EXIT_CONFIG, "dimension",
                           f"controller order {K.M.shape[0]} does not match plant order {plant.order}")
    return K


def _timeseries_rows(r):
    return [[t, a, b, c] for t, a, b, c in zip(r.t, r.phi_tur_norm, r.phi_res_norm, r.u_norm)]


def cmd_simulate(cfg, args, montecarlo=False):
    plant, _, _ = _plant(cfg)
    K = None
    if not args.no_control:
        path = args.controller or Path(cfg.out) / "controller.json"
        K = _load_controller(plant, path)
    out = _outdir(cfg)
    header = ["t", "phi_tur_norm", "phi_res_norm", "u_norm"]
    try:
        if montecarlo or cfg.runs > 1:
            mc = sim.monte_carlo(plant, K, cfg.runs, cfg.dt, cfg.duration, cfg.seed,
                                 cfg.burn_in, workers=cfg.workers)
            first = sim.run_closed_loop(plant, K, cfg.dt, cfg.duration, cfg.seed, cfg.burn_in)
            write_csv(out / "timeseries.csv", header, _timeseries_rows(first))
            write_csv(out / "runs.csv", ["seed", "ratio", "mean_tur", "mean_res"],
                      [[s, r, a, b] for s, r, a, b in
                       zip(mc["seeds"], mc["ratios"], mc["mean_tur"], mc["mean_res"])])
            summary = dict(ratio=mc["mean"], stderr=mc["stderr"], runs=cfg.runs,
                           seeds=mc["seeds"], failures=mc["failures"],
                           controlled=K is not None, config=cfg.to_dict())
            if mc["failures"]:
                write_json(out / "summary.json", summary)
                raise CommandError(EXIT_SIM, "simulation",
                                   f"{len(mc['failures'])} runs failed", mc["failures"])
        else:
            r = sim.run_closed_loop(plant, K, cfg.dt, cfg.duration, cfg.seed, cfg.burn_in)
            write_csv(out / "timeseries.csv", header, _timeseries_rows(r))
            summary = dict(ratio=r.attenuation_ratio, stderr=None, runs=1, seeds=[cfg.seed],
                           failures={}, controlled=K is not None, config=cfg.to_dict())
    except sim.SimulationError as exc:
        raise CommandError(EXIT_SIM, "simulation", str(exc))
    write_json(out / "summary.json", summary)
    err = "" if summary["stderr"] is None else f" +/- {summary['stderr']:.3f}"
    print(f"attenuation ratio {summary['ratio']:.4f}{err} over {summary['runs']} run(s)")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="bimorph-ao", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate-fixtures", parents=[common], help="check reference tables")
    v.add_argument("--fixtures", help="directory holding table1/2/3.json")
    sub.add_parser("modes", parents=[common], help="solve and export plate modes")
    t = sub.add_parser("turbulence", parents=[common], help="build the shaping filter")
    t.add_argument("--steps", type=int, default=0, help="also export a sample path")
    s = sub.add_parser("synth", parents=[common], help="gamma-iterated H-infinity synthesis")
    s.add_argument("--export-plant", action="store_true")
    s.add_argument("--gamma-hi", type=float)
    s.add_argument("--gamma-cap", type=float)
    for name in ("simulate", "montecarlo"):
        c = sub.add_parser(name, parents=[common], help="closed-loop simulation")
        c.add_argument("--controller", help="controller JSON (default OUT/controller.json)")
        c.add_argument("--no-control", action="store_true")
        c.add_argument("--duration", type=float)
        c.add_argument("--workers", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = dict(seed=args.seed, runs=args.runs, out=args.out)
        for name in ("gamma_hi", "gamma_cap", "duration", "workers"):
            overrides[name] = getattr(args, name, None)
        if args.command == "simulate" and args.runs is None:
            overrides["runs"] = 1
        cfg = config_mod.load(args.config, **overrides)
        if getattr(args, "gamma_cap", None) and cfg.gamma_cap < cfg.gamma_hi:
            raise config_mod.ConfigError("gamma_cap must not be below gamma_hi")
        _note_wind_ratio(cfg)
        handlers = {
            "validate-fixtures": cmd_validate_fixtures,
            "modes": cmd_modes,
            "turbulence": cmd_turbulence,
            "synth": cmd_synth,
            "simulate": cmd_simulate,
            "montecarlo": lambda c, a: cmd_simulate(c, a, montecarlo=True),
        }
        return handlers[args.command](cfg, args)
    except config_mod.ConfigError as exc:
        return _fail(CommandError(EXIT_CONFIG, "config", str(exc)))
    except CommandError as exc:
        return _fail(exc)


def _fail(exc):
    payload = dict(error=exc.kind, message=str(exc), exit_code=exc.code, details=exc.details)
    sys.stderr.write(json.dumps(payload, default=_default) + "\n")
    return exc.code


if __name__ == "__main__":
    sys.exit(main())
