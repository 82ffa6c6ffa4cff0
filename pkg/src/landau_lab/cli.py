"""Batch experiment runner.

    landau-lab run <config>
    landau-lab certify <config>
    landau-lab sweep <config-template> --param key=1..8 [--jobs N]

Every run writes ``run.meta`` (the full resolved config, the recurrence
horizon, artifact list and status) next to its CSV and SVG artifacts.  The
output directory comes from the config; the LANDAU_LAB_OUTPUT_ROOT
environment variable prepends an output root.  Exit codes: 0 ok, 2 config
error, 3 numeric failure, 4 certification fail.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import _SCHEMA, ExperimentConfig, load_config
from .errors import ConfigError, LandauLabError
from .linear import fit_decay_rate, root_scan, scan_stability_margin, smallness_criterion, monotone_criterion, solve_volterra
from .models import verify_analyticity, verify_decay
from .norms import AnalyticNormSpec, GlidingNormSpec, analytic_norm, gliding_norm, spatial_norm
from .echoes import run_echo_experiment
from .sim import init_state, recurrence_time, run
from .svgplot import Series, render_plot

__all__ = ["main", "run_experiment"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CERTIFY = 0, 2, 3, 4


def _out_dir(cfg: ExperimentConfig) -> Path:
    root = os.environ.get("LANDAU_LAB_OUTPUT_ROOT", "")
    d = Path(root) / cfg.get("output", "dir") if root else Path(cfg.get("output", "dir"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_meta(out: Path, cfg: ExperimentConfig, extra: dict, artifacts: list[str], status: str) -> None:
    lines = [
        f"status = {status}",
        f"version = {__version__}",
        f"experiment = {cfg.experiment}",
        f"config_hash = {hashlib.sha256(cfg.to_text().encode()).hexdigest()[:16]}",
    ]
    for section in sorted(cfg.values):
        for key in sorted(cfg.values[section]):
            v = cfg.values[section][key]
            if v is not None:
                lines.append(f"config.{section}.{key} = {v}")
    for key in sorted(extra):
        lines.append(f"{key} = {extra[key]}")
    lines.append(f"artifacts = {','.join(sorted(artifacts)) if artifacts else 'none'}")
    (out / "run.meta").write_text("\n".join(lines) + "\n")


def _partial_artifacts(out: Path) -> list[str]:
    return sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "run.meta")


def _fit_window(cfg: ExperimentConfig) -> tuple[float, float]:
    t_end = cfg.get("time", "t_end")
    t_min = cfg.get("linear", "fit_t_min")
    t_max = cfg.get("linear", "fit_t_max")
    return (0.25 * t_end if t_min is None else t_min, 0.75 * t_end if t_max is None else t_max)


def _decay_series(history, fit) -> list[Series]:
    amp = np.abs(history.values)
    series = [Series(label=f"|rho| k={history.k}", x=history.times, y=amp)]
    if fit is not None:
        y_fit = np.exp(fit.intercept - fit.rate * history.times)
        series.append(Series(label=f"fit rate {fit.rate:.3g}", x=history.times, y=y_fit, dashed=True, color="#d62728"))
    return series


def _experiment_linear(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str], int]:
    profile, interaction = cfg.build_profile(), cfg.build_interaction()
    dt, t_end = cfg.get("time", "dt"), cfg.get("time", "t_end")
    amp = cfg.get("linear", "amplitude")
    window = _fit_window(cfg)
    meta: dict = {}
    artifacts: list[str] = []
    all_series: list[Series] = []
    rows: list[list[str]] = []
    for k in cfg.get("linear", "k_list"):
        hist = solve_volterra(profile, interaction, lambda t, k=k: 0.5 * amp * profile.ft(k * t), k, t_end, dt)
        fit = fit_decay_rate(hist, window)
        scan = root_scan(profile, interaction, k)
        meta[f"rate_fit_k{k}"] = f"{fit.rate:.12g}"
        meta[f"rate_fit_r2_k{k}"] = f"{fit.quality:.12g}"
        meta[f"rate_predicted_k{k}"] = f"{scan.rate:.12g}"
        meta[f"lambda_star_k{k}"] = f"{scan.lambda_star:.12g}"
        all_series.extend(_decay_series(hist, fit))
        for t, v in zip(hist.times, hist.values):
            rows.append([f"{t:.17g}", str(k), f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"])
    with open(out / "modes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "re", "im", "abs"])
        w.writerows(rows)
    artifacts.append("modes.csv")
    (out / "decay.svg").write_text(render_plot(
        all_series, title="mode decay and fitted rates", xlabel="t", ylabel="|rho|", logy=True))
    artifacts.append("decay.svg")
    return meta, artifacts, EXIT_OK


def _experiment_nonlinear(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str], int]:
    profile, interaction = cfg.build_profile(), cfg.build_interaction()
    log = run(
        profile, interaction, cfg.build_perturbation(),
        nx=cfg.get("grid", "nx"), nv=cfg.get("grid", "nv"), vmax=cfg.get("grid", "vmax"),
        dt=cfg.get("time", "dt"), t_end=cfg.get("time", "t_end"),
        observe_stride=cfg.get("time", "observe_stride"),
        k_obs=cfg.get("observables", "k_obs"), ftilde_points=cfg.get("observables", "ftilde"),
    )
    artifacts = ["observables.csv", "modes.csv"]
    log.write_observables_csv(out / "observables.csv")
    log.write_modes_csv(out / "modes.csv")
    if log.ftilde_points:
        log.write_ftilde_csv(out / "ftilde.csv")
        artifacts.append("ftilde.csv")
    hist = log.mode_history(1)
    window = _fit_window(cfg)
    fit = None
    try:
        fit = fit_decay_rate(hist, window)
    except LandauLabError:
        pass
    meta = {"recurrence_time": f"{log.recurrence[1]:.12g}"}
    if fit is not None:
        meta["rate_fit_k1"] = f"{fit.rate:.12g}"
        meta["rate_fit_r2_k1"] = f"{fit.quality:.12g}"
    (out / "decay.svg").write_text(render_plot(
        _decay_series(hist, fit), title="density mode decay", xlabel="t", ylabel="|rho|", logy=True))
    (out / "gradient_growth.svg").write_text(render_plot(
        [Series(label="|grad_v f|_L2", x=log.times, y=log.gradv_l2)],
        title="velocity-gradient growth (filamentation)", xlabel="t", ylabel="L2 norm", logy=True))
    artifacts += ["decay.svg", "gradient_growth.svg"]
    return meta, artifacts, EXIT_OK


def _experiment_certify(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str], int]:
    profile, interaction = cfg.build_profile(), cfg.build_interaction()
    analyticity = verify_analyticity(profile, eta_max=cfg.get("certify", "eta_max"))
    decay = verify_decay(interaction, k_max=cfg.get("certify", "decay_k_max"))
    margin = scan_stability_margin(
        profile, interaction,
        lambda_strip=cfg.get("certify", "lambda_strip"),
        kappa=cfg.get("certify", "kappa"),
        k_max=cfg.get("certify", "k_max"),
    )
    mono = monotone_criterion(profile, interaction)
    small = smallness_criterion(profile, interaction)
    ok = analyticity.passed and decay.passed and margin.passed
    report = [
        f"certified = {str(ok).lower()}",
        f"profile = {profile.name}",
        f"interaction = {interaction.kind}",
        f"analyticity_passed = {str(analyticity.passed).lower()}",
        f"analyticity_worst_ratio = {analyticity.worst_ratio:.12g}",
        f"analyticity_series_ratio = {'' if analyticity.series_ratio is None else format(analyticity.series_ratio, '.12g')}",
        f"decay_passed = {str(decay.passed).lower()}",
        f"decay_worst_k = {decay.worst_k}",
        f"monotone_criterion = {str(mono).lower()}",
        f"smallness_criterion = {small:.12g}",
        f"smallness_passed = {str(small < 1.0).lower()}",
    ]
    (out / "stability_report.txt").write_text("\n".join(report) + "\n" + margin.to_text())
    meta = {"certified": str(ok).lower(), "kappa_est": f"{margin.kappa_est:.12g}"}
    return meta, ["stability_report.txt"], EXIT_OK if ok else EXIT_CERTIFY


def _experiment_echo(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str], int]:
    profile, interaction = cfg.build_profile(), cfg.build_interaction()
    rep = run_echo_experiment(
        profile, interaction,
        k_initial=cfg.get("echo", "k_initial"), kick_mode=cfg.get("echo", "kick_mode"),
        tau_kick=cfg.get("echo", "tau_kick"),
        amp_initial=cfg.get("echo", "amp_initial"), amp_kick=cfg.get("echo", "amp_kick"),
        nx=cfg.get("grid", "nx"), nv=cfg.get("grid", "nv"), vmax=cfg.get("grid", "vmax"),
        dt=cfg.get("time", "dt"), observe_stride=cfg.get("time", "observe_stride"),
        floor=cfg.get("echo", "floor"), min_separation=cfg.get("echo", "min_separation"),
    )
    with open(out / "echoes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "ell", "tau_kick", "t_predicted", "t_detected", "amplitude", "rel_error"])
        w.writerows(rep.to_csv_rows())
    hist = rep.log.mode_history(abs(rep.k_response))
    vlines = [(p.t_echo, "predicted") for p in rep.predictions]
    vlines += [(p.time, "detected") for p in rep.peaks]
    (out / "echo_timeline.svg").write_text(render_plot(
        [Series(label=f"|rho| k={abs(rep.k_response)}", x=hist.times, y=np.abs(hist.values))],
        title="echo timeline", xlabel="t", ylabel="|rho|", logy=True, vlines=vlines))
    detected = [p for _, p, _ in rep.matches if p is not None]
    meta = {
        "echo_predicted_t": f"{rep.predictions[0].t_echo:.12g}",
        "echo_detected": str(bool(detected)).lower(),
        "recurrence_time": f"{rep.log.recurrence[1]:.12g}",
    }
    if detected:
        meta["echo_detected_t"] = f"{detected[0].time:.12g}"
        meta["echo_rel_error"] = f"{rep.matches[0][2]:.12g}"
    return meta, ["echoes.csv", "echo_timeline.svg"], EXIT_OK


def _experiment_norms(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[str], int]:
    profile, interaction = cfg.build_profile(), cfg.build_interaction()
    sec = cfg.values["norms"]
    p = {"1": 1, "2": 2, "inf": np.inf}[sec["p"]]
    times = sorted(sec["times"])
    dt = cfg.get("time", "dt")
    rows = []
    for t in times:
        if abs(round(t / dt) * dt - t) > 1e-9:
            raise ConfigError(f"[norms] times entry {t:g} is not a multiple of dt = {dt:g}")
    for t in times:
        if t == 0.0:
            state = init_state(profile, cfg.build_perturbation(),
                               cfg.get("grid", "nx"), cfg.get("grid", "nv"), cfg.get("grid", "vmax"))
        else:
            state = run(profile, interaction, cfg.build_perturbation(),
                        nx=cfg.get("grid", "nx"), nv=cfg.get("grid", "nv"), vmax=cfg.get("grid", "vmax"),
                        dt=dt, t_end=t, observe_stride=int(round(t / dt)),
                        k_obs=cfg.get("observables", "k_obs")).final_state
        tau = t if sec["tau_mode"] == "time" else sec["tau"]
        spec = GlidingNormSpec(lam=sec["lam"], mu=sec["mu"], gamma=sec["gamma"], p=p,
                               tau=tau, n_max=sec["n_max"], k_max=sec["k_max"])
        g = gliding_norm(state, spec)
        rows.append([f"{t:.17g}", "gliding", f"{sec['lam']:.17g}", f"{sec['mu']:.17g}",
                     f"{sec['gamma']:.17g}", sec["p"], f"{tau:.17g}", f"{g.value:.17g}", f"{g.remainder:.17g}"])
        raw = state.rho_hat(sec["k_max"])
        floor = 1e-13 * float(np.max(np.abs(raw)))
        coeffs = {k: z for k, z in enumerate(raw) if abs(z) >= floor}
        f = spatial_norm(coeffs, weight=sec["lam"] * tau + sec["mu"], gamma=sec["gamma"])
        rows.append([f"{t:.17g}", "spatial", f"{sec['lam']:.17g}", f"{sec['mu']:.17g}",
                     f"{sec['gamma']:.17g}", "", f"{tau:.17g}", f"{f:.17g}", "0"])
        a = analytic_norm(state, AnalyticNormSpec(lam=max(sec["lam"], 1e-6), mu=max(sec["mu"], 1e-6), beta=0.1))
        rows.append([f"{t:.17g}", "analytic", f"{sec['lam']:.17g}", f"{sec['mu']:.17g}",
                     f"{sec['gamma']:.17g}", "", f"{tau:.17g}", f"{a:.17g}", "0"])
    with open(out / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "family", "lambda", "mu", "gamma", "p", "tau", "value", "remainder"])
        w.writerows(rows)
    return {}, ["norms.csv"], EXIT_OK


_DISPATCH = {
    "linear_damping": _experiment_linear,
    "nonlinear_damping": _experiment_nonlinear,
    "certify": _experiment_certify,
    "echo": _experiment_echo,
    "norms": _experiment_norms,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute one experiment; writes artifacts and run.meta, returns exit code."""
    out = _out_dir(cfg)
    try:
        meta, artifacts, code = _DISPATCH[cfg.experiment](cfg, out)
    except (ConfigError, ValueError) as exc:
        # ValueError = a module precondition the schema cannot see (bad
        # ranges, off-grid kick times, ...): still a configuration problem
        _write_meta(out, cfg, {"error": str(exc)}, _partial_artifacts(out), status="failed:config")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LandauLabError as exc:
        _write_meta(out, cfg, {"error": str(exc)}, _partial_artifacts(out), status="failed:numeric")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        grid = cfg.values["grid"]
        meta.setdefault("recurrence_time", f"{recurrence_time(grid['nv'], grid['vmax'], 1):.12g}")
    except Exception:
        pass
    _write_meta(out, cfg, meta, artifacts, status="ok" if code == EXIT_OK else "certification_failed")
    return code


def _parse_param(spec: str) -> tuple[str, list[str]]:
    if "=" not in spec:
        raise ConfigError(f"--param expects key=values, got {spec!r}")
    key, raw = spec.split("=", 1)
    key = key.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        values = [str(v) for v in range(int(lo), int(hi) + 1)]
    else:
        values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"--param {spec!r} produced no values")
    return key, values


def _resolve_param_key(key: str) -> tuple[str, str]:
    if "." in key:
        section, name = key.split(".", 1)
        if section in _SCHEMA and name in _SCHEMA[section]:
            return section, name
        raise ConfigError(f"unknown sweep key {key!r}")
    hits = [(s, key) for s, keys in _SCHEMA.items() if key in keys]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise ConfigError(f"unknown sweep key {key!r}")
    raise ConfigError(f"ambiguous sweep key {key!r}: " + ", ".join(f"{s}.{k}" for s, k in hits))


def _sweep_worker(args: tuple[str, str, str, str, str]) -> tuple[str, int]:
    path, section, key, value, out_sub = args
    cfg = load_config(path)
    cfg = cfg.replace(section, key, value)
    cfg = cfg.replace("output", "dir", str(Path(cfg.get("output", "dir")) / out_sub))
    return out_sub, run_experiment(cfg)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="landau-lab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"landau-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment named in the config")
    p_run.add_argument("config")
    p_cert = sub.add_parser("certify", help="run the stability certification for the config")
    p_cert.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="fan a config template out over a parameter range")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="key=lo..hi or key=v1,v2,... (key may be section.key)")
    p_sweep.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            return run_experiment(load_config(args.config))
        if args.command == "certify":
            cfg = load_config(args.config)
            if cfg.experiment != "certify":
                cfg = cfg.replace("experiment", "name", "certify")
            return run_experiment(cfg)
        if args.command == "sweep":
            key, values = _parse_param(args.param)
            section, name = _resolve_param_key(key)
            load_config(args.config)  # fail fast on template errors
            tasks = [(args.config, section, name, v, f"{name}={v}") for v in values]
            codes = {}
            if args.jobs > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    for sub_dir, code in pool.map(_sweep_worker, tasks):
                        codes[sub_dir] = code
            else:
                for t in tasks:
                    sub_dir, code = _sweep_worker(t)
                    codes[sub_dir] = code
            for sub_dir in sorted(codes):
                print(f"{sub_dir}: exit {codes[sub_dir]}")
            return max(codes.values())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LandauLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
