"""End-to-end experiment runner: simulate, calibrate, reconstruct, report.

All artifacts carry the config hash; outputs are byte-identical for a
fixed (config, seed, worker count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from . import config as cfgmod
from .calibration import (
    CalibrationFit,
    eta_point_from_samples,
    fit_fano_line,
    gain_scaling_check,
    mean_constancy_check,
)
from .detector import simulate_ensemble
from .errors import LinphotError
from .files import write_ensemble_csv, write_json
from .moments import analytic_voltage_moments, sample_moments
from .reconstruction import (
    ReconstructionResult,
    rebin,
    self_consistency_check,
    subtract_offset,
    with_reference_metrics,
)
from .streams import DARK, ETA_SERIES, RECONSTRUCTION


@dataclass(frozen=True)
class RunResult:
    out_dir: Path
    config_sha256: str
    calibration: CalibrationFit | None
    reconstruction: ReconstructionResult
    verdicts: dict
    files: dict


def _fmt(x, digits=9):
    return f"{x:.{digits}g}"


def run_experiment(config: cfgmod.RunConfig, out_dir, workers: int = 1) -> RunResult:
    """Run the full pipeline and write all artifacts into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sha = cfgmod.config_hash(config)
    files = {}

    cfgmod.save(config, out / "config.json")
    files["config"] = out / "config.json"

    source = cfgmod.build_source(config)
    gain = cfgmod.build_gain(config)
    dark = cfgmod.build_dark(config)
    sigma2_rel = gain.sigma2 / gain.gamma_bar**2
    header = {"config_sha256": sha}

    # dark record (zero-setting + blind-mode reuse); eta=0 yields dark only
    dark_ens = simulate_ensemble(
        source=source,
        eta=0.0,
        gain=gain,
        dark=dark,
        n_samples=config.n_samples,
        seed=config.seed,
        stream_key=(DARK,),
        workers=workers,
        keep_truth=False,
    )
    write_ensemble_csv(out / "dark.csv", dark_ens, extra_header=header)
    files["dark"] = out / "dark.csv"

    # efficiency sweep
    points = []
    dark_var = dark.sigma0**2
    for i, eta in enumerate(config.eta_series):
        ens = simulate_ensemble(
            source,
            eta,
            gain,
            dark,
            config.n_samples,
            config.seed,
            stream_key=(ETA_SERIES, i),
            workers=workers,
            keep_truth=False,
        )
        name = f"ensemble_{i:02d}_eta_{eta:.6f}.csv"
        write_ensemble_csv(out / name, ens, extra_header=header)
        files[f"ensemble_{i}"] = out / name
        points.append(eta_point_from_samples(eta, ens.samples, dark_variance=dark_var))

    # fano-line fit (flagged invalid rather than clamped when degenerate)
    fit = None
    fit_error = None
    if not any(p.mean_v > 5.0 * p.se_mean_v for p in points):
        fit_error = "no significant light at any efficiency; calibration skipped"
    else:
        try:
            fit = fit_fano_line(points, sigma2_rel=sigma2_rel)
        except LinphotError as exc:
            fit_error = str(exc)

    refs = [eta * source.mean_n for eta in config.eta_series]
    constancy = None
    if fit is not None and fit.valid and source.mean_n > 0:
        constancy = mean_constancy_check(
            points,
            fit.gamma_bar_est,
            refs,
            gamma_bar_se=fit.intercept_se,
            sigma2_rel=sigma2_rel,
        )

    scaling = None
    if config.gain_scale_factors and source.mean_n > 0:
        scaling = gain_scaling_check(
            source,
            gain,
            dark,
            list(config.eta_series),
            list(config.gain_scale_factors),
            config.n_samples,
            config.seed,
            workers=workers,
        )

    calibration_doc = {
        "schema_version": 1,
        "config_sha256": sha,
        "dark_variance_subtracted": dark_var,
        "fit": fit.to_dict() if fit is not None else None,
        "fit_error": fit_error,
        "checks": {
            "mean_constancy": constancy.to_dict() if constancy is not None else None,
            "gain_scaling": scaling.to_dict() if scaling is not None else None,
        },
    }
    write_json(out / "calibration.json", calibration_doc)
    files["calibration"] = out / "calibration.json"

    # reconstruction at the chosen efficiency
    rec_ens = simulate_ensemble(
        source,
        config.reconstruct_eta,
        gain,
        dark,
        config.reconstruction_n_samples,
        config.seed,
        stream_key=(RECONSTRUCTION,),
        workers=workers,
    )
    rec_name = f"reconstruction_eta_{config.reconstruct_eta:.6f}.csv"
    write_ensemble_csv(out / rec_name, rec_ens, extra_header=header)
    files["reconstruction_ensemble"] = out / rec_name

    dark_mean = float(dark_ens.samples.mean())
    shifted = subtract_offset(rec_ens, dark_mean)
    if fit is not None and fit.valid:
        gamma_used = fit.gamma_bar_est
        gamma_source = "calibration intercept"
        se_gamma = fit.intercept_se
    else:
        gamma_used = gain.gamma_bar
        gamma_source = "configured gain (calibration unavailable)"
        se_gamma = 0.0
    result = rebin(shifted, gamma_used)
    truth = rec_ens.truth
    result = with_reference_metrics(result, truth)
    mean_v = float(shifted.samples.mean())
    se_mean_v = float(shifted.samples.std(ddof=1) / math.sqrt(shifted.n_samples))
    consistency = self_consistency_check(
        result, mean_v, se_mean_v=se_mean_v, se_gamma_bar=se_gamma
    )

    counts = result.counts
    with open(out / "pm.csv", "w") as fh:
        fh.write(f"# config_sha256={sha}\n")
        fh.write(f"# gamma_bar={gamma_used!r}\n")
        fh.write(f"# n_samples={result.n_samples}\n")
        fh.write("m,pmf_hat,count\n")
        for m, (p, c) in enumerate(zip(result.pmf_hat, counts)):
            fh.write(f"{m},{p:.17e},{c}\n")
    files["pm"] = out / "pm.csv"

    metrics_doc = {
        "config_sha256": sha,
        "gamma_bar_used": gamma_used,
        "gamma_bar_source": gamma_source,
        "underflow_fraction": result.underflow_fraction,
        "mean_m_hat": result.mean_m_hat,
        "mean_v": mean_v,
        "tv_distance": result.tv_distance,
        "fidelity": result.fidelity,
        "self_consistency": consistency.to_dict(),
    }
    write_json(out / "pm_metrics.json", metrics_doc)
    files["pm_metrics"] = out / "pm_metrics.json"

    # report
    verdicts = {
        "calibration_valid": bool(fit is not None and fit.valid),
        "mean_constancy": None if constancy is None else constancy.passed,
        "gain_scaling": None if scaling is None else scaling.passed,
        "self_consistency": consistency.passed,
    }
    sample_m5 = sample_moments(shifted.samples, order=config.moment_order)
    analytic_m5 = analytic_voltage_moments(truth, gain, dark, order=config.moment_order)
    lines = [
        "# linphot experiment report",
        "",
        f"- config hash: `{sha}`",
        f"- seed: {config.seed}",
        f"- source: {source.label}, mean_n = {_fmt(source.mean_n)}",
        f"- gain: {gain.family}, gamma_bar = {_fmt(gain.gamma_bar)}, sigma = {_fmt(math.sqrt(gain.sigma2))}",
        f"- dark: sigma0 = {_fmt(dark.sigma0)}",
        "",
        "## Calibration (efficiency sweep)",
        "",
        "| eta | mean_v | fano_v | se(fano_v) |",
        "|----:|-------:|-------:|-----------:|",
    ]
    for p in points:
        lines.append(
            f"| {p.eta:.4f} | {_fmt(p.mean_v)} | {_fmt(p.fano_v)} | {_fmt(p.se_fano_v)} |"
        )
    lines.append("")
    if fit is not None:
        lines += [
            f"- slope = {_fmt(fit.slope)} +- {_fmt(fit.slope_se)}",
            f"- intercept = {_fmt(fit.intercept)} +- {_fmt(fit.intercept_se)} (r^2 = {_fmt(fit.r_squared)})",
            f"- gamma_bar_est = {_fmt(fit.gamma_bar_est)}"
            + (
                f", spread-corrected = {_fmt(fit.gamma_bar_corrected)}"
                if fit.gamma_bar_corrected is not None
                else ""
            ),
            f"- [{'PASS' if fit.valid else 'FAIL'}] calibration fit valid (positive intercept)",
        ]
    else:
        lines.append(f"- [FAIL] calibration fit unavailable: {fit_error}")
    if constancy is not None:
        lines.append(
            f"- [{'PASS' if constancy.passed else 'FAIL'}] mean constancy across eta ("
            f"pooled mean_v/<m> = {_fmt(constancy.pooled_ratio)})"
        )
    if scaling is not None:
        lines += ["", "## Gain-scaling check", ""]
        for row in scaling.rows:
            lines.append(
                f"- [{'PASS' if row.passed else 'FAIL'}] factor {row.factor:g}: "
                f"intercept ratio = {_fmt(row.ratio)} +- {_fmt(row.ratio_se)}"
            )
    lines += [
        "",
        "## Reconstruction",
        "",
        f"- ensemble: eta = {config.reconstruct_eta:.4f}, N = {result.n_samples}",
        f"- gamma_bar used = {_fmt(gamma_used)} ({gamma_source})",
        f"- underflow fraction = {_fmt(result.underflow_fraction)}",
        f"- reconstructed <m> = {_fmt(result.mean_m_hat)}, mean_v/gamma_bar = {_fmt(consistency.mean_v_over_gamma)}",
        f"- [{'PASS' if consistency.passed else 'FAIL'}] self-consistency |diff| = "
        f"{_fmt(consistency.difference)} <= {_fmt(consistency.tolerance)}",
        f"- TV distance vs generating P_m = {_fmt(result.tv_distance)}",
        f"- fidelity vs generating P_m = {_fmt(result.fidelity)}",
        "",
        "## Voltage moments at the reconstruction point",
        "",
        "| order | sample | analytic |",
        "|------:|-------:|---------:|",
    ]
    for r in range(2, config.moment_order + 1):
        lines.append(
            f"| {r} | {_fmt(sample_m5.central_moment(r))} | {_fmt(analytic_m5.central_moment(r))} |"
        )
    lines.append("")
    (out / "report.md").write_text("\n".join(lines))
    files["report"] = out / "report.md"

    return RunResult(
        out_dir=out,
        config_sha256=sha,
        calibration=fit,
        reconstruction=result,
        verdicts=verdicts,
        files=files,
    )
