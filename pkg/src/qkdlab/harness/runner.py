"""Scenario execution.

Each scenario splits its work into independent units (a trial or a fixed-size
block of trials).  Unit ``i`` draws only from
``derive_trial_rng(master_seed, i, <scenario site label>)`` and results are
merged in unit order, so the output does not depend on ``workers``.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .. import bb84, cv_channel, decoy, key_rate, quantum_core
from ..rng import derive_trial_rng
from .config import ConfigError, Scenario, ScenarioConfig
from .report import ScenarioReport, summarize

#: Channel uses (or discrimination trials) per random substream.
SAMPLE_BLOCK = 8192
#: Hypothesis-test trials per random substream.
TEST_BLOCK = 64


class InvariantViolation(RuntimeError):
    """A conservation law or range invariant failed during a run."""


def _map_units(fn: Callable[[int], dict], n_units: int, workers: int) -> list[dict]:
    if workers <= 1 or n_units <= 1:
        return [fn(i) for i in range(n_units)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_units)))


def _concat(parts: Sequence[dict], key: str) -> np.ndarray:
    arrays = [np.atleast_1d(np.asarray(p[key], dtype=float)) for p in parts if key in p]
    return np.concatenate(arrays) if arrays else np.empty(0)


def _blocks(n_trials: int, block: int) -> list[tuple[int, int]]:
    return [(s, min(block, n_trials - s)) for s in range(0, n_trials, block)]


def _check_probabilities(report: ScenarioReport, names: Sequence[str]) -> None:
    for name in names:
        m = report.metrics.get(name)
        if m is not None and m.n and not -1e-12 <= m.mean <= 1 + 1e-12:
            raise InvariantViolation(f"metric {name} = {m.mean} is not a probability")


# --- CV scenarios --------------------------------------------------------------------

def _cv_params(p: dict) -> cv_channel.CvChannelParams:
    return cv_channel.CvChannelParams(
        T=p["T"], V=p["V"], var_nA=p["var_nA"], var_nB=p["var_nB"],
        var_nE_passive=p["var_nE_passive"], var_nE_het=p["var_nE_het"], delta_T=p["delta_T"],
    )


def _run_cv(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    params = _cv_params(p)
    scen = (cv_channel.Scenario.PASSIVE if config.scenario is Scenario.CV_PASSIVE
            else cv_channel.Scenario.HETERODYNE_RESEND)
    blocks = _blocks(config.n_trials, SAMPLE_BLOCK)
    label = config.scenario.value

    def unit(i: int) -> dict:
        rng = derive_trial_rng(config.master_seed, i, label)
        m = rng.normal(0.0, math.sqrt(params.V), blocks[i][1])
        tr = cv_channel.sample(scen, m, params, rng)
        out = cv_channel.squared_errors(tr, params)
        out["var_m_b"] = tr.m_B ** 2
        out["var_m_e"] = tr.m_E ** 2
        out["cov_m_m_b"] = tr.m * tr.m_B
        out["var_m_a_minus_m"] = (tr.m_A - tr.m) ** 2
        return out

    parts = _map_units(unit, len(blocks), workers)
    mom = cv_channel.analytic_moments(params, scen)
    refs = cv_channel.analytic_mses(params, scen)
    refs.update(
        var_m_b=mom.var("m_B"), var_m_e=mom.var("m_E"),
        cov_m_m_b=mom.covariance("m", "m_B"), var_m_a_minus_m=params.var_nA,
    )
    for name in ("mse_B_of_m", "mse_E_of_m", "mse_A_of_mB", "mse_E_of_mB",
                 "var_m_b", "var_m_e", "cov_m_m_b", "var_m_a_minus_m"):
        report.metrics[name.lower()] = summarize(_concat(parts, name), refs[name])
    for m in report.metrics.values():
        if not math.isfinite(m.mean):
            raise InvariantViolation("non-finite quadrature statistic")

    infos = cv_channel.channel_mutual_infos(params, scen)
    rate = key_rate.channel_rate(infos["I_AB"], infos["I_AE"])
    report.values.update(
        i_ab=infos["I_AB"], i_ae=infos["I_AE"], i_be=infos["I_BE"], channel_rate=rate.rate,
        var_na=params.var_nA,
    )
    report.caveats.extend(rate.caveats)


def _run_excess(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    params = _cv_params(p)
    blocks = _blocks(config.n_trials, TEST_BLOCK)
    seed = config.master_seed

    def stats_for(hyp: str, site: str) -> Callable[[int], dict]:
        def unit(i: int) -> dict:
            rng = derive_trial_rng(seed, i, f"{config.scenario.value}/{site}")
            return {"s": cv_channel.variance_statistics(
                params, p["n_pulses"], blocks[i][1], hyp, rng, p["statistic"])}
        return unit

    calib = _concat(_map_units(stats_for("H0", "calibration"), len(blocks), workers), "s")
    null = _concat(_map_units(stats_for("H0", "null"), len(blocks), workers), "s")
    alt = _concat(_map_units(stats_for("H1", "alternative"), len(blocks), workers), "s")
    threshold = cv_channel.calibrate_threshold(calib, p["alpha"])

    report.metrics["false_alarm"] = summarize(null > threshold, p["alpha"])
    report.metrics["power"] = summarize(alt > threshold)
    if p["statistic"] == "variance":
        h0 = cv_channel.analytic_moments(params, cv_channel.Scenario.PASSIVE).var("m_B")
        h1 = cv_channel.analytic_moments(params, cv_channel.Scenario.HETERODYNE_RESEND).var("m_B")
    else:
        h0 = h1 = None
    report.metrics["statistic_h0"] = summarize(null, h0)
    report.metrics["statistic_h1"] = summarize(alt, h1)
    report.values.update(
        threshold=threshold,
        attack_excess=params.T * params.var_nE_het,
        nuisance_half_width=params.delta_T * params.V,
    )
    report.notes["statistic"] = p["statistic"]
    _check_probabilities(report, ("false_alarm", "power"))


# --- BB84 ------------------------------------------------------------------------------

def bb84_config_from(p: dict) -> bb84.Bb84Config:
    return bb84.Bb84Config(
        n_sent=p["n_sent"], eta=p["eta"], attack_fraction=p["attack_fraction"],
        attack_basis=quantum_core.MeasBasis(p["attack_basis_angle"]),
        deletion_policy=bb84.DeletionPolicy(p["deletion_policy"]),
        deletion_threshold=p["deletion_threshold"], check_fraction=p["check_fraction"],
        qber_threshold=p["qber_threshold"], intrinsic_error=p["intrinsic_error"],
        match_arrival_rate=p["match_arrival_rate"],
    )


def _run_bb84(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    try:
        cfg = bb84_config_from(config.resolved)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def unit(i: int) -> dict:
        rng = derive_trial_rng(config.master_seed, i, config.scenario.value)
        tr = bb84.run_session(cfg, rng)
        if np.any(tr.deleted & tr.arrived):
            raise InvariantViolation("qubit both deleted and arrived")
        if tr.checked_positions.size + tr.key_positions.size != tr.sifted_positions.size:
            raise InvariantViolation("checked + key != sifted")
        key = tr.sifted_key
        n = tr.n_sent
        out = {
            "aborted": float(tr.aborted),
            "arrival_rate": np.count_nonzero(tr.arrived) / n,
            "sift_rate": tr.sifted_positions.size / n,
            "deleted_rate": np.count_nonzero(tr.deleted) / n,
            "zeros": 0 if tr.aborted else int(np.count_nonzero(key == 0)),
            "key_len": 0 if tr.aborted else int(key.size),
        }
        if not math.isnan(tr.qber_observed):
            out["qber_observed"] = tr.qber_observed
        if not tr.aborted and key.size:
            out["zero_fraction"] = float(np.count_nonzero(key == 0)) / key.size
        return out

    parts = _map_units(unit, config.n_trials, workers)
    exp = bb84.expected_session(cfg)
    report.metrics["qber_observed"] = summarize(_concat(parts, "qber_observed"), exp.qber)
    report.metrics["zero_fraction"] = summarize(_concat(parts, "zero_fraction"), exp.zero_fraction)
    report.metrics["aborted"] = summarize(_concat(parts, "aborted"))
    report.metrics["arrival_rate"] = summarize(_concat(parts, "arrival_rate"), exp.arrival_rate)
    report.metrics["sift_rate"] = summarize(_concat(parts, "sift_rate"), exp.sift_rate)
    report.metrics["deleted_rate"] = summarize(
        _concat(parts, "deleted_rate"),
        cfg.attack_fraction * (1.0 - bb84.eve_keep_rate(cfg)),
    )
    report.values.update(
        attack_fraction=cfg.attack_fraction,
        per_attacked_error=bb84.BREIDBART_ERROR,
        attacked_sifted_fraction=exp.attacked_sifted_fraction,
        expected_qber=exp.qber,
        expected_zero_fraction=exp.zero_fraction,
    )
    _check_probabilities(report, ("qber_observed", "zero_fraction", "aborted"))

    zeros = sum(int(p["zeros"]) for p in parts)
    length = sum(int(p["key_len"]) for p in parts)
    if length == 0:
        report.add_error("all_aborted", "every session aborted or produced an empty key")
        return
    frac = zeros / length
    fluct = 1.0 / (2.0 * math.sqrt(length))
    report.values.update(
        pooled_zero_fraction=frac, pooled_key_length=length,
        expected_fluctuation=fluct, bias_sigmas=(frac - 0.5) / fluct,
    )


# --- decoy -----------------------------------------------------------------------------

def _run_decoy_pns(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    scheme = decoy.DecoyScheme(((p["s_signal"], p["p_signal"]), (p["s_decoy"], 1.0 - p["p_signal"])))
    eta = p["eta"]
    attack = p["attack"] != "none"
    strength = p["strength"] if attack else 0.0

    def unit(i: int) -> dict:
        rng = derive_trial_rng(config.master_seed, i, config.scenario.value)
        pulses = decoy.emit_pulses(scheme, p["n_pulses"], rng)
        arr = decoy.transmit_naive_pns(pulses, scheme, eta, rng, strength)
        chk = decoy.decoy_yield_check(arr, eta, p["tolerance_sigmas"])
        clicks = int(np.count_nonzero(arr.clicked))
        out = {"alarm": float(chk.alarm),
               "tagged_share": np.count_nonzero(arr.pulses.tagged) / clicks if clicks else 0.0}
        for s, y in zip(chk.s_levels, chk.yields):
            out[f"yield_{_level_name(scheme, s)}"] = y
        return out

    parts = _map_units(unit, config.n_trials, workers)
    r, q = decoy.naive_pns_forward_probs(scheme, eta)
    report.metrics["alarm"] = summarize(
        _concat(parts, "alarm"),
        decoy.nominal_false_alarm(p["tolerance_sigmas"], 2) if not attack else None,
    )
    for s, prob in scheme.levels:
        name = _level_name(scheme, s)
        honest = float(decoy.honest_yield(s, eta))
        attacked = r * float(decoy.poisson_multi(s)) + q * s * math.exp(-s)
        ref = strength * attacked + (1.0 - strength) * honest
        report.metrics[f"yield_{name}"] = summarize(_concat(parts, f"yield_{name}"), ref)
        report.values[f"honest_yield_{name}"] = honest
        report.values[f"s_{name}"] = s
    report.metrics["tagged_share"] = summarize(_concat(parts, "tagged_share"))
    report.values.update(
        multi_forward_prob=r, single_forward_prob=q,
        nominal_false_alarm=decoy.nominal_false_alarm(p["tolerance_sigmas"], 2),
        breach_signal=float(decoy.pns_breach_condition(p["s_signal"], eta)),
    )
    _check_probabilities(report, ["alarm", "tagged_share"] + [k for k in report.metrics if k.startswith("yield_")])


def _level_name(scheme: decoy.DecoyScheme, s: float) -> str:
    return "signal" if s == scheme.levels[scheme.signal_index][0] else "decoy"


def _run_decoy_cbs(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    priors = (p["prior_a"], 1.0 - p["prior_a"])
    scheme = decoy.DecoyScheme(((p["s_a"], priors[0]), (p["s_b"], priors[1])))
    kappa = p["kappa"]
    blocks = _blocks(config.n_trials, SAMPLE_BLOCK)

    def unit(i: int) -> dict:
        rng = derive_trial_rng(config.master_seed, i, config.scenario.value)
        pulses = decoy.emit_pulses(scheme, blocks[i][1], rng, sample_counts=False)
        split = decoy.coherent_split(pulses, kappa)
        energy = np.abs(split.eve_split_amplitude) ** 2 + np.abs(split.forwarded_amplitude) ** 2
        if np.max(np.abs(energy - split.s_level), initial=0.0) > 1e-12:
            raise InvariantViolation("coherent split does not conserve energy")
        counts = decoy.count_photons(split.eve_split_amplitude, rng)
        truth_a = split.level_index == 0
        guess_a = decoy.likelihood_ratio_decide(counts, kappa * p["s_a"], kappa * p["s_b"], priors)
        return {"success": (guess_a == truth_a).astype(float), "eve_photons": counts}

    parts = _map_units(unit, len(blocks), workers)
    analytic = decoy.analytic_lr_success(kappa * p["s_a"], kappa * p["s_b"], priors)
    report.metrics["success"] = summarize(_concat(parts, "success"), analytic)
    report.metrics["eve_photons"] = summarize(
        _concat(parts, "eve_photons"), kappa * float(scheme.probabilities @ scheme.s_values))
    h_err = decoy.helstrom_error(math.sqrt(kappa * p["s_a"]), math.sqrt(kappa * p["s_b"]), priors)
    report.values.update(
        analytic_success=analytic, helstrom_error=h_err, helstrom_success=1.0 - h_err,
    )
    _check_probabilities(report, ("success",))


# --- deterministic scenarios -----------------------------------------------------------------

def _run_key_rate(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    n_steps = int(math.floor((p["qber_hi"] - p["qber_lo"]) / p["qber_step"] + 1e-9))
    grid = [round(p["qber_lo"] + k * p["qber_step"], 12) for k in range(n_steps + 1)]
    rows = []
    for q in grid:
        rows.append([q, key_rate.key_rate_ideal(q), key_rate.binary_entropy(q),
                     key_rate.leak_ec(p["f_factor"], p["n"], q)])
    report.sweep_columns = ["qber", "rate", "binary_entropy", "leak_ec"]
    report.sweep_rows = rows
    crossing = optimize.brentq(key_rate.key_rate_ideal, 1e-6, 0.5 - 1e-9, xtol=1e-15)
    report.values["zero_crossing_qber"] = crossing
    if p["n"] >= 2:
        log_ie, log_p1 = key_rate.ie_p1_profile(p["lam"], p["n"])
        report.values.update(log2_ie=log_ie, log2_p1=log_p1, log2_uniform_guess=-p["n"])
        report.caveats.append(key_rate.CAVEAT_P1_ORDER)
    report.caveats.extend(key_rate.IDEAL_RATE_CAVEATS)


def _run_optimizer(config: ScenarioConfig, report: ScenarioReport, workers: int) -> None:
    p = config.resolved
    if p["ensemble"] == "bb84":
        states, bits, priors = quantum_core.bb84_ensemble()
    else:
        states, bits, priors = [quantum_core.bb84_state(0, "Z")], [0], [1.0]
    res = quantum_core.optimal_deletion_advantage(
        states, bits, priors, p["deletion_budget"], p["basis_grid"], p["n_thresholds"])
    report.values.update(
        success_prob=res.success_prob, best_basis_angle=res.best_basis_angle,
        kept_fraction=res.kept_fraction, threshold=res.threshold,
        breidbart_success=quantum_core.BREIDBART_SUCCESS,
    )
    report.notes["best_rule"] = res.best_rule


_RUNNERS = {
    Scenario.CV_PASSIVE: _run_cv,
    Scenario.CV_HETERODYNE_RESEND: _run_cv,
    Scenario.CV_EXCESS_NOISE_TEST: _run_excess,
    Scenario.BB84_PRS: _run_bb84,
    Scenario.DECOY_PNS: _run_decoy_pns,
    Scenario.DECOY_CBS: _run_decoy_cbs,
    Scenario.KEY_RATE_SWEEP: _run_key_rate,
    Scenario.DELETION_OPTIMIZER: _run_optimizer,
}


def run_scenario(config: ScenarioConfig, workers: int = 1) -> ScenarioReport:
    """Execute ``config`` and return its report.

    Failures inside the scenario become entries in ``report.errors``
    (codes ``no_trials``, ``all_aborted``, ``invariant_violation``,
    ``config_error``, ``runtime_error``) instead of exceptions.
    """
    report = ScenarioReport(config)
    if config.n_trials == 0:
        report.add_error("no_trials", "no trials")
        return report
    start = time.perf_counter()
    try:
        _RUNNERS[config.scenario](config, report, workers)
    except InvariantViolation as exc:
        report.add_error("invariant_violation", str(exc))
    except ConfigError as exc:
        report.add_error("config_error", str(exc))
    except (ValueError, ArithmeticError, MemoryError) as exc:
        report.add_error("runtime_error", f"{type(exc).__name__}: {exc}")
    report.wall_clock_s = time.perf_counter() - start
    return report


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """Parse ``key=lo:hi:step`` into the key and its inclusive grid."""
    try:
        key, rng_text = text.split("=", 1)
        lo, hi, step = (float(x) for x in rng_text.split(":"))
    except ValueError:
        raise ConfigError(f"sweep {text!r} is not of the form key=lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise ConfigError(f"sweep {text!r} needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return key.strip(), [round(lo + k * step, 12) for k in range(n + 1)]


def run_sweep(config: ScenarioConfig, key: str, values: Sequence[float],
              workers: int = 1) -> list[tuple[float, ScenarioReport]]:
    out = []
    for v in values:
        cfg = config.with_parameters(**{key: v})
        out.append((v, run_scenario(cfg, workers)))
    return out
