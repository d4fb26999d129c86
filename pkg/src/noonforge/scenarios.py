"""Scenario runners. Each writes CSV/JSON outputs into a directory and returns a summary."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import platform
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy
import sklearn
from threadpoolctl import threadpool_limits

from .analysis import fit_sinusoid, gaussian_width, loglinear_fit
from .cat_engineering import best_css_fit, remote_bob_state, wigner
from .config import ScenarioConfig
from .errors import ConfigError
from .fock_core import FockKet, apply_channel, fidelity
from .heralding import (
    DetectorModel,
    herald_noon,
    noon_factorization,
    noon_herald_probability,
    noon_ket,
    photon_subtract,
)
from .homodyne import (
    QuadratureSetting,
    joint_moment,
    optimal_squeezing,
    sample_homodyne,
    sample_joint_homodyne,
)
from .optical_circuit import DistinguishabilityModel, db_to_transmission, loss_channel
from .tomography import MaxLikTomography

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.12g"
FACTORIZATION_CUTOFF = 8
SELFTEST_CUTOFF = 4


class _Outputs:
    """Writes result files and remembers their content hashes."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def _record(self, name):
        self.files[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()

    def csv(self, name, header, rows):
        rows = np.asarray(rows, dtype=float)
        np.savetxt(self.root / name, rows, fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")
        self._record(name)

    def json(self, name, obj):
        (self.root / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        self._record(name)

    def text(self, name, text):
        (self.root / name).write_text(text)
        self._record(name)

    def adopt(self, name):
        self._record(name)


def _detector(cfg):
    return DetectorModel(cfg.eta_spcm, cfg.photon_resolving)


def _gamma(cfg):
    return math.sqrt(cfg.gamma_sq)


def run_hom_dip(cfg: ScenarioConfig, out: _Outputs) -> dict:
    rows = []
    for tau in cfg.delays_ps:
        model = DistinguishabilityModel(tau, cfg.coherence_time_ps)
        h = herald_noon(_gamma(cfg), _detector(cfg), tuple(cfg.arm_loss_db), delay=model, cutoff=cfg.cutoff)
        rho = h.state
        w11 = rho.element((1, 1), (1, 1)).real
        p20, p02 = rho.element((2, 0), (2, 0)).real, rho.element((0, 2), (0, 2)).real
        coh = abs(rho.element((2, 0), (0, 2)))
        depth = 1.0 - 2.0 * w11 / (p20 + p02)
        rows.append([tau, w11, p20, p02, coh, depth, model.classical_visibility(), h.probability])
    rows = np.array(rows)
    out.csv(
        "hom_dip.csv",
        ["delay_ps", "weight_11", "pop_20", "pop_02", "coherence_abs", "dip_depth", "classical_visibility",
         "herald_probability"],
        rows,
    )
    quantum = gaussian_width(rows[:, 0], rows[:, 5])
    classical = gaussian_width(rows[:, 0], rows[:, 6])
    summary = {
        "min_weight_delay_ps": float(rows[np.argmin(rows[:, 1]), 0]),
        "quantum_width_ps": quantum,
        "classical_width_ps": classical,
        "width_ratio_quantum_to_classical": quantum / classical,
        "width_ratio_classical_to_quantum": classical / quantum,
    }
    out.json("hom_dip_summary.json", summary)
    return summary


def _tomography_settings(n):
    phases = [math.pi * k / n for k in range(n)]
    return [QuadratureSetting(a, b) for a in phases for b in phases]


def run_noon_loss_scan(cfg: ScenarioConfig, out: _Outputs) -> dict:
    target = noon_ket(2, cfg.cutoff).to_density()
    rows, tomo = [], []
    base_probability = None
    for i, total in enumerate(cfg.loss_scan_db):
        h = herald_noon(_gamma(cfg), _detector(cfg), (total / 2, total / 2), cutoff=cfg.cutoff)
        rho = h.state
        base_probability = h.probability if base_probability is None else base_probability
        lossy = rho
        for mode in (0, 1):
            lossy = apply_channel(lossy, loss_channel(cfg.eta_homodyne, rho.cutoff), mode)
        row = [total, h.probability, base_probability / h.probability, fidelity(rho, target),
               rho.element((1, 1), (1, 1)).real, lossy.element((1, 1), (1, 1)).real]
        data = sample_joint_homodyne(lossy, _tomography_settings(cfg.tomo_phases),
                                     max(1, cfg.n_samples // cfg.tomo_phases**2), cfg.seed + i,
                                     source_state_id=f"noon_loss_scan/{total:g}dB")
        est = MaxLikTomography(cfg.tomo_cutoff, (cfg.eta_homodyne, cfg.eta_homodyne), cfg.bin_width).fit(data)
        f_rec = fidelity(est.state_, rho.truncate(cfg.tomo_cutoff))
        row += [f_rec, est.state_.element((1, 1), (1, 1)).real]
        rows.append(row)
        out.text(f"tomography_{i}.json", est.state_.to_json() + "\n")
        diag = est.diagnostics()
        if cfg.bootstrap_resamples:
            err = est.bootstrap(data, cfg.bootstrap_resamples, cfg.seed + 1000 + i)
            diag["bootstrap_median_error"] = float(np.median(err))
            out.csv(f"tomography_{i}_errors.csv", [f"c{j}" for j in range(err.shape[1])], err)
        out.json(f"tomography_{i}_diagnostics.json", diag)
        tomo.append(diag)
    out.csv(
        "noon_loss_scan.csv",
        ["total_loss_db", "herald_probability", "rate_drop", "fidelity_noon", "weight_11", "weight_11_detected",
         "fidelity_reconstructed", "weight_11_reconstructed"],
        rows,
    )
    rows = np.array(rows)
    summary = {
        "loss_db": list(map(float, rows[:, 0])),
        "rate_drop": list(map(float, rows[:, 2])),
        "fidelity_noon": list(map(float, rows[:, 3])),
        "fidelity_reconstructed": list(map(float, rows[:, 6])),
        "tomography": tomo,
    }
    out.json("noon_loss_scan_summary.json", summary)
    return summary


def correlation_table(etas, delta_theta, cutoff=4):
    """Rows ``eta, dtheta, <XA XB>_1, <XA^2 XB^2>_1, <XA XB>_2, <XA^2 XB^2>_2`` for lossy N00N states."""
    rows = []
    for eta in etas:
        states = []
        for n in (1, 2):
            rho = noon_ket(n, cutoff).to_density()
            for mode in (0, 1):
                rho = apply_channel(rho, loss_channel(eta, cutoff), mode)
            states.append(rho)
        for d in delta_theta:
            s = QuadratureSetting(d, 0.0)
            rows.append([eta, d] + [joint_moment(r, s, p, p) for r in states for p in (1, 2)])
    return np.array(rows)


def run_correlations(cfg: ScenarioConfig, out: _Outputs) -> dict:
    rows = correlation_table(cfg.etas, cfg.delta_theta)
    out.csv("correlations.csv",
            ["eta", "delta_theta", "x1x1_noon1", "x2x2_noon1", "x1x1_noon2", "x2x2_noon2"], rows)
    fits = []
    for eta in cfg.etas:
        sel = rows[:, 0] == eta
        one = fit_sinusoid(rows[sel, 1], rows[sel, 2], 2 * math.pi)
        two = fit_sinusoid(rows[sel, 1], rows[sel, 5], math.pi)
        fits.append({"eta": eta, "noon1_x1x1": one, "noon2_x2x2": two,
                     "noon2_x1x1_max_abs": float(np.max(np.abs(rows[sel, 4])))})
    summary = {"fits": fits}
    out.json("correlations_summary.json", summary)
    return summary


def run_remote_css(cfg: ScenarioConfig, out: _Outputs) -> dict:
    rows = []
    for i, x in enumerate(cfg.x_alice):
        bob, prob = remote_bob_state(x, cfg.alice_efficiency, window=cfg.window)
        if bob is None:
            rows.append([x, 0.0] + [math.nan] * 8)
            continue
        params, fid = best_css_fit(bob)
        raw = apply_channel(bob, loss_channel(cfg.eta_homodyne, bob.cutoff), 0)
        pops = bob.populations()
        rows.append([x, prob, pops[0], pops[1], pops[2], params.alpha.real, params.z, fid,
                     optimal_squeezing(bob)[1], optimal_squeezing(raw)[1]])
        grid = wigner(bob, resolution=(cfg.wigner_points, cfg.wigner_points))
        grid.to_csv(out.root / f"wigner_{i}.csv")
        out.adopt(f"wigner_{i}.csv")
        out.adopt(f"wigner_{i}.json")
    out.csv(
        "remote_css.csv",
        ["x_alice", "acceptance_probability", "pop_0", "pop_1", "pop_2", "alpha", "z", "fidelity",
         "squeezing_db", "squeezing_db_detected"],
        rows,
    )
    rows = np.array(rows)
    summary = {"x_alice": list(map(float, rows[:, 0])), "alpha": list(map(float, rows[:, 5])),
               "z": list(map(float, rows[:, 6])), "fidelity": list(map(float, rows[:, 7]))}
    out.json("remote_css_summary.json", summary)
    return summary


def run_rates(cfg: ScenarioConfig, out: _Outputs) -> dict:
    target = noon_ket(2, cfg.cutoff).to_density()
    rows = []
    for total in cfg.loss_scan_db:
        h = herald_noon(_gamma(cfg), _detector(cfg), (total / 2, total / 2), cutoff=cfg.cutoff)
        rows.append([total, h.probability, h.probability * cfg.rep_rate_hz, fidelity(h.state, target),
                     cfg.eta_spcm * db_to_transmission(total / 2)])
    rows = np.array(rows)
    rows = np.column_stack([rows, rows[0, 1] / rows[:, 1]])
    out.csv("rates.csv",
            ["total_loss_db", "probability_per_pulse", "rate_hz", "fidelity_noon", "equivalent_efficiency",
             "rate_drop"], rows)
    summary = {
        "probability_per_pulse": float(rows[0, 1]),
        "rate_hz": float(rows[0, 2]),
        "rate_drop": list(map(float, rows[:, 5])),
        "fidelity_noon": list(map(float, rows[:, 3])),
    }
    out.json("rates_summary.json", summary)
    return summary


def run_higher_noon(cfg: ScenarioConfig, out: _Outputs) -> dict:
    fact = []
    for n in cfg.noon_orders:
        if n < 4:
            continue
        f = noon_factorization(n, FACTORIZATION_CUTOFF)
        fact.append({"N": n, "phases": list(map(float, f.phases)), "error": f.error,
                     "literal_phases": list(map(float, f.literal_phases)), "literal_sign": f.literal_sign,
                     "literal_error": f.literal_error})
    ket = FockKet.from_terms({(3, 1): 1.0, (1, 3): 1.0}, 4, normalize=True)
    sub = photon_subtract(photon_subtract(ket, 0).state, 1).state
    expected = FockKet.from_terms({(2, 0): math.sqrt(1.5), (0, 2): math.sqrt(1.5)}, 4)
    subtraction_error = float(np.max(np.abs(sub.amplitudes - expected.amplitudes)))
    probs = noon_herald_probability(cfg.noon_orders, math.sqrt(cfg.noon_gamma_sq), _detector(cfg),
                                    cfg.tap_reflectivity)
    out.csv("higher_noon.csv", ["N", "herald_probability"], np.column_stack([cfg.noon_orders, probs]))
    summary = {"factorization": fact, "subtraction_error": subtraction_error}
    if len(cfg.noon_orders) >= 2:
        summary["log_probability_fit"] = loglinear_fit(cfg.noon_orders, probs)
    out.json("higher_noon_summary.json", summary)
    return summary


def run_tomo_selftest(cfg: ScenarioConfig, out: _Outputs) -> dict:
    phases = [math.pi * k / cfg.selftest_phases for k in range(cfg.selftest_phases)]
    per_phase = max(1, cfg.selftest_samples // cfg.selftest_phases)
    results = {}
    for i, (label, n) in enumerate((("vacuum", 0), ("one_photon", 1))):
        true = FockKet.basis((n,), cfg.cutoff).to_density()
        lossy = apply_channel(true, loss_channel(cfg.eta_homodyne, cfg.cutoff), 0)
        data = sample_homodyne(lossy, 0, phases, per_phase, cfg.seed + i, source_state_id=label)
        est = MaxLikTomography(SELFTEST_CUTOFF, cfg.eta_homodyne, cfg.bin_width).fit(data)
        diag = est.diagnostics()
        diag["fidelity"] = fidelity(est.state_, true.truncate(SELFTEST_CUTOFF))
        if cfg.bootstrap_resamples:
            diag["bootstrap_median_error"] = float(np.median(est.bootstrap(data, cfg.bootstrap_resamples,
                                                                           cfg.seed + 100 + i)))
        out.text(f"selftest_{label}.json", est.state_.to_json() + "\n")
        results[label] = diag
    out.json("tomo_selftest_summary.json", results)
    return results


RUNNERS = {
    "hom_dip": run_hom_dip,
    "noon_loss_scan": run_noon_loss_scan,
    "correlations": run_correlations,
    "remote_css": run_remote_css,
    "rates": run_rates,
    "higher_noon": run_higher_noon,
    "tomo_selftest": run_tomo_selftest,
}


def _versions():
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"noonforge": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "python": platform.python_version()}


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> dict:
    """Run ``cfg.scenario``, write its outputs and ``manifest.json``; returns the summary."""
    if cfg.scenario not in RUNNERS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}", "scenario")
    out = _Outputs(Path(out_dir if out_dir is not None else cfg.out_dir))
    start = time.perf_counter()
    with threadpool_limits(limits=cfg.threads):
        summary = RUNNERS[cfg.scenario](cfg, out)
    manifest = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "files": dict(sorted(out.files.items())),
    }
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return summary
