"""Curve fits used to summarize scenario outputs."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit


def fit_sinusoid(x, y, period_guess: float) -> dict:
    """Fit ``offset + amplitude * cos(2 pi x / period + phase)``.

    Amplitude is reported non-negative; the phase absorbs the sign. A linear
    least-squares fit at ``period_guess`` seeds the nonlinear fit of all four
    parameters.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    k = 2 * math.pi / period_guess
    design = np.column_stack([np.ones_like(x), np.cos(k * x), np.sin(k * x)])
    (c0, ca, cb), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp0, ph0 = math.hypot(ca, cb), math.atan2(-cb, ca)

    def model(t, offset, amp, period, phase):
        return offset + amp * np.cos(2 * math.pi * t / period + phase)

    if amp0 < 1e-12 * max(1.0, abs(c0)):
        resid = y - c0
        return {"offset": float(c0), "amplitude": 0.0, "period": float("nan"), "phase": 0.0,
                "rms_residual": float(np.sqrt(np.mean(resid**2)))}
    with warnings.catch_warnings():
        # noise-free model data leave the covariance undefined; only the optimum is used
        warnings.simplefilter("ignore", OptimizeWarning)
        popt, _ = curve_fit(model, x, y, p0=[c0, amp0, period_guess, ph0], xtol=1e-14, ftol=1e-14, gtol=1e-14,
                            maxfev=20000)
    offset, amp, period, phase = map(float, popt)
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    phase = (phase + math.pi) % (2 * math.pi) - math.pi
    resid = y - model(x, offset, amp, period, phase)
    return {"offset": offset, "amplitude": amp, "period": period, "phase": phase,
            "rms_residual": float(np.sqrt(np.mean(resid**2)))}


def gaussian_width(x, y, floor: float = 1e-12) -> float:
    """Standard deviation ``s`` of a centred Gaussian ``A exp(-x^2 / (2 s^2))`` fitted to ``y``.

    Fits ``log y`` linearly in ``x^2`` over points above ``floor * max(y)``.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = y > floor * np.max(y)
    if keep.sum() < 2:
        raise ValueError("need at least two points above the floor")
    slope, _ = np.polyfit(x[keep] ** 2, np.log(y[keep]), 1)
    if slope >= 0:
        raise ValueError("data do not decay away from zero")
    return float(math.sqrt(-1.0 / (2.0 * slope)))


def loglinear_fit(x, y) -> dict:
    """Straight-line fit of ``log10 y`` against ``x`` with its coefficient of determination."""
    x, ly = np.asarray(x, float), np.log10(np.asarray(y, float))
    slope, intercept = np.polyfit(x, ly, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r2}
