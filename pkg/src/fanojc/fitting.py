"""Lorentzian-plus-constant least-squares fitting.

Model: y = offset + amplitude * (w/2)^2 / ((x - center)^2 + (w/2)^2), i.e. a
flat background plus a Lorentzian of FWHM w.  Deterministic for fixed data
and initial guess.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

__all__ = ["FitError", "FitResult", "lorentzian_constant", "fit_lorentzian_constant"]


class FitError(RuntimeError):
    """The nonlinear fit did not converge."""


@dataclass(frozen=True)
class FitResult:
    """Fitted Lorentzian-plus-constant parameters with 1-sigma uncertainties."""

    amplitude: float
    center: float
    width: float
    offset: float
    amplitude_err: float
    center_err: float
    width_err: float
    offset_err: float
    residual_norm: float


def lorentzian_constant(x, amplitude, center, width, offset):
    """Constant plus Lorentzian with FWHM ``width`` and peak height ``amplitude``."""
    half = width / 2.0
    return offset + amplitude * half * half / ((x - center) ** 2 + half * half)


def _default_guess(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Max/min/half-max heuristics; detects dips as negative amplitudes."""
    median = float(np.median(y))
    is_peak = abs(float(np.max(y)) - median) >= abs(float(np.min(y)) - median)
    i_ext = int(np.argmax(y)) if is_peak else int(np.argmin(y))
    offset0 = float(np.min(y)) if is_peak else float(np.max(y))
    amplitude0 = float(y[i_ext]) - offset0
    center0 = float(x[i_ext])
    span = float(x[-1] - x[0])
    if amplitude0 == 0.0:
        return 0.0, center0, span / 4.0, offset0
    half_level = offset0 + amplitude0 / 2.0
    above = (y - half_level) * np.sign(amplitude0) >= 0
    if np.any(above):
        width0 = float(x[above][-1] - x[above][0])
    else:
        width0 = 0.0
    width0 = max(width0, float(np.min(np.diff(x))))
    return amplitude0, center0, width0, offset0


def fit_lorentzian_constant(
    x,
    y,
    initial_guess: tuple[float, float, float, float] | None = None,
    max_evaluations: int = 10000,
) -> FitResult:
    """Levenberg-Marquardt fit of a constant plus a Lorentzian.

    ``initial_guess`` is (amplitude, center, width, offset); without it a
    max/min/half-max heuristic is used.  The reported width is positive (the
    model is even in it) and parameter uncertainties come from the local
    curvature at the optimum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 5:
        raise ValueError("need at least 5 points to fit 4 parameters")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")

    guess = initial_guess if initial_guess is not None else _default_guess(x, y)
    if np.ptp(y) == 0.0:
        # exactly constant data: the Lorentzian is degenerate
        return FitResult(
            amplitude=0.0,
            center=guess[1],
            width=abs(guess[2]),
            offset=float(y[0]),
            amplitude_err=float("inf"),
            center_err=float("inf"),
            width_err=float("inf"),
            offset_err=0.0,
            residual_norm=0.0,
        )

    try:
        popt, pcov = curve_fit(
            lorentzian_constant,
            x,
            y,
            p0=list(guess),
            method="lm",
            maxfev=max_evaluations,
        )
    except RuntimeError as exc:
        residual = float(np.linalg.norm(y - lorentzian_constant(x, *guess)))
        raise FitError(
            f"fit did not converge within {max_evaluations} evaluations "
            f"(residual at last guess {residual:.3e}): {exc}"
        ) from exc

    amplitude, center, width, offset = (float(v) for v in popt)
    errs = np.sqrt(np.abs(np.diag(pcov))) if np.all(np.isfinite(pcov)) else np.full(4, np.inf)
    residual_norm = float(np.linalg.norm(y - lorentzian_constant(x, *popt)))
    return FitResult(
        amplitude=amplitude,
        center=center,
        width=abs(width),
        offset=offset,
        amplitude_err=float(errs[0]),
        center_err=float(errs[1]),
        width_err=float(errs[2]),
        offset_err=float(errs[3]),
        residual_norm=residual_norm,
    )
