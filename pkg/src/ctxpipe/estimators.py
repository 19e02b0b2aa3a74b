"""Closed-form estimators for defect populations, detection, and cost.

Five small models, all pure functions:

* :func:`lincoln_petersen` and :func:`chapman` estimate a total defect
  population from two independent finders via capture-recapture;
* :func:`n_version_detection` gives the probability that at least one of
  several independent reviewers catches a defect;
* :func:`ib_objective` evaluates the information-bottleneck trade-off
  between context compression and task relevance;
* :func:`boehm_cost` and :func:`wright_cost` model how fix cost grows by
  phase and falls with repetition.
"""

from __future__ import annotations

import math
from collections.abc import Iterable

from .errors import InputError, UndefinedEstimateError


def _check_capture_counts(n1: int, n2: int, m: int) -> None:
    if n1 < 0 or n2 < 0 or m < 0:
        raise InputError("BAD_COUNT", "capture counts must be nonnegative")
    if m > min(n1, n2):
        raise InputError(
            "BAD_OVERLAP",
            f"overlap m={m} cannot exceed min(n1={n1}, n2={n2})",
        )


def lincoln_petersen(n1: int, n2: int, m: int) -> float:
    """Estimate total defects as n1*n2/m from two finders with overlap m.

    Raises:
        UndefinedEstimateError: when m = 0; the estimator has no value
            without recaptures (use :func:`chapman` instead).
    """
    _check_capture_counts(n1, n2, m)
    if m == 0:
        raise UndefinedEstimateError(
            "lincoln_petersen is undefined when overlap m = 0; use chapman"
        )
    return (n1 * n2) / m


def chapman(n1: int, n2: int, m: int) -> float:
    """Bias-corrected capture-recapture estimate; defined even at m = 0."""
    _check_capture_counts(n1, n2, m)
    return ((n1 + 1) * (n2 + 1)) / (m + 1) - 1


def n_version_detection(probabilities: Iterable[float]) -> float:
    """Probability at least one independent reviewer detects a defect.

    Computes 1 - prod(1 - p_i). An empty profile detects nothing (0.0).

    Raises:
        InputError: if any probability falls outside [0, 1].
    """
    miss = 1.0
    for p in probabilities:
        if not 0.0 <= p <= 1.0:
            raise InputError(
                "BAD_PROBABILITY", f"detection probability {p!r} outside [0, 1]"
            )
        miss *= 1.0 - p
    return 1.0 - miss


def ib_objective(i_xt: float, i_ty: float, beta: float) -> float:
    """Information-bottleneck objective i_xt - beta * i_ty.

    Smaller is better: retain little about the input while preserving much
    about the target. Minimization is the caller's concern.

    Raises:
        InputError: if any argument is negative.
    """
    if i_xt < 0 or i_ty < 0 or beta < 0:
        raise InputError("BAD_INFORMATION", "i_xt, i_ty, and beta must be nonnegative")
    return i_xt - beta * i_ty


def boehm_cost(c0: float, phase: int) -> float:
    """Cost of fixing a defect discovered ``phase`` phases after introduction.

    Grows as c0 * 10**(phase/2): one order of magnitude every two phases.

    Raises:
        InputError: if c0 is not positive or phase is negative.
    """
    if c0 <= 0:
        raise InputError("BAD_BASE_COST", "base cost c0 must be positive")
    if phase < 0:
        raise InputError("BAD_PHASE", "phase must be a nonnegative integer")
    return c0 * 10.0 ** (phase / 2)


def wright_cost(c1: float, n: int, learning_rate: float) -> float:
    """Unit cost after n repetitions under a learning-curve rate.

    Computes c1 * n**b with b = log2(learning_rate), in full precision.
    Each doubling of cumulative units multiplies unit cost by the rate.

    Raises:
        InputError: if c1 <= 0, n < 1, or learning_rate outside (0, 1].
    """
    if c1 <= 0:
        raise InputError("BAD_FIRST_UNIT_COST", "first-unit cost c1 must be positive")
    if n < 1:
        raise InputError("BAD_UNIT_COUNT", "cumulative unit count n must be >= 1")
    if not 0.0 < learning_rate <= 1.0:
        raise InputError(
            "BAD_LEARNING_RATE", f"learning rate {learning_rate!r} outside (0, 1]"
        )
    return c1 * n ** math.log2(learning_rate)
