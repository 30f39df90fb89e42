"""Converting lexical distances to divergence times.

The model: two diverging languages drift apart through random word
mutation (rate ``a``) and drift together through borrowing or chance
resemblance (rate ``b``). Starting from distance 0 at separation, the
expected distance after T years is

    D(T) = (1/gamma) * (1 - exp(-T / epsilon))

with ``epsilon = 1/(a+b)`` (the time scale in years) and
``gamma = (a+b)/a >= 1`` (whose reciprocal is the long-run distance
asymptote). Inverting gives the separation time

    T(D) = -epsilon * ln(1 - gamma * D)

which is only finite while ``gamma * D < 1``; noisy data beyond the
asymptote gets a flagged ceiling value instead of aborting the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationError, ModelDomainError, UndefinedPairError
from .metric import DistanceMatrix, _matrix_tsv

# the flagged ceiling is the time at the capped distance (1 - SATURATION_EPS)/gamma
SATURATION_EPS = 1e-6

_CALIBRATION_BRACKET_TOL = 1e-13
_ANCHOR_REL_TOL = 1e-9


@dataclass(frozen=True)
class ChronoParams:
    """Calibrated model parameters (epsilon in years, gamma dimensionless)."""

    epsilon: float
    gamma: float

    def __post_init__(self) -> None:
        if not (self.epsilon > 0):
            raise ModelDomainError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.gamma >= 1):
            raise ModelDomainError(
                f"gamma must be >= 1 (borrowing rate cannot be negative), got {self.gamma}"
            )


#: Default profile: fitted to two historically dated pairs
#: (Italian-French at 1600 years, Icelandic-Norwegian at 1100 years).
DEFAULT_PARAMS = ChronoParams(epsilon=1750.0, gamma=1.09)


@dataclass(frozen=True)
class CalibrationAnchor:
    """A language pair with known lexical distance and separation time."""

    distance: float
    time: float

    def __post_init__(self) -> None:
        if not (0 < self.distance < 1):
            raise CalibrationError(
                f"anchor distance must lie strictly inside (0, 1), got {self.distance}"
            )
        if not (self.time > 0):
            raise CalibrationError(f"anchor time must be positive, got {self.time}")


def saturation_ceiling(params: ChronoParams) -> float:
    """Flagged time assigned to distances at or beyond the model asymptote."""
    return -params.epsilon * math.log(SATURATION_EPS)


def time_from_distance(
    d: float, params: ChronoParams, saturation: str = "ceiling"
) -> float:
    """Separation time in years for a lexical distance.

    Strictly increasing in ``d`` and 0 at ``d = 0``. Where
    ``gamma * d >= 1`` the model has no finite answer; the default policy
    returns the saturation ceiling, ``saturation="raise"`` raises
    :class:`ModelDomainError` instead.
    """
    if not (0 <= d <= 1):
        raise ModelDomainError(f"distance must lie in [0, 1], got {d}")
    gd = params.gamma * d
    if gd >= 1.0:
        if saturation == "ceiling":
            return saturation_ceiling(params)
        raise ModelDomainError(
            f"distance {d} saturates the model (gamma*d = {gd} >= 1)"
        )
    return -params.epsilon * math.log1p(-gd)


def is_saturated(d: float, params: ChronoParams) -> bool:
    return params.gamma * d >= 1.0


def distance_from_time(t: float, params: ChronoParams) -> float:
    """Expected lexical distance after ``t`` years of separation.

    Exact functional inverse of :func:`time_from_distance` on its domain;
    increases monotonically from 0 toward the asymptote ``1/gamma``.
    """
    if t < 0:
        raise ModelDomainError(f"time must be nonnegative, got {t}")
    return -math.expm1(-t / params.epsilon) / params.gamma


def rates_from_params(params: ChronoParams) -> tuple[float, float]:
    """Per-year mutation and borrowing rates ``(a, b)``.

    ``a = 1/(epsilon*gamma)``, ``b = (gamma-1)/(epsilon*gamma)``; their
    sum is ``1/epsilon``.
    """
    a = 1.0 / (params.epsilon * params.gamma)
    b = (params.gamma - 1.0) / (params.epsilon * params.gamma)
    return a, b


def params_from_rates(a: float, b: float) -> ChronoParams:
    """Inverse of :func:`rates_from_params`."""
    if a <= 0 or b < 0:
        raise ModelDomainError(f"need a > 0 and b >= 0, got a={a}, b={b}")
    return ChronoParams(epsilon=1.0 / (a + b), gamma=(a + b) / a)


def calibrate(
    anchor1: CalibrationAnchor, anchor2: CalibrationAnchor
) -> ChronoParams:
    """Fit (epsilon, gamma) to two dated language pairs.

    gamma solves T1/T2 = ln(1 - gamma*D1)/ln(1 - gamma*D2) by bisection
    on (1, 1/max(D1, D2)); epsilon then follows from either anchor. The
    objective is monotone on that bracket, which is checked via the
    endpoint signs before bisecting.

    Raises:
        CalibrationError: identical anchors, anchors whose time and
            distance order disagree, an implied gamma < 1 (negative
            borrowing rate), or no root in the bracket.
    """
    if anchor1.distance == anchor2.distance or anchor1.time == anchor2.time:
        raise CalibrationError(
            "anchors must have distinct distances and distinct times: "
            f"{anchor1} vs {anchor2}"
        )
    # put the larger distance first; times must then be ordered the same way
    a1, a2 = (anchor1, anchor2) if anchor1.distance > anchor2.distance else (anchor2, anchor1)
    if a1.time <= a2.time:
        raise CalibrationError(
            "the more distant anchor must also be the older one: "
            f"D={a1.distance} at T={a1.time} vs D={a2.distance} at T={a2.time}"
        )
    ratio = a1.time / a2.time

    def objective(gamma: float) -> float:
        return math.log1p(-gamma * a1.distance) / math.log1p(-gamma * a2.distance) - ratio

    lo = 1.0
    hi = (1.0 - 1e-12) / a1.distance
    f_lo = objective(lo)
    if abs(f_lo) < 1e-12:
        gamma = 1.0
    elif f_lo > 0:
        raise CalibrationError(
            f"anchors imply gamma < 1, i.e. a negative borrowing rate "
            f"(objective at gamma=1 is {f_lo:.3e})"
        )
    else:
        f_hi = objective(hi)
        if f_hi < 0:
            raise CalibrationError(
                f"no root in the gamma bracket ({lo}, {hi:.6g}): "
                f"objective endpoints {f_lo:.3e} and {f_hi:.3e} have equal sign"
            )
        while hi - lo > _CALIBRATION_BRACKET_TOL:
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if objective(mid) < 0:
                lo = mid
            else:
                hi = mid
        gamma = 0.5 * (lo + hi)

    epsilon = -a1.time / math.log1p(-gamma * a1.distance)
    params = ChronoParams(epsilon=epsilon, gamma=gamma)
    for anchor in (a1, a2):
        t = time_from_distance(anchor.distance, params, saturation="raise")
        if abs(t - anchor.time) > _ANCHOR_REL_TOL * anchor.time:
            raise CalibrationError(
                f"calibration failed to reproduce anchor {anchor}: "
                f"model gives T={t!r} (epsilon={epsilon!r}, gamma={gamma!r})"
            )
    return params


@dataclass
class TimeMatrix:
    """Symmetric pairwise separation times in years.

    ``saturated`` marks entries whose distance exceeded the model
    asymptote; their value is the flagged ceiling, not a real estimate.
    """

    languages: list[str]
    values: np.ndarray
    saturated: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.saturated = np.asarray(self.saturated, dtype=bool)
        n = len(self.languages)
        if self.values.shape != (n, n) or self.saturated.shape != (n, n):
            raise ValueError("matrix shape does not match language count")
        self.values.setflags(write=False)
        self.saturated.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.languages)

    def saturated_pairs(self) -> list[tuple[str, str]]:
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if self.saturated[i, j]:
                    out.append((self.languages[i], self.languages[j]))
        return out


def time_matrix(matrix: DistanceMatrix, params: ChronoParams) -> TimeMatrix:
    """Elementwise time transform of a distance matrix.

    The transform is monotone, so entry ordering (and therefore the tree
    topology downstream) is preserved. Undefined input entries must be
    resolved first; saturated entries are flagged and given the ceiling.
    """
    undefined = matrix.undefined_pairs()
    if undefined:
        raise UndefinedPairError(
            "cannot convert undefined distances to times; impute or drop pairs: "
            + ", ".join(f"{a}/{b}" for a, b in undefined)
        )
    n = matrix.n
    values = np.zeros((n, n), dtype=float)
    saturated = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            d = float(matrix.values[i, j])
            values[i, j] = values[j, i] = time_from_distance(d, params)
            saturated[i, j] = saturated[j, i] = is_saturated(d, params)
    return TimeMatrix(list(matrix.languages), values, saturated)


# ---------------------------------------------------------------------------
# serialization

def time_tsv(matrix: TimeMatrix) -> str:
    """Years rounded to integers for display; saturated cells get a ``*``."""
    cells = []
    for i, row in enumerate(matrix.values):
        cells.append([
            f"{round(v)}{'*' if matrix.saturated[i, j] else ''}"
            for j, v in enumerate(row)
        ])
    return _matrix_tsv(matrix.languages, cells)


def time_matrix_to_json_dict(matrix: TimeMatrix) -> dict:
    return {
        "languages": list(matrix.languages),
        "values": [[float(v) for v in row] for row in matrix.values],
        "saturated": [[bool(v) for v in row] for row in matrix.saturated],
    }


def time_matrix_from_json_dict(bundle: dict) -> TimeMatrix:
    return TimeMatrix(
        list(bundle["languages"]),
        np.array(bundle["values"], dtype=float),
        np.array(bundle["saturated"], dtype=bool),
    )


def write_time_files(matrix: TimeMatrix, out_dir: str | Path,
                     stem: str = "time") -> list[Path]:
    """Write ``<stem>.tsv`` (integer years) and ``<stem>.json`` (full precision)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.tsv", out / f"{stem}.json"]
    paths[0].write_text(time_tsv(matrix), encoding="utf-8")
    paths[1].write_text(
        json.dumps(time_matrix_to_json_dict(matrix), indent=2) + "\n",
        encoding="utf-8",
    )
    return paths


def read_time_matrix_json(path: str | Path) -> TimeMatrix:
    with open(path, encoding="utf-8") as fh:
        return time_matrix_from_json_dict(json.load(fh))


def load_params(path: str | Path) -> ChronoParams:
    """Read parameters from JSON: ``{epsilon, gamma}`` or ``{anchors: [...]}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "anchors" in data:
        anchors = data["anchors"]
        if len(anchors) != 2:
            raise CalibrationError(
                f"need exactly 2 anchors to calibrate, got {len(anchors)}"
            )
        return calibrate(
            CalibrationAnchor(anchors[0]["distance"], anchors[0]["time"]),
            CalibrationAnchor(anchors[1]["distance"], anchors[1]["time"]),
        )
    if "epsilon" in data and "gamma" in data:
        return ChronoParams(epsilon=float(data["epsilon"]), gamma=float(data["gamma"]))
    raise CalibrationError(
        "params file must contain either {epsilon, gamma} or {anchors: [...]}"
    )


def params_to_json_dict(params: ChronoParams) -> dict:
    a, b = rates_from_params(params)
    return {"epsilon": params.epsilon, "gamma": params.gamma, "a": a, "b": b}
