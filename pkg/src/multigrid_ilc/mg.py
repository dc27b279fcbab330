"""Aggregate microgrid dynamics.

Each microgrid is a single-input single-output system: input is the net
power deviation entering the MG (W), output its frequency deviation
(rad/s).  Two model forms are provided:

* ``FirstOrderDroop`` -- a first-order lag dominated by the droop
  characteristic:  T * dw/dt = -D*w + p_in + p_load.
* ``SwingGovernor``   -- swing dynamics with a first-order governor:
  M * dw/dt = -D*w + p_m + p_in + p_load,  T_g * dp_m/dt = -p_m - w/R.

All quantities are SI deviations from the nominal operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NonFiniteInput, ValidationError
from .linear import LinearSystem


def _require_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ValidationError(f"{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class FirstOrderDroop:
    """Droop-dominated first-order MG model.

    T : lag time constant (s);  D : droop coefficient (W*s/rad).
    """

    T: float
    D: float
    p_load: float = 0.0
    rating: float | None = None
    name: str = ""

    def __post_init__(self):
        _require_positive(T=self.T, D=self.D)

    state_names = ("omega",)

    @property
    def droop_total(self) -> float:
        return self.D


@dataclass(frozen=True)
class SwingGovernor:
    """Swing equation with first-order turbine governor.

    M : inertia (W*s^2/rad);  D : damping (W*s/rad);
    T_g : governor time constant (s);  inv_R : inverse droop 1/R (W*s/rad).
    """

    M: float
    D: float
    T_g: float
    inv_R: float
    p_load: float = 0.0
    rating: float | None = None
    name: str = ""

    def __post_init__(self):
        _require_positive(M=self.M, D=self.D, T_g=self.T_g, inv_R=self.inv_R)

    state_names = ("omega", "p_m")

    @property
    def droop_total(self) -> float:
        return self.D + self.inv_R


MgModel = Union[FirstOrderDroop, SwingGovernor]


def default_rating(model: MgModel, omega_nominal: float = 2.0 * math.pi * 50.0) -> float:
    """MG power rating used for standardized disturbances.

    When no explicit rating is configured, assume the total droop response
    corresponds to the full rating at a 5 % frequency excursion.
    """
    if model.rating is not None:
        return model.rating
    return 0.05 * omega_nominal * model.droop_total


def mg_derivative(
    model: MgModel, state: tuple[float, ...], p_in: float, p_load: float | None = None
) -> tuple[float, ...]:
    """State derivative of one MG given the net power entering it.

    ``p_load`` overrides the model's baseline load deviation when given
    (the engine schedules load steps this way).
    """
    if not math.isfinite(p_in):
        raise NonFiniteInput(f"p_in={p_in!r}")
    load = model.p_load if p_load is None else p_load
    if isinstance(model, FirstOrderDroop):
        (w,) = state
        return ((-model.D * w + p_in + load) / model.T,)
    w, p_m = state
    dw = (-model.D * w + p_m + p_in + load) / model.M
    dp_m = (-p_m - model.inv_R * w) / model.T_g
    return (dw, dp_m)


def mg_linearize(model: MgModel) -> LinearSystem:
    """Exact linearization with input p (W) and output omega (rad/s)."""
    if isinstance(model, FirstOrderDroop):
        return LinearSystem(
            a=np.array([[-model.D / model.T]]),
            b=np.array([[1.0 / model.T]]),
            c=np.array([[1.0]]),
            d=np.array([[0.0]]),
            state_labels=("omega",),
            input_labels=("p",),
            output_labels=("omega",),
        )
    a = np.array(
        [
            [-model.D / model.M, 1.0 / model.M],
            [-model.inv_R / model.T_g, -1.0 / model.T_g],
        ]
    )
    b = np.array([[1.0 / model.M], [0.0]])
    c = np.array([[1.0, 0.0]])
    d = np.array([[0.0]])
    return LinearSystem(
        a=a,
        b=b,
        c=c,
        d=d,
        state_labels=("omega", "p_m"),
        input_labels=("p",),
        output_labels=("omega",),
    )


def dc_gain(model: MgModel) -> float:
    """Steady-state rad/s per W: 1/D or 1/(D + 1/R)."""
    return 1.0 / model.droop_total
