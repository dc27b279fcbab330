"""State-space quadruples with labelled ports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularResolvent, ValidationError


@dataclass(frozen=True)
class LinearSystem:
    """A state-space quadruple (A, B, C, D) with port labels.

    Inputs and outputs carry their sign convention in the labels, e.g. an
    ILC analysed in the grid-following convention has inputs
    ``("omega1", "omega2")`` and outputs ``("-p1", "-p2")``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValidationError("A must be square")
        b = np.asarray(self.b, dtype=float).reshape(n, -1)
        m = b.shape[1]
        c = np.asarray(self.c, dtype=float).reshape(-1, n)
        p = c.shape[0]
        d = np.asarray(self.d, dtype=float).reshape(p, m)
        for mat, name in ((a, "A"), (b, "B"), (c, "C"), (d, "D")):
            if not np.all(np.isfinite(mat)):
                raise ValidationError(f"{name} contains non-finite entries")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]


def transfer_matrix(lin: LinearSystem, omega: float) -> np.ndarray:
    """Evaluate G(jw) = C (jw I - A)^-1 B + D at one frequency (rad/s)."""
    n = lin.n_states
    if n == 0:
        return lin.d.astype(complex)
    resolvent = 1j * omega * np.eye(n) - lin.a
    try:
        x = np.linalg.solve(resolvent, lin.b.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent(f"jw is an eigenvalue of A at w={omega:g}") from exc
    g = lin.c @ x + lin.d
    if not np.all(np.isfinite(g)):
        raise SingularResolvent(f"resolvent overflow at w={omega:g}")
    return g
