"""Control-affine nonlinear systems  dx/dt = f(x) + sum_i u_i g_i(x)."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DimensionMismatchError
from .expr import CanonicalExpr, VectorField


@dataclass(frozen=True)
class NonlinearSystem:
    n: int
    f: VectorField
    g: tuple[VectorField, ...]
    name: str = ""

    def __post_init__(self):
        if self.f.n != self.n:
            raise DimensionMismatchError(
                f"drift has {self.f.n} components, expected {self.n}"
            )
        for i, gi in enumerate(self.g):
            if gi.n != self.n:
                raise DimensionMismatchError(
                    f"control field {i + 1} has {gi.n} components, expected {self.n}"
                )

    @property
    def m(self) -> int:
        return len(self.g)

    def fields(self) -> list[VectorField]:
        """Drift first, then controls, in their fixed order."""
        return [self.f, *self.g]

    def rhs(self, x, u) -> list[float]:
        """Numeric right-hand side at state x under control u."""
        out = self.f.eval(x)
        for ui, gi in zip(u, self.g):
            if ui:
                gv = gi.eval(x)
                for l in range(self.n):
                    out[l] += ui * gv[l]
        return out

    @staticmethod
    def zero_drift(n: int) -> VectorField:
        return VectorField(tuple(CanonicalExpr.zero(n) for _ in range(n)))
