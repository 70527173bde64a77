"""Incompressible reference flow and the compressible-incompressible gap.

The companion system is the unforced viscous flow

    dt v - lap v + P(v . grad v) = 0,    div v = 0,

advanced with exact heat half-steps wrapped around an explicit midpoint
stage on the projected advection term.  The pressure never materializes:
Leray projection removes every gradient contribution on the fly, and the
velocity is re-projected after each step so rounding drift cannot
accumulate in the divergence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from artifact.propagators import CFLError
from artifact.spectral import (
    SpectralField,
    apply_multiplier,
    divergence,
    grad_components,
    heat_symbol,
    lambda_pow,
    leray_split,
    lp_norm,
)

if TYPE_CHECKING:
    from artifact.experiments import DiagnosticSeries
    from artifact.model import State

DIV_TOL = 1e-12


@dataclass(frozen=True)
class INSState:
    """Divergence-free velocity snapshot.

    Attributes:
        v: solenoidal velocity, one component per grid dimension.
        t: simulation time.
    """

    v: SpectralField
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.v.ncomp != self.v.grid.d:
            raise ValueError(
                f"v needs {self.v.grid.d} components, got {self.v.ncomp}"
            )
        scale = max(lp_norm(self.v, 2), 1.0)
        if lp_norm(divergence(self.v), 2) > DIV_TOL * scale:
            raise ValueError(
                "v is not divergence-free; build the state via INSState.project"
            )

    @property
    def grid(self):
        return self.v.grid

    @classmethod
    def project(cls, u: SpectralField, t: float = 0.0) -> "INSState":
        """Leray-project an arbitrary velocity onto its solenoidal part."""
        pv, _ = leray_split(u)
        return cls(v=pv, t=t)


def _projected_advection(v: SpectralField) -> SpectralField:
    """P(v . grad v), dealiased."""
    grid = v.grid
    der = grad_components(v)
    vphys = v.physical()
    conv = np.einsum("j...,ij...->i...", vphys, der)
    pnl, _ = leray_split(SpectralField.from_physical(grid, conv).dealias())
    return pnl


def advection_rate(s: INSState) -> float:
    """Explicit stability rate of the advection stage, k_max sup|v|."""
    return float(s.grid.dealias_radius * lp_norm(s.v, np.inf))


def ins_advance(s: INSState, dt: float, cfl_limit: float = 0.8) -> INSState:
    """One step of the viscous flow.

    Exact heat half-steps sandwich an explicit midpoint stage on
    -P(v . grad v); only the advection stage is explicit, so the CFL
    budget involves the advective rate alone.

    Args:
        s: current state.
        dt: step size, > 0.
        cfl_limit: dimensionless budget for dt times the advective rate.

    Raises:
        CFLError: if ``dt * advection_rate(s) > cfl_limit``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    rate = advection_rate(s)
    if dt * rate > cfl_limit:
        raise CFLError(
            f"advective CFL violated: dt={dt:g} exceeds budget "
            f"{cfl_limit / rate if rate > 0 else np.inf:g}"
        )
    half = heat_symbol(0.5 * dt)
    v1 = apply_multiplier(half, s.v)
    mid = v1 - (0.5 * dt) * _projected_advection(v1)
    kicked = v1 - dt * _projected_advection(mid)
    v2 = apply_multiplier(half, kicked)
    pv, _ = leray_split(v2)
    return INSState(v=pv, t=s.t + dt)


def error_field(s: "State", ins: INSState, dt: float | None = None) -> SpectralField:
    """Gap between the compressible solenoidal part and the reference, Pu - v.

    Args:
        s: compressible state.
        ins: incompressible companion.
        dt: when given, times may disagree by up to dt/2 (half an output
            interval); otherwise they must agree to rounding.

    Raises:
        ValueError: mismatched grids or times further apart than allowed.
    """
    ga, gb = s.grid, ins.grid
    if (ga.d, ga.n, ga.ldom) != (gb.d, gb.n, gb.ldom):
        raise ValueError("states live on different grids")
    tol = 0.5 * dt if dt is not None else 1e-9 * max(1.0, abs(ins.t))
    if abs(s.t - ins.t) > tol:
        raise ValueError(
            f"time mismatch: compressible t={s.t:g} vs reference t={ins.t:g}"
        )
    pu, _ = leray_split(s.u)
    return pu - ins.v


def ins_decay_series(
    states: Sequence[INSState], alphas: Sequence[float], sigma: float
) -> "DiagnosticSeries":
    """Time series of ||Lambda^alpha v||_L2 for each requested alpha.

    Args:
        states: snapshots at strictly increasing times.
        alphas: derivative orders to weigh with.
        sigma: descriptor recorded alongside (the data-localization index
            the run was prepared for); not used in the norms themselves.
    """
    from artifact.experiments import DiagnosticSeries

    if not states:
        raise ValueError("empty run")
    times = np.array([s.t for s in states], dtype=np.float64)
    columns: dict[str, np.ndarray] = {}
    meta: dict[str, dict] = {}
    for alpha in alphas:
        name = f"L2_Lam[{alpha:g}]"
        if name in columns:
            raise ValueError(f"duplicate alpha {alpha:g}")
        mult = lambda_pow(alpha)
        vals = [lp_norm(apply_multiplier(mult, s.v), 2) for s in states]
        columns[name] = np.array(vals, dtype=np.float64)
        meta[name] = {
            "alpha": float(alpha),
            "sigma": float(sigma),
            "expected_slope": -0.5 * float(alpha) - 0.5 * float(sigma),
        }
    return DiagnosticSeries(times=times, columns=columns, meta=meta)
