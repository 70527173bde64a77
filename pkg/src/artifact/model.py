"""Constitutive laws, change of dependent variable, and right-hand sides.

The governing system tracks a density ρ near the equilibrium value 1 and a
velocity u on the torus:

    ∂t ρ + div(ρ u) = 0,
    ∂t u + u·∇u + (P′(ρ)/ρ) ∇ρ
        = (1/ρ) [div(2 μ(ρ) D(u)) + ∇(λ(ρ) div u)] − ∇ div u
          + κ ∇( m(ρ) Δρ + ½ m′(ρ) |∇ρ|² ),

with D(u) = ½(∇u + ∇uᵀ) and the normalizations P′(1) = μ(1) = λ(1) =
m(1) = 1.  The single constant-coefficient term −∇div u aligns the
linearization at (ρ, u) = (1, 0) with the mode matrix used by the
propagators (heat factor 2Δ on the potential part); see the project notes.

The working variable is a = √κ·L(ρ) with L(ρ) = ∫₁^ρ √(m(s)/s) ds, and
b = κ^{−1/2} a.  In these variables the system reads

    ∂t a + √κ div u = f,       f = −u·∇a − √κ ψ̃(b) div u,
    ∂t u − (Δu + ∇div u) + κ^{−1/2} ∇a − √κ ∇Δa = g = g₁+g₂+g₃+g₄+g₅,

    g₁ = −u·∇u,
    g₂ = Q̃(b)(Δu + 2∇div u)
         + (1+Q̃(b)) [div(2 μ̃(b) D(u)) + ∇(λ̃(b) div u)],
    g₃ = −κ^{−1/2} G̃(b) ∇a,
    g₄ = +√κ ∇(ψ̃(b) Δa),
    g₅ = +½ ∇(|∇a|²),

where Q(ρ) = 1/ρ − 1, G(ρ) = P′(ρ)/√(m(ρ)ρ) − 1, ψ(ρ) = √(m(ρ)ρ) − 1,
μ̄ = μ − 1, λ̄ = λ − 1, and a tilde denotes composition with L⁻¹ (so
χ̃(b) = χ(L⁻¹(b))).  The sign conventions above are the ones under which
the term list reproduces the primitive right-hand side exactly; the
defect-versus-term-list test is the arbiter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt
from scipy import optimize

from artifact.spectral import (
    Grid,
    SpectralField,
    divergence,
    grad_components,
    gradient,
    laplacian,
)

RHO_FLOOR = 0.05
"""Smallest density the inversion L⁻¹ is allowed to reach."""

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


class StateRangeError(ValueError):
    """Raised when a state leaves the invertible range of L."""


@dataclass(frozen=True)
class MaterialLaws:
    """Constitutive closures and the capillarity strength.

    All callables are vectorized over numpy arrays of density.

    Attributes:
        kappa: capillarity coefficient κ > 1.
        pressure: P(ρ).
        pressure_slope: P′(ρ).
        capillary_weight: m(ρ) in the capillary stress.
        capillary_weight_slope: m′(ρ).
        shear_viscosity: μ(ρ).
        volume_viscosity: λ(ρ), the coefficient of ∇(div u).
        ell_offset_closed: closed form of L(1+δ) as a function of the
            density offset δ = ρ − 1, in a cancellation-free arrangement,
            when available.
        ell_inv_offset_closed: closed form of L⁻¹(y) − 1, likewise.
        name: preset tag used by configs.
    """

    kappa: float
    pressure: Callable[[npt.NDArray], npt.NDArray]
    pressure_slope: Callable[[npt.NDArray], npt.NDArray]
    capillary_weight: Callable[[npt.NDArray], npt.NDArray]
    capillary_weight_slope: Callable[[npt.NDArray], npt.NDArray]
    shear_viscosity: Callable[[npt.NDArray], npt.NDArray]
    volume_viscosity: Callable[[npt.NDArray], npt.NDArray]
    ell_offset_closed: Callable[[npt.NDArray], npt.NDArray] | None = None
    ell_inv_offset_closed: Callable[[npt.NDArray], npt.NDArray] | None = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if not self.kappa > 1.0:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")
        one = np.array([1.0])
        for label, fn in (
            ("pressure_slope", self.pressure_slope),
            ("capillary_weight", self.capillary_weight),
            ("shear_viscosity", self.shear_viscosity),
            ("volume_viscosity", self.volume_viscosity),
        ):
            val = float(np.asarray(fn(one))[0])
            if abs(val - 1.0) > 1e-12:
                raise ValueError(f"{label}(1) must equal 1, got {val}")
        rho = np.linspace(RHO_FLOOR, 5.0, 64)
        if np.any(self.capillary_weight(rho) <= 0):
            raise ValueError("capillary weight must stay positive")
        lam = self.volume_viscosity(rho)
        nu = lam + 2.0 * self.shear_viscosity(rho)
        if np.any(lam <= 0) or np.any(nu <= 0):
            raise ValueError("need volume viscosity > 0 and lam + 2 mu > 0")

    @classmethod
    def simple(cls, kappa: float) -> "MaterialLaws":
        """P(ρ) = ρ and m = μ = λ = 1; L has the closed form 2(√ρ − 1)."""
        return cls(
            kappa=kappa,
            pressure=lambda r: np.asarray(r, dtype=float),
            pressure_slope=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            capillary_weight=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            capillary_weight_slope=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            shear_viscosity=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            volume_viscosity=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            ell_offset_closed=lambda d: 2.0 * d / (1.0 + np.sqrt(1.0 + d)),
            ell_inv_offset_closed=lambda y: y * (1.0 + y / 4.0),
            name="simple",
        )

    @classmethod
    def variable_capillarity(cls, kappa: float) -> "MaterialLaws":
        """m(ρ) = ρ with the other closures as in :meth:`simple`.

        L(ρ) = ρ − 1 in closed form, but the closed form is deliberately
        not wired in: this preset exercises the generic quadrature and
        Newton inversion paths (the closed form serves as a test oracle).
        """
        return cls(
            kappa=kappa,
            pressure=lambda r: np.asarray(r, dtype=float),
            pressure_slope=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            capillary_weight=lambda r: np.asarray(r, dtype=float),
            capillary_weight_slope=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            shear_viscosity=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            volume_viscosity=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            name="variable-m",
        )

    @classmethod
    def preset(cls, name: str, kappa: float) -> "MaterialLaws":
        if name == "simple":
            return cls.simple(kappa)
        if name == "variable-m":
            return cls.variable_capillarity(kappa)
        raise ValueError(f"unknown material preset {name!r}")


def _ell_integrand(laws: MaterialLaws, s: npt.NDArray) -> npt.NDArray:
    return np.sqrt(laws.capillary_weight(s) / s)


def ell_from_offset(dev: npt.NDArray, laws: MaterialLaws) -> npt.NDArray:
    """L(1 + δ) as a function of the density offset δ = ρ − 1, vectorized.

    Uses the preset's closed offset form when present, otherwise 32-node
    Gauss-Legendre on each interval [1, 1 + δ] (exact to machine
    precision for the smooth integrands at hand).

    Working in the offset keeps the relative error uniform in |δ|: the
    quadrature multiplies the half-width δ/2 by an O(1) node sum instead
    of subtracting near-equal O(1) quantities.  That matters downstream,
    where densities stored as 1 + δ would otherwise leave an eps-sized
    white floor under every Fourier mode of anything differentiated.

    Raises:
        StateRangeError: if any density 1 + δ is below ``RHO_FLOOR``.
    """
    dev = np.asarray(dev, dtype=float)
    if np.any(dev < RHO_FLOOR - 1.0):
        raise StateRangeError(f"density fell below the floor {RHO_FLOOR}")
    if laws.ell_offset_closed is not None:
        return laws.ell_offset_closed(dev)
    half = dev / 2.0
    mid = 1.0 + dev / 2.0
    acc = np.zeros_like(dev)
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        acc += weight * _ell_integrand(laws, mid + node * half)
    return half * acc


def ell(rho: npt.NDArray, laws: MaterialLaws) -> npt.NDArray:
    """L(ρ) = ∫₁^ρ √(m(s)/s) ds, vectorized.

    Raises:
        StateRangeError: if any density is below ``RHO_FLOOR``.
    """
    rho = np.asarray(rho, dtype=float)
    return ell_from_offset(rho - 1.0, laws)


def ell_slope(rho: npt.NDArray, laws: MaterialLaws) -> npt.NDArray:
    """L′(ρ) = √(m(ρ)/ρ)."""
    return _ell_integrand(laws, np.asarray(rho, dtype=float))


def ell_inverse_offset(y: npt.NDArray, laws: MaterialLaws) -> npt.NDArray:
    """L⁻¹(y) − 1, vectorized safeguarded Newton in the offset variable.

    Solving for the offset keeps tiny inversions accurate in relative
    terms (see :func:`ell_from_offset`); Newton converges in a handful of
    steps since L is strictly increasing and smooth, with a scalar
    bracketing fallback for any stragglers.

    Raises:
        StateRangeError: if y is outside the invertible range (the
            inversion would need a density below ``RHO_FLOOR``).
    """
    y = np.asarray(y, dtype=float)
    if laws.ell_inv_offset_closed is not None:
        dev = laws.ell_inv_offset_closed(y)
        if np.any(dev < RHO_FLOOR - 1.0):
            raise StateRangeError(f"density fell below the floor {RHO_FLOOR}")
        return dev
    dev_floor = RHO_FLOOR - 1.0
    y_floor = float(ell_from_offset(np.array([dev_floor]), laws)[0])
    if np.any(y <= y_floor):
        raise StateRangeError(
            f"value below L({RHO_FLOOR}) = {y_floor:.6g}: outside invertible range"
        )
    dev = np.maximum(y.copy(), dev_floor + 1e-12)  # exact for m(ρ) = ρ
    y_scale = max(float(np.max(np.abs(y))), 1e-12) if y.size else 1.0
    converged = False
    for _ in range(60):
        resid = ell_from_offset(dev, laws) - y
        if np.max(np.abs(resid)) < 1e-14 * y_scale:
            converged = True
            break
        dev = dev - resid / ell_slope(1.0 + dev, laws)
        dev = np.maximum(dev, dev_floor)
    if not converged:
        flat = dev.reshape(-1)
        yf = y.reshape(-1)
        for i in range(flat.size):
            resid = float(ell_from_offset(flat[i : i + 1], laws)[0] - yf[i])
            if abs(resid) > 1e-12 * y_scale:
                flat[i] = optimize.brentq(
                    lambda d: float(ell_from_offset(np.array([d]), laws)[0])
                    - yf[i],
                    dev_floor,
                    1e6,
                    xtol=1e-15,
                )
        dev = flat.reshape(dev.shape)
    return dev


def ell_inverse(y: npt.NDArray, laws: MaterialLaws) -> npt.NDArray:
    """L⁻¹(y), vectorized (L is strictly increasing).

    Raises:
        StateRangeError: if y is outside the invertible range.
    """
    return 1.0 + ell_inverse_offset(y, laws)


def invertibility_radius(laws: MaterialLaws) -> float:
    """Largest allowed |b| = |κ^{−1/2} a|: 0.9·|L(ρ_floor)|.

    The vacuum side is the binding branch of L's range on every admissible
    preset, so the radius is anchored at the density floor.
    """
    return 0.9 * abs(float(ell_from_offset(np.array([RHO_FLOOR - 1.0]), laws)[0]))


@dataclass
class State:
    """Perturbation-variable state (a, u) at one instant.

    Attributes:
        a: scalar field √κ·L(ρ).
        u: velocity field with d components.
        kappa: capillarity coefficient the state was built under.
        t: current time.
    """

    a: SpectralField
    u: SpectralField
    kappa: float
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.a.grid != self.u.grid:
            raise ValueError("a and u must share a grid")
        if self.a.ncomp != 1:
            raise ValueError("a must be scalar")
        if self.u.ncomp != self.a.grid.d:
            raise ValueError(
                f"u needs {self.a.grid.d} components, got {self.u.ncomp}"
            )
        if not self.kappa > 1.0:
            raise ValueError(f"kappa must exceed 1, got {self.kappa}")

    @property
    def grid(self) -> Grid:
        return self.a.grid


def check_invertibility(state: State, laws: MaterialLaws) -> None:
    """Hard range guard: sup |κ^{−1/2} a| must stay inside the radius.

    Raises:
        StateRangeError: when the state has left the invertible range.
    """
    b_sup = float(np.max(np.abs(state.a.physical()))) / np.sqrt(state.kappa)
    radius = invertibility_radius(laws)
    if b_sup > radius:
        raise StateRangeError(
            f"sup|kappa^(-1/2) a| = {b_sup:.6g} exceeds invertibility radius "
            f"{radius:.6g}"
        )


def to_perturbation(
    rho: SpectralField, u: SpectralField, laws: MaterialLaws, t: float = 0.0
) -> State:
    """Map primitive (ρ, u) to the working variables (a, u).

    The composition √κ·L(ρ) is evaluated pointwise on physical samples
    with no intermediate truncation, so a round trip through
    :func:`to_primitive` is exact to rounding.
    """
    rho_phys = rho.physical()[0]
    a_phys = np.sqrt(laws.kappa) * ell(rho_phys, laws)
    a = SpectralField.from_physical(rho.grid, a_phys)
    return State(a=a, u=u, kappa=laws.kappa, t=t)


def to_primitive(state: State, laws: MaterialLaws) -> tuple[SpectralField, SpectralField]:
    """Map (a, u) back to primitive (ρ, u) (pointwise inversion of L)."""
    check_invertibility(state, laws)
    b_phys = state.a.physical()[0] / np.sqrt(state.kappa)
    rho_phys = ell_inverse(b_phys, laws)
    rho = SpectralField.from_physical(state.grid, rho_phys)
    return rho, state.u


@dataclass(frozen=True)
class CoefficientFns:
    """The composed coefficient functions of b = κ^{−1/2} a.

    Each attribute is a vectorized callable of the physical samples of b;
    all vanish at b = 0.
    """

    q_tilde: Callable[[npt.NDArray], npt.NDArray]
    g_tilde: Callable[[npt.NDArray], npt.NDArray]
    psi_tilde: Callable[[npt.NDArray], npt.NDArray]
    mu_tilde: Callable[[npt.NDArray], npt.NDArray]
    lam_tilde: Callable[[npt.NDArray], npt.NDArray]

    @classmethod
    def for_laws(cls, laws: MaterialLaws) -> "CoefficientFns":
        def rho_of(b: npt.NDArray) -> npt.NDArray:
            return ell_inverse(b, laws)

        def q_tilde(b):
            return 1.0 / rho_of(b) - 1.0

        def g_tilde(b):
            r = rho_of(b)
            return laws.pressure_slope(r) / np.sqrt(laws.capillary_weight(r) * r) - 1.0

        def psi_tilde(b):
            r = rho_of(b)
            return np.sqrt(laws.capillary_weight(r) * r) - 1.0

        def mu_tilde(b):
            return laws.shear_viscosity(rho_of(b)) - 1.0

        def lam_tilde(b):
            return laws.volume_viscosity(rho_of(b)) - 1.0

        return cls(q_tilde, g_tilde, psi_tilde, mu_tilde, lam_tilde)


def rhs_linear(state: State) -> tuple[SpectralField, SpectralField]:
    """Constant-coefficient part: (−√κ div u, Δu + ∇div u − κ^{−1/2}∇a + √κ∇Δa)."""
    rk = np.sqrt(state.kappa)
    da = -rk * divergence(state.u)
    grad_div = gradient(divergence(state.u))
    du = (
        laplacian(state.u)
        + grad_div
        - (1.0 / rk) * gradient(state.a)
        + rk * gradient(laplacian(state.a))
    )
    return da, du


def nonlinearity_f(state: State, laws: MaterialLaws) -> SpectralField:
    """Mass-side nonlinearity f = −u·∇a − √κ ψ̃(b) div u (dealiased)."""
    grid = state.grid
    coeffs = CoefficientFns.for_laws(laws)
    rk = np.sqrt(state.kappa)
    b = state.a.physical()[0] / rk
    u_phys = state.u.physical()
    grad_a = gradient(state.a).physical()
    div_u = divergence(state.u).physical()[0]
    f_phys = -np.sum(u_phys * grad_a, axis=0) - rk * coeffs.psi_tilde(b) * div_u
    return SpectralField.from_physical(grid, f_phys).dealias()


def nonlinearity_g(
    state: State, laws: MaterialLaws
) -> tuple[SpectralField, dict[str, SpectralField]]:
    """Momentum-side nonlinearity g and its five retrievable parts.

    Returns:
        ``(g, parts)`` with ``parts`` keyed "g1".."g5"; all dealiased and
        g = g1 + g2 + g3 + g4 + g5 exactly.
    """
    grid = state.grid
    d = grid.d
    coeffs = CoefficientFns.for_laws(laws)
    rk = np.sqrt(state.kappa)
    b = state.a.physical()[0] / rk
    u_phys = state.u.physical()
    grad_u = grad_components(state.u)  # (i, j) -> ∂_j u_i
    grad_a = gradient(state.a).physical()
    lap_a = laplacian(state.a).physical()[0]
    div_u_f = divergence(state.u)
    div_u = div_u_f.physical()[0]

    def pack(phys: npt.NDArray) -> SpectralField:
        return SpectralField.from_physical(grid, phys).dealias()

    # g1 = -(u·∇)u
    adv = np.einsum("j...,ij...->i...", u_phys, grad_u)
    g1 = pack(-adv)

    # g2: density-weighted viscosity defect
    qt = coeffs.q_tilde(b)
    abar = laplacian(state.u).coeffs + 2.0 * gradient(div_u_f).coeffs
    abar_phys = grid.ifft(abar).real
    g2_phys = qt * abar_phys
    mu_t = coeffs.mu_tilde(b)
    lam_t = coeffs.lam_tilde(b)
    if np.max(np.abs(mu_t)) > 0.0 or np.max(np.abs(lam_t)) > 0.0:
        sym = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))
        stress = grid.fft((2.0 * mu_t) * sym)
        div_stress = 1j * np.einsum("j...,ij...->i...", grid.kvec, stress)
        lam_div = grid.fft(lam_t * div_u)
        grad_lam = 1j * grid.kvec * lam_div
        g2_phys = g2_phys + (1.0 + qt) * grid.ifft(div_stress + grad_lam).real
    g2 = pack(g2_phys)

    # g3 = -κ^{-1/2} G̃(b) ∇a
    g3 = pack(-(1.0 / rk) * coeffs.g_tilde(b) * grad_a)

    # g4 = +√κ ∇(ψ̃(b) Δa)
    inner4 = pack(coeffs.psi_tilde(b) * lap_a)
    g4 = rk * gradient(inner4)

    # g5 = +½ ∇(|∇a|²)
    inner5 = pack(np.sum(grad_a**2, axis=0))
    g5 = 0.5 * gradient(inner5)

    parts = {"g1": g1, "g2": g2, "g3": g3, "g4": g4, "g5": g5}
    total = g1 + g2 + g3 + g4 + g5
    return total, parts


def _primitive_offset_rhs(
    dev_phys: npt.NDArray, u: SpectralField, laws: MaterialLaws
) -> tuple[SpectralField, SpectralField]:
    """∂t(δ, u) with the density carried as the offset δ = ρ − 1.

    All derivatives of the density act on the offset field.  Densities
    stored near 1 carry an absolute eps rounding on every sample, which
    transforms into a white spectral floor; the κ∇Δ capillary pipeline
    amplifies that floor by ~κ|ξ|³ into visible band-edge garbage.  The
    offset samples carry the same rounding *relative to δ*, keeping the
    floor proportional to the signal.  Pointwise coefficient evaluations
    (1/ρ, μ(ρ), ...) are insensitive and use ρ = 1 + δ directly.
    """
    grid = u.grid
    rho_phys = 1.0 + dev_phys
    if np.min(rho_phys) < RHO_FLOOR:
        raise StateRangeError(f"density fell below the floor {RHO_FLOOR}")
    u_phys = u.physical()
    dev = SpectralField.from_physical(grid, dev_phys)

    # mass: ∂t δ = -div(u) - div(δ u)
    flux_dev = SpectralField.from_physical(grid, dev_phys * u_phys)
    ddev = -1.0 * divergence(u) - divergence(flux_dev.dealias())

    # momentum pieces, all physical then packed
    grad_u = grad_components(u)
    adv = np.einsum("j...,ij...->i...", u_phys, grad_u)

    grad_rho = gradient(dev).physical()
    lap_rho = laplacian(dev).physical()[0]
    pressure_term = (laws.pressure_slope(rho_phys) / rho_phys) * grad_rho

    sym = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))
    stress = grid.fft((2.0 * laws.shear_viscosity(rho_phys)) * sym)
    div_stress = 1j * np.einsum("j...,ij...->i...", grid.kvec, stress)
    div_u = divergence(u).physical()[0]
    lam_div = grid.fft(laws.volume_viscosity(rho_phys) * div_u)
    visc_phys = grid.ifft(div_stress + 1j * grid.kvec * lam_div).real
    visc_term = visc_phys / rho_phys

    kort_inner = laws.capillary_weight(rho_phys) * lap_rho + 0.5 * laws.capillary_weight_slope(
        rho_phys
    ) * np.sum(grad_rho**2, axis=0)
    kort = laws.kappa * gradient(
        SpectralField.from_physical(grid, kort_inner).dealias()
    )

    du_phys = -adv - pressure_term + visc_term
    du = SpectralField.from_physical(grid, du_phys).dealias() + kort
    # constant-coefficient stress alignment
    du = du - gradient(divergence(u))
    return ddev, du


def primitive_rhs(
    rho: SpectralField, u: SpectralField, laws: MaterialLaws
) -> tuple[SpectralField, SpectralField]:
    """∂t(ρ, u) of the governing system in primitive variables.

    The momentum equation is divided through by ρ and carries the
    −∇div u stress alignment (see the module docstring).  Note ∂tρ = ∂tδ
    for the offset δ = ρ − 1, so the returned mass rate is exactly the
    offset rate of :func:`_primitive_offset_rhs`.
    """
    dev_phys = rho.physical()[0] - 1.0
    return _primitive_offset_rhs(dev_phys, u, laws)


def rhs_defect(state: State, laws: MaterialLaws) -> tuple[SpectralField, SpectralField]:
    """Full ∂t(a, u) computed through the primitive route.

    Independent of the term list in :func:`nonlinearity_f` /
    :func:`nonlinearity_g`: inverts L pointwise for the density offset,
    evaluates the primitive right-hand side, and chains back through
    a = √κ L(ρ).
    """
    grid = state.grid
    check_invertibility(state, laws)
    b_phys = state.a.physical()[0] / np.sqrt(state.kappa)
    dev_phys = ell_inverse_offset(b_phys, laws)
    ddev, du = _primitive_offset_rhs(dev_phys, state.u, laws)
    da_phys = (
        np.sqrt(state.kappa)
        * ell_slope(1.0 + dev_phys, laws)
        * ddev.physical()[0]
    )
    da = SpectralField.from_physical(grid, da_phys).dealias()
    return da, du


def rhs_remainder(state: State, laws: MaterialLaws) -> tuple[SpectralField, SpectralField]:
    """Nonlinear remainder (defect minus constant-coefficient part)."""
    da_full, du_full = rhs_defect(state, laws)
    da_lin, du_lin = rhs_linear(state)
    return da_full - da_lin, du_full - du_lin


def rhs_term_list(state: State, laws: MaterialLaws) -> tuple[SpectralField, SpectralField]:
    """∂t(a, u) assembled the other way: linear part plus (f, g)."""
    da_lin, du_lin = rhs_linear(state)
    f = nonlinearity_f(state, laws)
    g, _ = nonlinearity_g(state, laws)
    return da_lin + f, du_lin + g
