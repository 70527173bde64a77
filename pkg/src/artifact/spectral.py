"""Fourier-side fields and multiplier algebra on a periodic box.

Everything downstream (dyadic analysis, propagators, the flow model)
manipulates fields through this module.  Conventions, fixed once here:

* The domain is the torus ``[0, Ldom)^d`` sampled on a uniform ``n^d`` grid.
* ``numpy.fft`` with ``norm="forward"``: spectral coefficients are
  Fourier-series amplitudes, so Parseval reads
  ``∫|f|² dx = Vol · Σ_k |c_k|²``.
* A physical-space product of band-limited fields is followed by spherical
  2/3-rule dealiasing (``|ξ| ≤ (2/3)·ξ_Nyquist``); callers do this
  explicitly via :meth:`SpectralField.dealias`.
* Multipliers are radial symbols ``m(|ξ|)``; the zero mode of a symbol that
  is singular at the origin is defined to be 0 (relevant for ``U⁻¹`` and
  inverse Laplacians).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt


class Grid:
    """Uniform periodic grid with precomputed wavevector arrays.

    Attributes:
        d: spatial dimension (1, 2 or 3).
        n: points per axis.
        ldom: box side length.
        dx: grid spacing ``ldom / n``.
        volume: box volume ``ldom**d``.
        k1: 1-d array of per-axis angular wavenumbers (FFT layout).
        kvec: array of shape ``(d, n, ..., n)`` with ξ components.
        kmod: ``|ξ|`` on the full grid.
        k2: ``|ξ|²`` on the full grid.
        k0: smallest positive wavenumber, ``2π / ldom``.
        k_nyquist: per-axis Nyquist wavenumber ``π n / ldom``.
        dealias_radius: spherical 2/3-rule radius ``(2/3) k_nyquist``.
        dealias_mask: boolean array, True on retained modes.
    """

    def __init__(self, d: int, n: int, ldom: float) -> None:
        if d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {d}")
        if n < 4 or n % 2 != 0:
            raise ValueError(f"n must be even and >= 4, got {n}")
        if not ldom > 0:
            raise ValueError(f"ldom must be positive, got {ldom}")
        self.d = d
        self.n = n
        self.ldom = float(ldom)
        self.dx = self.ldom / n
        self.volume = self.ldom**d
        self.shape = (n,) * d
        self.k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx)
        axes = np.meshgrid(*([self.k1] * d), indexing="ij")
        self.kvec = np.stack(axes)
        self.k2 = np.sum(self.kvec**2, axis=0)
        self.kmod = np.sqrt(self.k2)
        self.k0 = 2.0 * np.pi / self.ldom
        self.k_nyquist = np.pi * n / self.ldom
        self.dealias_radius = (2.0 / 3.0) * self.k_nyquist
        self.dealias_mask = self.kmod <= self.dealias_radius
        self._spatial_axes = tuple(range(-d, 0))

    def fft(self, phys: npt.NDArray) -> npt.NDArray[np.complex128]:
        """Forward transform of one or more stacked physical components."""
        return np.fft.fftn(phys, axes=self._spatial_axes, norm="forward")

    def ifft(self, coeffs: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        """Inverse transform; complex output, callers take ``.real`` if due."""
        return np.fft.ifftn(coeffs, axes=self._spatial_axes, norm="forward")

    def wavevector(self, index: Sequence[int]) -> npt.NDArray[np.float64]:
        """ξ at one FFT lattice index.

        Args:
            index: integer index tuple into the coefficient array.

        Returns:
            Array of shape ``(d,)`` with the angular wavevector.
        """
        if len(index) != self.d:
            raise ValueError(f"index must have {self.d} entries, got {len(index)}")
        return np.array([self.k1[i] for i in index])

    def axes_1d(self) -> list[npt.NDArray[np.float64]]:
        """Physical coordinates along each axis."""
        x = np.arange(self.n) * self.dx
        return [x] * self.d

    def meshgrid(self) -> list[npt.NDArray[np.float64]]:
        """Physical coordinate arrays of shape ``(n, ..., n)``."""
        return list(np.meshgrid(*self.axes_1d(), indexing="ij"))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.d, self.n, self.ldom) == (other.d, other.n, other.ldom)

    def __repr__(self) -> str:
        return f"Grid(d={self.d}, n={self.n}, ldom={self.ldom:g})"


def wavevector(grid: Grid, index: Sequence[int]) -> npt.NDArray[np.float64]:
    """Module-level alias for :meth:`Grid.wavevector`."""
    return grid.wavevector(index)


class SpectralField:
    """Band-limited field stored by its Fourier coefficients.

    Coefficients always carry a leading component axis, shape
    ``(ncomp, n, ..., n)``; scalars have ``ncomp == 1``.  Instances are
    treated as immutable values: every operation returns a new field, and
    the lazily computed physical representation is cached.

    Attributes:
        grid: the grid the field lives on.
        coeffs: complex coefficient array.
        real: whether the physical field is real-valued (conjugate-symmetric
            spectrum).  Complex diagnostics (the dispersive z variable) set
            this to False.
    """

    __slots__ = ("grid", "coeffs", "real", "_phys")

    def __init__(self, grid: Grid, coeffs: npt.NDArray, real: bool = True) -> None:
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim == grid.d:
            coeffs = coeffs[np.newaxis]
        if coeffs.shape[1:] != grid.shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match grid {grid.shape}"
            )
        self.grid = grid
        self.coeffs = coeffs
        self.real = real
        self._phys: npt.NDArray | None = None

    @classmethod
    def from_physical(cls, grid: Grid, phys: npt.NDArray) -> "SpectralField":
        """Build a field from physical samples (real input ⇒ real field)."""
        phys = np.asarray(phys)
        if phys.ndim == grid.d:
            phys = phys[np.newaxis]
        real = not np.iscomplexobj(phys)
        return cls(grid, grid.fft(phys), real=real)

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int = 1, real: bool = True) -> "SpectralField":
        return cls(grid, np.zeros((ncomp,) + grid.shape, dtype=np.complex128), real=real)

    @classmethod
    def stack(cls, fields: Sequence["SpectralField"]) -> "SpectralField":
        """Concatenate component axes of fields on a common grid."""
        grid = fields[0].grid
        for f in fields[1:]:
            if f.grid != grid:
                raise ValueError("stack requires a common grid")
        coeffs = np.concatenate([f.coeffs for f in fields], axis=0)
        return cls(grid, coeffs, real=all(f.real for f in fields))

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i : i + 1], real=self.real)

    def physical(self) -> npt.NDArray:
        """Physical samples, shape ``(ncomp, n, ..., n)``; cached."""
        if self._phys is None:
            p = self.grid.ifft(self.coeffs)
            self._phys = p.real if self.real else p
        return self._phys

    def mean(self) -> npt.NDArray:
        """Spatial mean of each component (the k = 0 coefficients)."""
        zero = (slice(None),) + (0,) * self.grid.d
        m = self.coeffs[zero]
        return m.real if self.real else m

    def remove_mean(self) -> "SpectralField":
        c = self.coeffs.copy()
        zero = (slice(None),) + (0,) * self.grid.d
        c[zero] = 0.0
        return SpectralField(self.grid, c, real=self.real)

    def dealias(self) -> "SpectralField":
        """Apply the spherical 2/3-rule mask (idempotent)."""
        return SpectralField(self.grid, self.coeffs * self.grid.dealias_mask, real=self.real)

    def hermitize(self) -> "SpectralField":
        """Project onto exactly conjugate-symmetric coefficients.

        A real field promises c(−ξ) = conj(c(ξ)).  Coefficient arithmetic
        keeps that only up to rounding, and the leaked component is
        invisible to every physical-space evaluation while still being
        acted on by multiplier algebra, so a time stepper that mixes the
        two routes can amplify it unchecked (see
        :func:`artifact.propagators.advance`).  No-op for complex fields.
        """
        if not self.real:
            return self
        mirror = self.coeffs
        for ax in range(1, self.coeffs.ndim):
            mirror = np.flip(np.roll(mirror, -1, axis=ax), axis=ax)
        return SpectralField(self.grid, 0.5 * (self.coeffs + np.conj(mirror)), real=True)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs, real=self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs, real=self.real and other.real)

    def __mul__(self, scalar: float) -> "SpectralField":
        c = complex(scalar)
        return SpectralField(
            self.grid, self.coeffs * c, real=self.real and c.imag == 0.0
        )

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, real=self.real)

    def __repr__(self) -> str:
        return f"SpectralField(ncomp={self.ncomp}, grid={self.grid!r}, real={self.real})"


@dataclass(frozen=True)
class FourierMultiplier:
    """Radial Fourier symbol ``m(|ξ|)`` with bookkeeping metadata.

    Attributes:
        name: short human-readable symbol name.
        fn: vectorized callable evaluating the symbol on an array of ``|ξ|``.
        degree: homogeneity degree for |ξ| → ∞ (None when not homogeneous).
        zero_value: value assigned at ξ = 0 when the symbol is singular
            there; defaults to whatever ``fn(0)`` gives when finite, else 0.
    """

    name: str
    fn: Callable[[npt.NDArray[np.float64]], npt.NDArray]
    degree: float | None = None
    zero_value: float = 0.0

    def values(self, grid: Grid) -> npt.NDArray:
        """Evaluate on a grid, fixing the zero mode and rejecting NaNs.

        Raises:
            ValueError: if the symbol is non-finite at a retained ξ ≠ 0.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(self.fn(grid.kmod))
        vals = np.broadcast_to(vals, grid.shape).copy()
        zero = (0,) * grid.d
        if not np.isfinite(vals[zero]):
            vals[zero] = self.zero_value
        bad = ~np.isfinite(vals) & grid.dealias_mask
        if np.any(bad):
            idx = tuple(int(i[0]) for i in np.nonzero(bad))
            raise ValueError(
                f"multiplier {self.name!r} is non-finite at retained mode ξ = "
                f"{grid.wavevector(idx)}"
            )
        return vals

    def __call__(self, kmod: npt.NDArray[np.float64]) -> npt.NDArray:
        return self.fn(kmod)


def apply_multiplier(m: FourierMultiplier, f: SpectralField) -> SpectralField:
    """Apply a radial symbol to every component of a field."""
    vals = m.values(f.grid)
    real = f.real and bool(np.all(np.isreal(vals)))
    return SpectralField(f.grid, f.coeffs * vals, real=real)


def op_H(kappa: float) -> FourierMultiplier:
    """Dispersive frequency symbol H(ξ) = |ξ|·√(κ⁻¹ + |ξ|²)."""
    _check_kappa(kappa)
    return FourierMultiplier(
        name=f"H[kappa={kappa:g}]",
        fn=lambda r: r * np.sqrt(1.0 / kappa + r**2),
        degree=2.0,
    )


def op_U(kappa: float) -> FourierMultiplier:
    """Wave-to-Schrödinger weight U(ξ) = |ξ| / √(κ⁻¹ + |ξ|²)."""
    _check_kappa(kappa)
    return FourierMultiplier(
        name=f"U[kappa={kappa:g}]",
        fn=lambda r: r / np.sqrt(1.0 / kappa + r**2),
        degree=0.0,
    )


def op_U_inv(kappa: float) -> FourierMultiplier:
    """Inverse weight U⁻¹(ξ) = √(κ⁻¹ + |ξ|²) / |ξ|, with U⁻¹(0) := 0.

    The symbol is singular at the origin; the zero mode is defined to be 0,
    matching the convention that it only ever acts on mean-free fields
    (gradients).
    """
    _check_kappa(kappa)
    return FourierMultiplier(
        name=f"Uinv[kappa={kappa:g}]",
        fn=lambda r: np.sqrt(1.0 / kappa + r**2) / r,
        degree=0.0,
        zero_value=0.0,
    )


def lambda_pow(alpha: float) -> FourierMultiplier:
    """|ξ|^α with the zero mode defined as 0 for α ≤ 0 (mean-free use).

    For α = 0 this is the identity on the mean-free part: homogeneous-space
    diagnostics on the torus never see the constant mode.
    """
    if alpha == 0.0:
        fn = lambda r: np.where(r > 0.0, 1.0, 0.0)
    else:
        fn = lambda r: r**alpha
    return FourierMultiplier(name=f"Lambda^{alpha:g}", fn=fn, degree=alpha, zero_value=0.0)


def heat_symbol(t: float, strength: float = 1.0) -> FourierMultiplier:
    """Heat kernel symbol e^{−strength·|ξ|²·t}."""
    return FourierMultiplier(
        name=f"heat[{strength:g}·t={t:g}]",
        fn=lambda r: np.exp(-strength * r**2 * t),
        degree=None,
    )


def _check_kappa(kappa: float) -> None:
    if not kappa > 1.0:
        raise ValueError(f"kappa must exceed 1, got {kappa}")


def leray_split(u: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split a velocity field into solenoidal and potential parts.

    Args:
        u: field with d components on a d-dimensional grid.

    Returns:
        ``(Pu, Qu)`` with ``Pu + Qu == u``, ``div Pu == 0`` and
        ``curl Qu == 0``.  The zero mode (spatial mean) is assigned to
        ``Pu``: a constant velocity is trivially divergence-free.
    """
    grid = u.grid
    if u.ncomp != grid.d:
        raise ValueError(f"leray_split needs {grid.d} components, got {u.ncomp}")
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_k2 = np.where(grid.k2 > 0.0, 1.0 / np.where(grid.k2 > 0.0, grid.k2, 1.0), 0.0)
    dot = np.sum(grid.kvec * u.coeffs, axis=0)
    q = grid.kvec * (dot * inv_k2)
    qu = SpectralField(grid, q, real=u.real)
    pu = SpectralField(grid, u.coeffs - q, real=u.real)
    return pu, qu


def gradient(f: SpectralField) -> SpectralField:
    """∇f of a scalar field, returned as a d-component field."""
    if f.ncomp != 1:
        raise ValueError("gradient expects a scalar field")
    g = 1j * f.grid.kvec * f.coeffs[0]
    return SpectralField(f.grid, g, real=f.real)


def divergence(u: SpectralField) -> SpectralField:
    """div u of a d-component field, returned as a scalar field."""
    if u.ncomp != u.grid.d:
        raise ValueError(f"divergence needs {u.grid.d} components, got {u.ncomp}")
    d = 1j * np.sum(u.grid.kvec * u.coeffs, axis=0)
    return SpectralField(u.grid, d[np.newaxis], real=u.real)


def laplacian(f: SpectralField) -> SpectralField:
    """Δf, componentwise."""
    return SpectralField(f.grid, -f.grid.k2 * f.coeffs, real=f.real)


def grad_components(u: SpectralField) -> npt.NDArray:
    """Physical ∂_j u_i for all components, shape ``(ncomp, d, n, ..., n)``.

    Convenience for nonlinear terms: one inverse transform per derivative.
    """
    grid = u.grid
    der = 1j * grid.kvec[np.newaxis, :] * u.coeffs[:, np.newaxis]
    flat = der.reshape((u.ncomp * grid.d,) + grid.shape)
    phys = grid.ifft(flat)
    if u.real:
        phys = phys.real
    return phys.reshape((u.ncomp, grid.d) + grid.shape)


def lp_norm(f: SpectralField, p: float) -> float:
    """Lᵖ norm of the pointwise Euclidean magnitude over components.

    p = 2 is evaluated spectrally via Parseval (``√Vol · ‖coeffs‖₂``, exact
    for band-limited fields); p = ∞ is a grid max; other p use the
    rectangle rule on the physical samples.

    Args:
        f: field (any component count; components enter through the
            pointwise Euclidean magnitude).
        p: 1 ≤ p ≤ ∞ (``numpy.inf`` accepted).

    Returns:
        The norm as a float.
    """
    if p == 2:
        return float(np.sqrt(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2)))
    if not np.any(f.coeffs):
        return 0.0
    phys = f.physical()
    mag = np.sqrt(np.sum(np.abs(phys) ** 2, axis=0))
    if np.isinf(p):
        return float(np.max(mag))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((np.sum(mag**p) * f.grid.dx**f.grid.d) ** (1.0 / p))
