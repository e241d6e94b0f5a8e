"""Flat-torus grids, field containers, and spectral calculus.

The torus ``C^n / Lambda`` is sampled on a regular rectangular grid. Real
coordinates are interleaved as ``(x_1, y_1, ..., x_n, y_n)`` with
``z_j = x_j + i y_j``: array axis ``2j`` carries ``x_{j+1}`` and axis
``2j+1`` carries ``y_{j+1}``. Every differential operator is evaluated by
frequency-space multipliers, so derivatives of band-limited data are exact
to round-off. Wirtinger conventions, the Nyquist rule, and the volume
normalization are spelled out in CONVENTIONS.md at the repository root.

All operations are pure functions of their inputs. Pointwise work is
vectorized over grid points and global reductions use either a fixed
traversal order or exactly rounded summation, so repeated runs are
bit-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    GeometryMismatchError,
    MeanNotZeroError,
    NonConstantMetricError,
)

TWO_PI = 2.0 * math.pi

#: Relative tolerance for the Hermitian-symmetry invariant of matrix fields.
HERMITIAN_RTOL = 1e-12

#: Relative tolerance on the grid mean of an elliptic right-hand side.
MEAN_ZERO_RTOL = 1e-8

#: Relative tolerance when extracting the constant representative of a field.
CONSTANT_FIELD_RTOL = 1e-12


@dataclass(frozen=True)
class TorusGeometry:
    """Discretized flat torus ``C^n / (periods * Z^{2n})``.

    Parameters
    ----------
    complex_dim : int
        Complex dimension ``n >= 1``.
    grid_shape : tuple of int
        ``2n`` samples-per-axis counts. Each entry must be even and at
        least 4; the spectral scheme needs an unambiguous Nyquist mode.
    periods : tuple of float
        ``2n`` positive real periods, one per real coordinate.
    """

    complex_dim: int
    grid_shape: tuple[int, ...]
    periods: tuple[float, ...]

    def __post_init__(self) -> None:
        n = self.complex_dim
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"complex_dim must be a positive integer, got {n!r}")
        grid = tuple(int(s) for s in self.grid_shape)
        periods = tuple(float(p) for p in self.periods)
        object.__setattr__(self, "grid_shape", grid)
        object.__setattr__(self, "periods", periods)
        if len(grid) != 2 * n:
            raise ValueError(f"grid_shape needs {2 * n} axes, got {len(grid)}")
        if len(periods) != 2 * n:
            raise ValueError(f"periods needs {2 * n} entries, got {len(periods)}")
        if any(s < 4 or s % 2 != 0 for s in grid):
            raise ValueError(f"grid axes must be even and >= 4, got {grid}")
        if any(not (p > 0 and math.isfinite(p)) for p in periods):
            raise ValueError(f"periods must be positive finite reals, got {periods}")

    @classmethod
    def regular(
        cls,
        complex_dim: int,
        samples: int | tuple[int, ...],
        period: float | tuple[float, ...] = TWO_PI,
    ) -> "TorusGeometry":
        """Build a geometry with uniform (or per-axis) samples and periods."""
        axes = 2 * complex_dim
        grid = (samples,) * axes if isinstance(samples, int) else tuple(samples)
        periods = (
            (float(period),) * axes
            if isinstance(period, (int, float))
            else tuple(period)
        )
        return cls(complex_dim, grid, periods)

    @property
    def num_points(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def cell_volume(self) -> float:
        """Lebesgue volume of one grid cell."""
        return float(np.prod([p / s for p, s in zip(self.periods, self.grid_shape)]))

    @property
    def volume(self) -> float:
        """Total Lebesgue volume of the torus."""
        return float(np.prod(self.periods))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Sample positions along one real axis (length ``grid_shape[axis]``)."""
        s = self.grid_shape[axis]
        return self.periods[axis] * np.arange(s) / s

    def coordinate_arrays(self) -> list[np.ndarray]:
        """Full coordinate arrays, one per real axis, each of grid shape."""
        oned = [self.axis_coordinates(a) for a in range(2 * self.complex_dim)]
        return list(np.meshgrid(*oned, indexing="ij", sparse=False))


def _require_same_geometry(*objs) -> TorusGeometry:
    geom = objs[0].geometry
    for other in objs[1:]:
        if other.geometry != geom:
            raise GeometryMismatchError(
                f"geometry mismatch: {geom} vs {other.geometry}"
            )
    return geom


@lru_cache(maxsize=32)
def _angular_frequencies(geom: TorusGeometry) -> tuple[np.ndarray, ...]:
    """Angular wavenumbers per real axis with the Nyquist entry zeroed.

    Zeroing the Nyquist derivative multiplier keeps odd symmetry of the
    first-derivative symbol on even grids, which is what makes the complex
    Hessian of a real field exactly Hermitian.
    """
    out = []
    for axis in range(2 * geom.complex_dim):
        s = geom.grid_shape[axis]
        k = TWO_PI * np.fft.fftfreq(s, d=geom.periods[axis] / s)
        k[s // 2] = 0.0
        out.append(k)
    return tuple(out)


@lru_cache(maxsize=32)
def _dz_symbols(geom: TorusGeometry) -> np.ndarray:
    """Fourier symbols of d/dz_j, stacked as shape ``(n, *grid_shape)``.

    With the convention d/dz = (d/dx - i d/dy) / 2, a plane wave
    ``exp(i(k_x x + k_y y))`` picks up the factor ``(i/2)(k_x - i k_y)``.
    """
    n = geom.complex_dim
    freqs = _angular_frequencies(geom)
    axes = 2 * n
    full = np.empty((n, *geom.grid_shape), dtype=np.complex128)
    for j in range(n):
        shape_x = [1] * axes
        shape_x[2 * j] = geom.grid_shape[2 * j]
        shape_y = [1] * axes
        shape_y[2 * j + 1] = geom.grid_shape[2 * j + 1]
        kx = freqs[2 * j].reshape(shape_x)
        ky = freqs[2 * j + 1].reshape(shape_y)
        full[j] = 0.5j * (kx - 1j * ky)
    full.setflags(write=False)
    return full


@dataclass
class ScalarField:
    """Real-valued function sampled on the grid."""

    geometry: TorusGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.geometry.grid_shape:
            raise ValueError(
                f"scalar field shape {vals.shape} != grid {self.geometry.grid_shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field contains non-finite values")
        self.values = vals

    @classmethod
    def constant(cls, geometry: TorusGeometry, value: float) -> "ScalarField":
        return cls(geometry, np.full(geometry.grid_shape, float(value)))

    def mean(self) -> float:
        """Exactly rounded grid mean (bit-stable)."""
        return compensated_sum(self.values) / self.geometry.num_points

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class HermitianMatrixField:
    """Field of n x n complex Hermitian matrices, one per grid point."""

    geometry: TorusGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        n = self.geometry.complex_dim
        vals = np.asarray(self.values, dtype=np.complex128)
        expected = (*self.geometry.grid_shape, n, n)
        if vals.shape != expected:
            raise ValueError(f"matrix field shape {vals.shape} != {expected}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix field contains non-finite values")
        scale = float(np.max(np.abs(vals))) if vals.size else 0.0
        dev = float(np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2)))))
        if dev > HERMITIAN_RTOL * scale:
            raise ValueError(
                f"matrix field is not Hermitian: deviation {dev:.3e} "
                f"exceeds {HERMITIAN_RTOL:.0e} * {scale:.3e}"
            )
        self.values = vals

    @classmethod
    def constant(cls, geometry: TorusGeometry, matrix: np.ndarray):
        mat = np.asarray(matrix, dtype=np.complex128)
        full = np.broadcast_to(mat, (*geometry.grid_shape, *mat.shape)).copy()
        return cls(geometry, full)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class MetricField(HermitianMatrixField):
    """Hermitian matrix field that is positive definite at every point."""

    def __post_init__(self) -> None:
        super().__post_init__()
        smallest = float(np.min(np.linalg.eigvalsh(self.values)))
        if not smallest > 0.0:
            raise ValueError(
                f"metric field is not positive definite: min eigenvalue {smallest:.3e}"
            )
        # Cached for certificates; recomputing it is the expensive part above.
        self.min_eigenvalue = smallest


def identity_metric(geometry: TorusGeometry) -> MetricField:
    return constant_metric(geometry, np.eye(geometry.complex_dim))


def constant_metric(geometry: TorusGeometry, matrix: np.ndarray) -> MetricField:
    full = HermitianMatrixField.constant(geometry, matrix)
    return MetricField(geometry, full.values)


def constant_representative(
    field: HermitianMatrixField, rtol: float = CONSTANT_FIELD_RTOL
) -> np.ndarray:
    """Return the constant n x n matrix a constant field represents.

    Raises
    ------
    NonConstantMetricError
        If the field varies over the grid beyond ``rtol`` relative.
    """
    flat = field.values.reshape(-1, *field.values.shape[-2:])
    first = flat[0]
    scale = max(float(np.max(np.abs(first))), 1.0)
    dev = float(np.max(np.abs(flat - first)))
    if dev > rtol * scale:
        raise NonConstantMetricError(
            f"field varies over the grid (max deviation {dev:.3e})"
        )
    return first.copy()


def is_constant_field(field: HermitianMatrixField) -> bool:
    try:
        constant_representative(field)
    except NonConstantMetricError:
        return False
    return True


def compensated_sum(values: np.ndarray) -> float:
    """Exactly rounded sum of all entries (math.fsum over C order).

    The result is independent of traversal order, so parallel callers that
    shard the grid still agree bit-for-bit with the serial reduction.
    """
    return math.fsum(np.asarray(values, dtype=np.float64).ravel(order="C"))


def complex_hessian(phi: ScalarField) -> HermitianMatrixField:
    """Complex Hessian of a real scalar field.

    Entry ``(j, k)`` is the mixed Wirtinger derivative of ``phi`` in
    ``z_j`` and conjugate ``z_k``, evaluated spectrally::

        (1/4) * [ (d_xj d_xk + d_yj d_yk) phi
                  + i (d_xj d_yk - d_yj d_xk) phi ]

    The output is Hermitian at every grid point exactly, not just to
    round-off: the diagonal multipliers ``-|A_j|^2`` are real (so the
    diagonal is returned as the real part of its inverse transform) and
    the lower triangle mirrors the conjugate of the upper triangle, which
    is an identity of the continuum operator on real input.
    """
    geom = phi.geometry
    n = geom.complex_dim
    symbols = _dz_symbols(geom)
    phat = np.fft.fftn(phi.values)
    out = np.empty((*geom.grid_shape, n, n), dtype=np.complex128)
    for j in range(n):
        out[..., j, j] = np.fft.ifftn(-np.abs(symbols[j]) ** 2 * phat).real
        for k in range(j + 1, n):
            multiplier = -symbols[j] * np.conj(symbols[k])
            entry = np.fft.ifftn(multiplier * phat)
            out[..., j, k] = entry
            out[..., k, j] = np.conj(entry)
    return HermitianMatrixField(geom, out)


def complex_hessian_entry_of_complex(
    geom: TorusGeometry, values: np.ndarray, j: int, k: int
) -> np.ndarray:
    """Mixed Wirtinger derivative d^2 / (dz_j dzbar_k) of a complex grid array.

    Internal helper for form calculus on matrix-valued fields (no Hermitian
    symmetry is implied for complex input).
    """
    symbols = _dz_symbols(geom)
    vhat = np.fft.fftn(np.asarray(values, dtype=np.complex128))
    return np.fft.ifftn(-symbols[j] * np.conj(symbols[k]) * vhat)


def integrate(g: ScalarField, vol: ScalarField) -> float:
    """Quadrature ``sum g * vol * cell_volume`` over the grid.

    The periodic trapezoid rule; exact for integrands band-limited below
    the Nyquist frequency.
    """
    geom = _require_same_geometry(g, vol)
    if not np.all(vol.values > 0):
        raise ValueError("volume weight must be positive at every grid point")
    return geom.cell_volume * compensated_sum(g.values * vol.values)


def _trace_symbol(geom: TorusGeometry, inverse_metric: np.ndarray) -> np.ndarray:
    """Fourier symbol of ``phi -> trace(W . complex_hessian(phi))``.

    For Hermitian positive definite ``W`` the symbol equals
    ``-a(m)^H W a(m)`` with ``a`` the stacked d/dz symbols, hence it is
    real, strictly negative on every mode carrying a nonzero derivative
    multiplier, and exactly zero otherwise. A singular symbol on an active
    mode therefore cannot occur; this is asserted below.
    """
    symbols = _dz_symbols(geom)
    sym = -np.einsum(
        "k...,kj,j...->...", np.conj(symbols), inverse_metric, symbols
    ).real
    return sym


def poisson_solve(g: ScalarField, omega: MetricField) -> ScalarField:
    """Solve ``trace(Omega^{-1} complex_hessian(f)) = g`` for mean-zero f.

    ``omega`` must be constant over the grid. The right-hand side must have
    (numerically) zero mean, the periodic solvability condition; otherwise
    MeanNotZeroError is raised. Fourier coefficients of ``g`` are divided by
    the trace symbol; modes with a vanishing symbol (the constant mode and
    pure-Nyquist combinations, which carry no derivative information on an
    even grid) are projected out, so ``g`` should be band-limited below the
    Nyquist frequency.

    Returns f with zero grid mean and residual
    ``|trace(Omega^{-1} H(f)) - g|_inf <= 1e-8 * |g|_inf`` for band-limited g.
    """
    geom = _require_same_geometry(g, omega)
    inverse_metric = np.linalg.inv(constant_representative(omega))

    g_inf = g.max_abs()
    if abs(g.mean()) > MEAN_ZERO_RTOL * g_inf:
        raise MeanNotZeroError(
            f"right-hand side mean {g.mean():.3e} exceeds "
            f"{MEAN_ZERO_RTOL:.0e} * |g|_inf = {MEAN_ZERO_RTOL * g_inf:.3e}"
        )

    symbols = _dz_symbols(geom)
    sym = _trace_symbol(geom, inverse_metric)
    dead = np.sum(np.abs(symbols) ** 2, axis=0) == 0.0
    # Positive definiteness of the metric makes the symbol strictly negative
    # on every active mode; a singular active symbol is impossible.
    assert np.all(sym[~dead] < 0.0), "singular symbol on an active mode"

    ghat = np.fft.fftn(g.values)
    fhat = np.zeros_like(ghat)
    fhat[~dead] = ghat[~dead] / sym[~dead]
    f = np.fft.ifftn(fhat).real
    f -= compensated_sum(f) / geom.num_points
    return ScalarField(geom, f)


def scalar_field_to_csv(field: ScalarField, path: str | Path, name: str = "value") -> Path:
    """Dump one row per grid point: coordinates then the field value."""
    return _columns_to_csv(field.geometry, {name: field.values}, path)


def scalar_field_from_csv(geometry: TorusGeometry, path: str | Path) -> ScalarField:
    """Load a field written by scalar_field_to_csv (last column, C order)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[0] != geometry.num_points:
        raise ValueError(
            f"{path} has {data.shape[0]} rows, grid needs {geometry.num_points}"
        )
    values = data[:, -1].reshape(geometry.grid_shape, order="C")
    return ScalarField(geometry, values)


def _columns_to_csv(
    geom: TorusGeometry, columns: dict[str, np.ndarray], path: str | Path
) -> Path:
    n = geom.complex_dim
    coord_names = []
    for j in range(n):
        coord_names += [f"x{j + 1}", f"y{j + 1}"]
    coords = geom.coordinate_arrays()
    cols = [c.ravel(order="C") for c in coords]
    names = list(coord_names)
    for key, arr in columns.items():
        arr = np.asarray(arr)
        if arr.shape == geom.grid_shape:
            cols.append(arr.ravel(order="C"))
            names.append(key)
        else:
            # trailing component axis, e.g. eigenvalue tuples
            ncomp = arr.shape[-1]
            flat = arr.reshape(-1, ncomp)
            for c in range(ncomp):
                cols.append(flat[:, c])
                names.append(f"{key}{c + 1}")
    data = np.column_stack(cols)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    return path
