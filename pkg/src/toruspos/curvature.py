"""Line-bundle metrics, Chern curvature, and degree pairings on flat tori.

A Hermitian metric on a line bundle over the torus is stored as a constant
curvature representative ``r_const`` plus a real weight ``phi``; the metric
itself is ``h = exp(-phi) * h0`` where h0 has curvature ``r_const``. The
full Chern curvature is then

    R = r_const + complex_hessian(phi),

a Hermitian matrix field. Changing the weight by ``phi -> phi - f``
(multiplying h by exp(f)) subtracts the Hessian of f from R and leaves all
degree pairings untouched, which is the exactness property the integrals
below are tested against.

The volume form of a constant Hermitian metric Omega is normalized as
``det(Omega)`` times Lebesgue measure (the top wedge power divided by n
factorial). Every quantity in this package uses that one convention; see
CONVENTIONS.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConstantMetricError, UnsupportedDimensionError
from .expressions import scalar_field_from_expression
from .lattice import (
    HermitianMatrixField,
    MetricField,
    ScalarField,
    TorusGeometry,
    compensated_sum,
    complex_hessian,
    complex_hessian_entry_of_complex,
    constant_representative,
    is_constant_field,
)

HERMITIAN_MATRIX_RTOL = 1e-12


def _check_constant_hermitian(matrix: np.ndarray, n: int) -> np.ndarray:
    mat = np.asarray(matrix, dtype=np.complex128)
    if mat.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix contains non-finite entries")
    scale = max(float(np.max(np.abs(mat))), 1.0)
    if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_MATRIX_RTOL * scale:
        raise ValueError("matrix is not Hermitian")
    return mat


@dataclass
class LineBundleMetric:
    """Hermitian line-bundle metric ``h = exp(-phi) h0`` on a flat torus.

    ``r_const`` is the constant curvature matrix of the reference metric
    h0 and doubles as the constant representative of the curvature class.
    ``phi_expression`` optionally records the closed form the weight was
    built from, so configs and reports round-trip exactly.
    """

    geometry: TorusGeometry
    r_const: np.ndarray
    phi: ScalarField
    phi_expression: str | None = None

    def __post_init__(self) -> None:
        n = self.geometry.complex_dim
        self.r_const = _check_constant_hermitian(self.r_const, n)
        if self.phi.geometry != self.geometry:
            raise ValueError("weight is sampled on a different grid")

    @classmethod
    def from_constant(
        cls, geometry: TorusGeometry, r_const: np.ndarray
    ) -> "LineBundleMetric":
        return cls(geometry, r_const, ScalarField.constant(geometry, 0.0), "0")

    @classmethod
    def from_expression(
        cls, geometry: TorusGeometry, r_const: np.ndarray, phi_text: str
    ) -> "LineBundleMetric":
        phi = scalar_field_from_expression(geometry, phi_text)
        return cls(geometry, r_const, phi, phi_text)

    def dual(self) -> "LineBundleMetric":
        """Metric induced on the inverse bundle; curvature flips sign."""
        return LineBundleMetric(
            self.geometry,
            -self.r_const,
            ScalarField(self.geometry, -self.phi.values),
            None,
        )

    def with_weight(self, phi: ScalarField, expression: str | None = None):
        return LineBundleMetric(self.geometry, self.r_const, phi, expression)


@dataclass
class PositivityCertificate:
    """Outcome of a positivity check, with enough data to audit it.

    ``margin`` is the worst-case quantity the verdict is judged on (an
    eigenvalue, an eigenvalue sum, or a scalar-curvature constant,
    depending on the producing operation). A true verdict always means
    ``margin > tolerance``; this is enforced at construction time.
    """

    verdict: bool
    margin: float
    tolerance: float
    witness_metric: MetricField | None = None
    witness_weight: ScalarField | None = None
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.margin = float(self.margin)
        self.tolerance = float(self.tolerance)
        if self.verdict and not self.margin > self.tolerance:
            raise ValueError(
                f"inconsistent certificate: verdict true with margin "
                f"{self.margin!r} <= tolerance {self.tolerance!r}"
            )

    def to_json_dict(self) -> dict:
        out = {
            "verdict": bool(self.verdict),
            "margin": self.margin,
            "tolerance": self.tolerance,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
        }
        for key, value in sorted(self.details.items()):
            out[key] = value
        if self.witness_metric is not None:
            try:
                const = constant_representative(self.witness_metric)
                out["witness_metric"] = complex_matrix_to_json(const)
            except NonConstantMetricError:
                out["witness_metric"] = "field"
        if self.witness_weight is not None:
            w = self.witness_weight
            out["witness_weight"] = {
                "mean": w.mean(),
                "max_abs": w.max_abs(),
            }
        return out


def chern_curvature(L: LineBundleMetric) -> HermitianMatrixField:
    """Full curvature field ``r_const + complex_hessian(phi)``."""
    geom = L.geometry
    if not np.any(L.phi.values):
        return HermitianMatrixField.constant(geom, L.r_const)
    hess = complex_hessian(L.phi)
    return HermitianMatrixField(geom, L.r_const + hess.values)


def scalar_curvature(L: LineBundleMetric, omega: MetricField) -> ScalarField:
    """Trace of the curvature against the base metric, pointwise.

    Equals the sum of the generalized eigenvalues of (R, Omega) at each
    grid point, and scales by exp(-u) when omega is scaled by exp(u).
    """
    geom = L.geometry
    if omega.geometry != geom:
        raise ValueError("base metric lives on a different grid")
    R = chern_curvature(L)
    if is_constant_field(omega):
        W = np.linalg.inv(constant_representative(omega))
        tr = np.einsum("ij,...ji->...", W, R.values)
    else:
        W = np.linalg.inv(omega.values)
        tr = np.einsum("...ij,...ji->...", W, R.values)
    return ScalarField(geom, tr.real)


def volume_integral(omega: MetricField) -> float:
    """Total volume ``integral of det(Omega)`` over the torus."""
    dets = np.linalg.det(omega.values).real
    return omega.geometry.cell_volume * compensated_sum(dets)


def degree_integral(L: LineBundleMetric, omega: MetricField) -> float:
    """Pairing of the curvature class with the (n-1)-st power of omega.

    Computed through the trace route as ``(1/n) * integral of
    trace(Omega^{-1} R) * det(Omega)``. Only constant base metrics are
    accepted: on a flat torus those are automatically Kaehler, hence the
    pairing is an invariant of the curvature class (independent of phi).
    """
    geom = L.geometry
    const = constant_representative(omega)  # NonConstantMetricError if it varies
    n = geom.complex_dim
    tr = scalar_curvature(L, omega)
    det = float(np.linalg.det(const).real)
    return det / n * geom.cell_volume * compensated_sum(tr.values)


def wedge_degree_check(L: LineBundleMetric, omega: MetricField) -> float:
    """Same pairing as degree_integral via explicit exterior algebra.

    Independent code path used as a cross-check: for n = 1 the pairing is
    the plain integral of R_11; for n = 2 it is half the integral of the
    (2,2)-coefficient of R wedge omega, expanded entry by entry. Dimension
    three and up is not supported.
    """
    geom = L.geometry
    n = geom.complex_dim
    if n > 2:
        raise UnsupportedDimensionError(
            f"wedge expansion implemented for n <= 2, got n = {n}"
        )
    const = constant_representative(omega)
    R = chern_curvature(L).values
    if n == 1:
        return geom.cell_volume * compensated_sum(R[..., 0, 0].real)
    coeff = (
        R[..., 0, 0] * const[1, 1]
        + R[..., 1, 1] * const[0, 0]
        - R[..., 0, 1] * const[1, 0]
        - R[..., 1, 0] * const[0, 1]
    )
    return 0.5 * geom.cell_volume * compensated_sum(coeff.real)


def gauduchon_defect(omega: MetricField) -> float:
    """Sup-norm of the obstruction to omega being Gauduchon.

    The obstruction is the mixed-second-derivative coefficient of the
    (n-1)-st wedge power of omega; it vanishes identically for constant
    metrics. For n = 1 that power is the constant function 1, so the
    defect is 0 by convention. Not implemented for n >= 3.
    """
    geom = omega.geometry
    n = geom.complex_dim
    if n == 1:
        return 0.0
    if n > 2:
        raise UnsupportedDimensionError(
            f"defect coefficient implemented for n <= 2, got n = {n}"
        )
    vals = omega.values
    coeff = (
        complex_hessian_entry_of_complex(geom, vals[..., 1, 1], 0, 0)
        + complex_hessian_entry_of_complex(geom, vals[..., 0, 0], 1, 1)
        - complex_hessian_entry_of_complex(geom, vals[..., 1, 0], 0, 1)
        - complex_hessian_entry_of_complex(geom, vals[..., 0, 1], 1, 0)
    )
    # Hermitian symmetry of omega makes the coefficient real up to round-off.
    assert float(np.max(np.abs(coeff.imag))) <= 1e-10 * (
        1.0 + float(np.max(np.abs(coeff.real)))
    )
    return float(np.max(np.abs(coeff.real)))


def complex_matrix_to_json(matrix: np.ndarray) -> list:
    """Nested [real, imag] pairs, row major."""
    mat = np.asarray(matrix, dtype=np.complex128)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def complex_matrix_from_json(data) -> np.ndarray:
    rows = []
    for row in data:
        entries = []
        for cell in row:
            if isinstance(cell, (int, float)):
                entries.append(complex(cell, 0.0))
            else:
                re, im = cell
                entries.append(complex(re, im))
        rows.append(entries)
    return np.asarray(rows, dtype=np.complex128)


def bundle_to_json_dict(L: LineBundleMetric) -> dict:
    """Serialize a bundle metric; the weight must carry its expression."""
    if L.phi_expression is None:
        raise ValueError(
            "cannot serialize a weight without its expression; "
            "export the field to CSV instead"
        )
    return {
        "r_const": complex_matrix_to_json(L.r_const),
        "phi": L.phi_expression,
    }


def bundle_from_json_dict(geometry: TorusGeometry, data: dict) -> LineBundleMetric:
    """Inverse of bundle_to_json_dict.

    The weight is either expression text or {"csv": path} referencing a
    field exported with scalar_field_to_csv.
    """
    from .lattice import scalar_field_from_csv

    r_const = complex_matrix_from_json(data["r_const"])
    phi_spec = data.get("phi", "0")
    if isinstance(phi_spec, dict):
        phi = scalar_field_from_csv(geometry, phi_spec["csv"])
        return LineBundleMetric(geometry, r_const, phi, None)
    return LineBundleMetric.from_expression(geometry, r_const, phi_spec)
