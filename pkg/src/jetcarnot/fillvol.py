"""Filling-volume lower bounds from the calibration argument.

The cycle ``T_L`` is the push-forward of the boundary of ``Q^{n+1}`` under
``delta_L o F``.  Only two scalars matter: an upper bound on its mass,
``L^n Lip(F)^n Vol(dQ^{n+1})``, and a lower bound on the mass of any filling,
``L^{n+k+1} |int (f_0 - f_1)|``.  Eliminating ``L`` gives
``Fillvol >= delta M^{(n+k+1)/n}``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from .nonextension import BoundaryMapSpec, lip_dc_upper


def boundary_volume(n: int) -> int:
    """``Vol(dQ^{n+1}) = 2 (n + 1)``."""
    return 2 * (n + 1)


def fill_exponent(n: int, k: int) -> float:
    return (n + k + 1) / n


def mass_upper(spec: BoundaryMapSpec, L: float, lipF_upper: float) -> float:
    """``L^n lipF_upper^n Vol(dQ^{n+1})``."""
    if not (L > 0 and lipF_upper > 0):
        raise ValueError("L and lipF_upper must be positive")
    return float(L**spec.n * lipF_upper**spec.n * boundary_volume(spec.n))


def mass_inverse(spec: BoundaryMapSpec, mass: float, lipF_upper: float) -> float:
    """The ``L`` at which ``mass_upper`` equals ``mass``."""
    if not (mass > 0 and lipF_upper > 0):
        raise ValueError("mass and lipF_upper must be positive")
    return float((mass / boundary_volume(spec.n)) ** (1.0 / spec.n) / lipF_upper)


def filling_lower(spec: BoundaryMapSpec, L: float) -> float:
    """``L^{n+k+1} |integral_gap|``: no filling of ``T_L`` has less mass."""
    return float(L ** (spec.n + spec.k + 1) * abs(spec.integral_gap))


def delta_constant(spec: BoundaryMapSpec, lipF_upper: float) -> float:
    """``lipF^{-(n+k+1)} Vol^{-(n+k+1)/n} |integral_gap|``."""
    if not lipF_upper > 0:
        raise ValueError("lipF_upper must be positive")
    if spec.integral_gap == 0:
        raise ValueError("zero integral gap gives no filling bound")
    n, k = spec.n, spec.k
    e = n + k + 1
    return float(lipF_upper ** (-e) * boundary_volume(n) ** (-e / n) * abs(spec.integral_gap))


def fv_curve(spec: BoundaryMapSpec, lipF_upper: float, r_values) -> list[tuple[float, float]]:
    """Rows ``(r, delta r^{(n+k+1)/n})`` of the filling-volume lower bound."""
    delta = delta_constant(spec, lipF_upper)
    e = fill_exponent(spec.n, spec.k)
    rows = []
    for r in r_values:
        r = float(r)
        if r < 0:
            raise ValueError("r must be nonnegative")
        rows.append((r, delta * r**e))
    return rows


def fv_curve_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "fv_lower"])
    for r, v in rows:
        w.writerow([repr(r), repr(v)])
    return buf.getvalue()


@dataclass
class FillingRow:
    L: float
    mass_upper: float
    filling_lower: float
    identity_residual: float


@dataclass
class FillingReport:
    n: int
    k: int
    integral_gap: str
    lipF_upper: float
    delta: float
    exponent: float
    rows: list[FillingRow] = field(default_factory=list)

    @property
    def identity_ok(self) -> bool:
        return all(r.identity_residual <= 1e-12 for r in self.rows)

    def to_json(self) -> str:
        d = asdict(self)
        d["identity_ok"] = self.identity_ok
        return json.dumps(d, indent=1, sort_keys=True)


def filling_report(spec: BoundaryMapSpec, Ls, lipF_upper: float | None = None) -> FillingReport:
    """Mass and filling bounds per ``L`` with the relative residual of ``delta M^e = filling``."""
    if lipF_upper is None:
        lipF_upper = lip_dc_upper(spec)
    delta = delta_constant(spec, lipF_upper)
    e = fill_exponent(spec.n, spec.k)
    rows = []
    for L in Ls:
        M = mass_upper(spec, L, lipF_upper)
        lower = filling_lower(spec, L)
        rows.append(FillingRow(float(L), M, lower, abs(delta * M**e - lower) / lower))
    return FillingReport(spec.n, spec.k, str(spec.integral_gap), lipF_upper, delta, e, rows)
