"""Blade-element-momentum analysis of an isolated propeller.

Per spanwise section, blade-element forces are balanced against momentum
theory through the axial induction factor with a Prandtl-style tip-loss
correction; thrust and shaft power then follow from Simpson quadrature of
the sectional loading, and efficiency is thrust * airspeed / shaft power.

Conventions: the zero-induction inflow angle is phi0 = atan(v0 / (2 pi n_s r)),
the induced inflow angle is phi = atan(v0 (1 + a) / (2 pi n_s r)), and the
tip-loss factor is evaluated at phi0.  Sections where the tip-loss factor
underflows contribute zero loading (removable singularity at the tip).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import Atmosphere, isa_properties

KP_FLOOR = 1e-6  # below this the section is treated as unloaded tip boundary
_FIXED_POINT_TOL = 1e-6
_MAX_ITERS = 200
_RELAXATION = 0.5


class SectionError(RuntimeError):
    """A spanwise section has no propulsive solution."""

    def __init__(self, message: str, r: float | None = None):
        self.r = r
        super().__init__(message if r is None else f"{message} (r = {r:.4f} m)")


class SectionConvergenceError(SectionError):
    """The induction fixed point failed to converge."""

    def __init__(self, r: float, residual: float):
        self.residual = residual
        super().__init__(
            f"induction iteration did not converge (last residual {residual:.3e})", r
        )


@dataclass(frozen=True)
class PropellerSpec:
    """Blade geometry plus the sectional airfoil polar.

    ``chord_fn`` and ``pitch_fn`` map radius (m) to local chord (m) and
    geometric pitch (rad); ``polar`` maps angle of attack (rad) to a
    (c_l, c_d) pair.  Table-backed specs are built with ``from_tables`` or
    the CSV loaders, which interpolate linearly and clamp at the ends.
    """

    n_blades: int
    r_hub: float
    r_tip: float
    chord_fn: Callable[[float], float]
    pitch_fn: Callable[[float], float]
    polar: Callable[[float], tuple[float, float]]

    def __post_init__(self):
        if self.n_blades < 1:
            raise ValueError("blade count must be >= 1")
        if not (0.0 < self.r_hub < self.r_tip):
            raise ValueError("require 0 < r_hub < r_tip")

    @classmethod
    def from_tables(cls, n_blades, r, chord, pitch_rad, alpha_rad, cl, cd):
        r = np.asarray(r, float)
        chord = np.asarray(chord, float)
        pitch = np.asarray(pitch_rad, float)
        alpha = np.asarray(alpha_rad, float)
        cl = np.asarray(cl, float)
        cd = np.asarray(cd, float)
        if np.any(chord <= 0):
            raise ValueError("chord must be positive along the span")

        def chord_fn(x):
            return float(np.interp(x, r, chord))

        def pitch_fn(x):
            return float(np.interp(x, r, pitch))

        def polar(a):
            return float(np.interp(a, alpha, cl)), float(np.interp(a, alpha, cd))

        return cls(
            n_blades=int(n_blades),
            r_hub=float(r[0]),
            r_tip=float(r[-1]),
            chord_fn=chord_fn,
            pitch_fn=pitch_fn,
            polar=polar,
        )


@dataclass(frozen=True)
class SectionState:
    """Converged flow state of one blade section."""

    r: float
    phi: float  # inflow angle incl. induction, rad
    alpha: float  # angle of attack, rad
    a_a: float  # axial induction factor
    sigma: float  # local solidity N_b b / (2 pi r)
    k_p: float  # tip-loss factor
    cl: float
    cd: float


@dataclass(frozen=True)
class PropellerOperatingPoint:
    v0: float
    n_s: float  # rotational speed, rev/s
    thrust: float  # N
    shaft_power: float  # W
    eta_p: float


def tip_loss(n_b: int, r: float, r_tip: float, phi0: float) -> float:
    """Prandtl tip-loss factor (2/pi) acos(exp(-N_b (R - r) / (2 r sin phi0)))."""
    if not (0.0 < r <= r_tip):
        raise ValueError("require 0 < r <= r_tip")
    if not (0.0 < phi0 < math.pi / 2):
        raise ValueError("inflow angle must be in (0, pi/2)")
    arg = -n_b * (r_tip - r) / (2.0 * r * math.sin(phi0))
    return (2.0 / math.pi) * math.acos(math.exp(arg))


def axial_induction(sigma: float, phi: float, c_l: float, c_d: float, k_p: float) -> float:
    """Axial induction factor from the blade-element/momentum balance.

    a = (4 K_p sin^2(phi) / (sigma [c_l cos(phi) - c_d sin(phi)]) - 1)^-1.
    Raises SectionError when the section force is non-propulsive
    (c_l cos(phi) <= c_d sin(phi)) or the balance degenerates.
    """
    force = c_l * math.cos(phi) - c_d * math.sin(phi)
    if force <= 0.0:
        raise SectionError("non-propulsive section: c_l cos(phi) <= c_d sin(phi)")
    ratio = 4.0 * k_p * math.sin(phi) ** 2 / (sigma * force)
    if ratio == 1.0:
        raise SectionError("momentum balance degenerate (ratio exactly 1)")
    return 1.0 / (ratio - 1.0)


def _zero_loading_state(spec, r, phi0):
    theta = spec.pitch_fn(r)
    cl, cd = spec.polar(theta - phi0)
    return SectionState(
        r=r,
        phi=phi0,
        alpha=theta - phi0,
        a_a=0.0,
        sigma=spec.n_blades * spec.chord_fn(r) / (2.0 * math.pi * r),
        k_p=0.0,
        cl=cl,
        cd=cd,
    )


def solve_section(spec: PropellerSpec, v0: float, n_s: float, r: float) -> SectionState:
    """Solve the coupled inflow-angle/induction fixed point at radius r.

    Damped fixed-point iteration (relaxation 0.5, tolerance 1e-6, at most
    200 iterations) with a bisection fallback on the scalar residual in the
    inflow angle when the iteration oscillates or leaves the propulsive
    regime.  Sections with a vanishing tip-loss factor return the unloaded
    tip boundary state instead of evaluating the (singular) balance.
    """
    if v0 <= 0 or n_s <= 0:
        raise ValueError("airspeed and rotational speed must be positive")
    if not (spec.r_hub <= r <= spec.r_tip):
        raise ValueError(f"radius {r} outside blade span [{spec.r_hub}, {spec.r_tip}]")

    omega_r = 2.0 * math.pi * n_s * r
    phi0 = math.atan2(v0, omega_r)
    k_p = tip_loss(spec.n_blades, r, spec.r_tip, phi0)
    if k_p < KP_FLOOR:
        return _zero_loading_state(spec, r, phi0)

    theta = spec.pitch_fn(r)
    chord = spec.chord_fn(r)
    sigma = spec.n_blades * chord / (2.0 * math.pi * r)

    def section_at(phi):
        alpha = theta - phi
        cl, cd = spec.polar(alpha)
        force = cl * math.cos(phi) - cd * math.sin(phi)
        return alpha, cl, cd, force

    def ratio_at(phi, force):
        return 4.0 * k_p * math.sin(phi) ** 2 / (sigma * force)

    _, _, _, force0 = section_at(phi0)
    if force0 <= 0.0:
        raise SectionError("non-propulsive section at zero induction", r)

    def build_state(a, phi):
        alpha, cl, cd, _ = section_at(phi)
        return SectionState(
            r=r, phi=phi, alpha=alpha, a_a=a, sigma=sigma, k_p=k_p, cl=cl, cd=cd
        )

    # Fast path: damped iteration on the induction factor.  Convergence is
    # declared on the residual at the current iterate, so the returned state
    # satisfies the balance equation to the tolerance by construction.
    a = 0.0
    residual = math.inf
    prev_residual = math.inf
    for _ in range(_MAX_ITERS):
        phi = math.atan2(v0 * (1.0 + a), omega_r)
        _, _, _, force = section_at(phi)
        if force <= 0.0:
            break
        ratio = ratio_at(phi, force)
        if ratio <= 1.0 + 1e-12:
            break  # iterate left the propulsive branch
        a_new = 1.0 / (ratio - 1.0)
        residual = abs(a_new - a)
        if residual < _FIXED_POINT_TOL:
            return build_state(a, phi)
        if residual > 0.999 * prev_residual:
            break  # not contracting; hand over to bisection
        prev_residual = residual
        a += _RELAXATION * (a_new - a)

    # Robust path: bisection on the inflow-angle residual.  The momentum
    # ratio is monotone increasing in phi and the section force monotone
    # decreasing, so the propulsive branch lives on (phi_pole, phi_zero)
    # where ratio crosses 1 and the force crosses 0 respectively, and the
    # residual a_alg(phi) - a_kin(phi) falls from +inf to negative there.
    def bisect(fn, lo, hi, iters=200):
        flo = fn(lo)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            fm = fn(mid)
            if fm == 0.0 or hi - lo < 1e-15:
                return mid
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        return 0.5 * (lo + hi)

    phi_cap = math.pi / 2 - 1e-9
    _, _, _, force_cap = section_at(phi_cap)
    if force_cap >= 0.0:
        raise SectionConvergenceError(r, residual)
    phi_zero = bisect(lambda p: section_at(p)[3], phi0, phi_cap)

    def ratio_minus_one(phi):
        _, _, _, force = section_at(phi)
        if force <= 0.0:
            return math.inf
        return ratio_at(phi, force) - 1.0

    if ratio_minus_one(phi0) > 0.0:
        phi_lo = phi0
    else:
        pole = bisect(ratio_minus_one, phi0, phi_zero)
        phi_lo = pole + 1e-12

    def residual_fn(phi):
        _, _, _, force = section_at(phi)
        if force <= 0.0:
            return -math.inf
        rat = ratio_at(phi, force)
        if rat <= 1.0:
            return math.inf
        a_alg = 1.0 / (rat - 1.0)
        a_kin = math.tan(phi) * omega_r / v0 - 1.0
        return a_alg - a_kin

    phi_hi = phi_zero - 1e-12
    if not (residual_fn(phi_lo) > 0.0 and residual_fn(phi_hi) < 0.0):
        raise SectionConvergenceError(r, residual)
    phi_star = bisect(residual_fn, phi_lo, phi_hi)
    a_star = math.tan(phi_star) * omega_r / v0 - 1.0
    return build_state(a_star, phi_star)


def _loading(state: SectionState, chord: float) -> tuple[float, float]:
    """Thrust and torque-power integrand densities at one section."""
    if state.k_p < KP_FLOOR:
        return 0.0, 0.0
    sin_phi = math.sin(state.phi)
    cos_phi = math.cos(state.phi)
    common = chord * (1.0 + state.a_a) ** 2 / sin_phi**2
    f_thrust = (state.cl * cos_phi - state.cd * sin_phi) * common
    f_power = (state.cl * sin_phi + state.cd * cos_phi) * common * state.r
    return f_thrust, f_power


def _simpson(values: np.ndarray, h: float) -> float:
    # fixed index order keeps the sum deterministic regardless of caller threading
    acc = values[0] + values[-1]
    acc += 4.0 * sum(values[1:-1:2])
    acc += 2.0 * sum(values[2:-1:2])
    return acc * h / 3.0


def propeller_performance(
    spec: PropellerSpec,
    v0: float,
    n_s: float,
    atm: Atmosphere | None = None,
    n_nodes: int = 101,
) -> PropellerOperatingPoint:
    """Integrate sectional loading into thrust, shaft power, and efficiency.

    Composite Simpson quadrature over ``n_nodes`` spanwise stations (odd
    count required).  Stations cluster toward the tip via the substitution
    r = R - (R - r0) u^2: the tip-loss factor varies like sqrt(R - r) there,
    and the transform restores a smooth integrand so node doubling converges
    fast.  Section errors propagate: a blade that is partly outside the
    propulsive regime has no valid operating point.
    """
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("Simpson quadrature needs an odd node count >= 3")
    if atm is None:
        atm = isa_properties(20000.0)

    span = spec.r_tip - spec.r_hub
    u = np.linspace(0.0, 1.0, n_nodes)  # u = 0 at the tip, 1 at the hub
    h = 1.0 / (n_nodes - 1)
    f_thrust = np.empty(n_nodes)
    f_power = np.empty(n_nodes)
    for i, ui in enumerate(u):
        r = min(max(spec.r_tip - span * ui * ui, spec.r_hub), spec.r_tip)  # roundoff guard
        state = solve_section(spec, v0, n_s, float(r))
        ft, fp = _loading(state, spec.chord_fn(float(r)))
        jacobian = 2.0 * span * ui
        f_thrust[i] = ft * jacobian
        f_power[i] = fp * jacobian

    thrust = float(0.5 * atm.rho * v0 * v0 * spec.n_blades * _simpson(f_thrust, h))
    power = float(math.pi * n_s * atm.rho * v0 * v0 * spec.n_blades * _simpson(f_power, h))
    if power <= 0.0:
        raise SectionError("non-positive integrated shaft power")
    return PropellerOperatingPoint(
        v0=v0, n_s=n_s, thrust=thrust, shaft_power=power, eta_p=thrust * v0 / power
    )


def default_test_propeller() -> PropellerSpec:
    """Three-blade 3 m test propeller with analytic section properties.

    Linear chord taper 0.35 -> 0.12 m and linear twist 35 -> 12 deg over
    r in [0.3, 3] m, thin-airfoil style polar c_l = 2 pi sin(a) cos(a),
    c_d = 0.008 + 0.01 a^2.  This is a test fixture: only blade count and
    tip radius correspond to the reference platform's propellers.
    """
    r_hub, r_tip = 0.3, 3.0

    def chord_fn(r):
        t = (r - r_hub) / (r_tip - r_hub)
        return 0.35 + (0.12 - 0.35) * t

    def pitch_fn(r):
        t = (r - r_hub) / (r_tip - r_hub)
        return math.radians(35.0 + (12.0 - 35.0) * t)

    def polar(alpha):
        return 2.0 * math.pi * math.sin(alpha) * math.cos(alpha), 0.008 + 0.01 * alpha**2

    return PropellerSpec(
        n_blades=3, r_hub=r_hub, r_tip=r_tip, chord_fn=chord_fn, pitch_fn=pitch_fn, polar=polar
    )


# ---------------------------------------------------------------------------
# spec-directory I/O
# ---------------------------------------------------------------------------

POLAR_CSV_HEADER = ["alpha_deg", "cl", "cd"]
GEOMETRY_CSV_HEADER = ["r_m", "chord_m", "pitch_deg"]


def _read_csv(path: Path, expected_header: list[str]) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise ValueError(f"{path}: expected header {expected_header}, got {header}")
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows)


def load_spec_dir(path: str | Path) -> PropellerSpec:
    """Load a propeller from a directory with propeller.json, geometry.csv, polar.csv.

    ``propeller.json`` holds {"n_blades": int}; ``geometry.csv`` has header
    ``r_m,chord_m,pitch_deg`` (ascending radius, first/last rows set the hub
    and tip); ``polar.csv`` has header ``alpha_deg,cl,cd``.
    """
    path = Path(path)
    meta = json.loads((path / "propeller.json").read_text())
    geom = _read_csv(path / "geometry.csv", GEOMETRY_CSV_HEADER)
    polar = _read_csv(path / "polar.csv", POLAR_CSV_HEADER)
    return PropellerSpec.from_tables(
        n_blades=int(meta["n_blades"]),
        r=geom[:, 0],
        chord=geom[:, 1],
        pitch_rad=np.radians(geom[:, 2]),
        alpha_rad=np.radians(polar[:, 0]),
        cl=polar[:, 1],
        cd=polar[:, 2],
    )


def write_spec_dir(path: str | Path, spec: PropellerSpec, n_geom: int = 28, n_polar: int = 36) -> None:
    """Sample a spec's closures onto tables and write the directory format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "propeller.json").write_text(json.dumps({"n_blades": spec.n_blades}) + "\n")
    with open(path / "geometry.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GEOMETRY_CSV_HEADER)
        for r in np.linspace(spec.r_hub, spec.r_tip, n_geom):
            writer.writerow([f"{r:.6f}", f"{spec.chord_fn(r):.6f}", f"{math.degrees(spec.pitch_fn(r)):.6f}"])
    with open(path / "polar.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POLAR_CSV_HEADER)
        for a in np.linspace(math.radians(-15.0), math.radians(20.0), n_polar):
            cl, cd = spec.polar(a)
            writer.writerow([f"{math.degrees(a):.6f}", f"{cl:.8f}", f"{cd:.8f}"])
