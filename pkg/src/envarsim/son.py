"""Power-law generalization of the Born rule and the exponent fit.

For a singlet measured along two directions separated by Bloch angle
2*theta, write p(theta) = |amplitude(outcomes equal)| and q(theta) =
|amplitude(outcomes differ)|. Son's theory keeps the quantum amplitudes but
assigns probabilities |psi|^n instead of |psi|^2, constrained by

    p(theta)^n + q(theta)^n = 1,
    p'(theta)^2 + q'(theta)^2 = c   (constant),
    E(0, n) = -1,  E(pi/2, n) = +1,

with E(theta, n) = p^n - q^n. Eliminating q through the normalization
constraint turns the problem into a first-order ODE for p(theta) with the
constant c fixed by the boundary conditions; ``solve_son`` integrates it
with classical RK4 and shoots on c. Ordinary quantum mechanics is the n=2
case, where the solution is p = sin(theta) and E = -cos(2*theta).

During the experiment's middle stage, rotating one qubit by phi (with the
same analyzer basis on both arms, basis orthogonal to the rotation axis)
is equivalent to measuring the singlet with analyzers 2*theta apart, where
2*theta = pi - |pi - 2*phi| folded periodically. ``extract_correlation``
turns one analyzer setting's four counts into a correlation sample and
``son_fit`` estimates n from several such data sets, using the near-ideal
model E(phi,n,rho) ~ E(phi,n,singlet) + E(phi,2,rho) - E(phi,2,singlet),
valid for states close to the singlet and n close to 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import ConvergenceError
from .linalg import projector, singlet, su2_rotation, validate_density_matrix, werner
from .measurement import BASES, CountRecord, tomography_projectors
from .optics import STACK_ROTATION_SIGN, named_axis_vector

__all__ = [
    "COMBOS",
    "CorrelationCurve",
    "CorrelationSample",
    "SonFitResult",
    "e_qm",
    "solve_son",
    "phi_to_theta",
    "extract_correlation",
    "correlation_operator",
    "son_fit",
]

# Rotation-axis / measurement-basis pairs used for the exponent fit; in
# each pair the basis Bloch axis is orthogonal to the rotation axis.
COMBOS = ("Z-DA", "Z-RL", "Y-DA", "Y-HV", "X-RL", "X-HV")

_BASIS_BY_NAME = {f"{b[0]}{b[1]}": b for b in BASES}


def e_qm(theta: float) -> float:
    """Singlet correlation -cos(2*theta) of standard quantum mechanics."""
    return -float(np.cos(2 * np.asarray(theta, dtype=float)))


def phi_to_theta(phi):
    """Half-angle between analyzer directions after rotating one arm by phi.

    Implements 2*theta = pi - |pi - 2*phi| with 2*phi taken modulo 2*pi,
    which makes the map symmetric about phi = pi and 2*pi-periodic.
    """
    two_phi = np.mod(2 * np.asarray(phi, dtype=float), 2 * np.pi)
    out = (np.pi - np.abs(np.pi - two_phi)) / 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CorrelationCurve:
    """E(theta, n) sampled on a uniform theta grid over [0, pi/2].

    ``p`` and ``q`` are the equal/differ amplitude moduli at each node and
    ``c`` the constant of the derivative constraint; they are kept so the
    defining relations can be checked directly on solver output.
    """

    theta_grid: np.ndarray
    values: np.ndarray
    n: float
    p: np.ndarray
    q: np.ndarray
    c: float

    def __post_init__(self) -> None:
        if self.theta_grid.shape != self.values.shape:
            raise ValueError("grid and values must have matching shapes")
        if np.any(np.abs(self.values) > 1 + 1e-12):
            raise ValueError("correlation values must lie in [-1, 1]")
        if np.any(np.diff(self.values) < -1e-10):
            raise ValueError("E(theta) must be non-decreasing on [0, pi/2]")
        for name in ("theta_grid", "values", "p", "q"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def value_at(self, theta) -> np.ndarray:
        """E at arbitrary theta in [0, pi/2] (exact on grid nodes)."""
        return np.interp(np.asarray(theta, dtype=float), self.theta_grid, self.values)


def _make_rhs(n: float):
    """Derivatives of the tracked amplitude modulus, per unit sqrt(c).

    Track whichever of (p, q) is regular: the ratio in the constraint,
    (p/q)^(2n-2) when stepping p and (q/p)^(2n-2) when stepping q, must
    stay bounded. For n >= 1 that is the smaller variable, for n < 1 the
    larger one.
    """
    expo = 2 * n - 2

    def ratio_term(num: float, den: float) -> float:
        if expo == 0:
            return 1.0
        if den <= 0.0:
            return math.inf if expo > 0 else 0.0
        if num <= 0.0:
            return 0.0 if expo > 0 else math.inf
        return (num / den) ** expo

    def dp(p: float) -> float:
        pp = min(max(p, 0.0), 1.0)
        q = (1 - pp**n) ** (1 / n)
        r = ratio_term(pp, q)
        return 0.0 if math.isinf(r) else 1.0 / math.sqrt(1.0 + r)

    def dq(q: float) -> float:
        qq = min(max(q, 0.0), 1.0)
        p = (1 - qq**n) ** (1 / n)
        r = ratio_term(qq, p)
        return 0.0 if math.isinf(r) else 1.0 / math.sqrt(1.0 + r)

    return dp, dq


def _integrate(n: float, c: float, steps: int, record_every: int = 0):
    """RK4 pass over [0, pi/2]; returns boundary residual and (p, q) records.

    For n >= 1 the integration starts in p (p(0) = 0, regular there) and
    switches to q once p >= q; the residual is q(pi/2), which crosses zero
    transversally (q' -> -sqrt(c)). For n < 1 the roles are mirrored and
    the residual is p(pi/2) - 1.
    """
    dp, dq = _make_rhs(n)
    sqc = math.sqrt(c)
    h = (np.pi / 2) / steps
    start_in_p = n >= 1

    var = 0.0 if start_in_p else 1.0
    in_p = start_in_p
    records = []

    def companion(value: float) -> float:
        clamped = min(max(value, 0.0), 1.0)
        return (1 - clamped**n) ** (1 / n)

    def record(value: float) -> tuple[float, float]:
        return (value, companion(value)) if in_p else (companion(value), value)

    if record_every:
        records.append(record(var))
    for k in range(steps):
        f = dp if in_p else dq
        sign = 1.0 if in_p else -1.0
        k1 = sign * sqc * f(var)
        k2 = sign * sqc * f(var + 0.5 * h * k1)
        k3 = sign * sqc * f(var + 0.5 * h * k2)
        k4 = sign * sqc * f(var + h * k3)
        var = var + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        # hand over to the companion variable once it becomes the regular one
        if in_p == start_in_p:
            comp = companion(var)
            flip = var >= comp if start_in_p else var <= comp
            if flip:
                var = comp
                in_p = not in_p
        if record_every and (k + 1) % record_every == 0:
            records.append(record(var))
    # residual convention: positive for undershoot (c too small), negative
    # for overshoot, in both tracking orders
    if in_p == start_in_p:
        residual = companion(var) if start_in_p else 1.0 - companion(var)
    else:
        residual = var if start_in_p else 1.0 - var
    return residual, records


def solve_son(n: float, grid_size: int = 257) -> CorrelationCurve:
    """Solve the constrained boundary problem for E(theta, n).

    Shoots on the derivative constant c with bisection brackets refined by
    Brent's method; raises ConvergenceError if the boundary conditions
    cannot be met within 1e-8.
    """
    if n <= 0:
        raise ValueError("the exponent n must be positive")
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")

    # with the undershoot-positive sign convention the residual decreases
    # monotonically in c, so a sign change brackets the solution
    def shoot(c: float, steps: int) -> float:
        return _integrate(n, c, steps)[0]

    lo, hi = 1e-4, 4.0
    while shoot(hi, 512) > 0 and hi < 1e6:
        hi *= 4
    while shoot(lo, 512) < 0 and lo > 1e-12:
        lo /= 4
    if shoot(lo, 512) < 0 or shoot(hi, 512) > 0:
        raise ConvergenceError(f"could not bracket the shooting constant for n={n}")
    c_coarse = brentq(lambda c: shoot(c, 512), lo, hi, xtol=1e-10, rtol=1e-12)
    span = max(1e-6, 1e-4 * c_coarse)
    lo_f = max(lo, c_coarse - span)
    hi_f = min(hi, c_coarse + span)
    if shoot(lo_f, 4096) < 0 or shoot(hi_f, 4096) > 0:
        lo_f, hi_f = lo, hi
    c_star = brentq(lambda c: shoot(c, 4096), lo_f, hi_f, xtol=1e-13, rtol=1e-15)

    per = max(1, int(round(4096 / (grid_size - 1))))
    steps = per * (grid_size - 1)
    residual, records = _integrate(n, c_star, steps, record_every=per)
    if abs(residual) > 1e-8:
        raise ConvergenceError(
            f"boundary residual {residual:.3e} exceeds 1e-8 for n={n}"
        )
    theta = np.linspace(0.0, np.pi / 2, grid_size)
    p = np.clip(np.array([r[0] for r in records]), 0.0, 1.0)
    q = np.clip(np.array([r[1] for r in records]), 0.0, 1.0)
    values = np.clip(p**n - q**n, -1.0, 1.0)
    values = np.maximum.accumulate(values)
    return CorrelationCurve(theta_grid=theta, values=values, n=float(n), p=p, q=q, c=float(c_star))


@dataclass(frozen=True)
class CorrelationSample:
    """One measured correlation point E(phi) with its Poisson uncertainty."""

    combo: str
    phi: float
    value: float
    sigma: float

    def __post_init__(self) -> None:
        if self.combo not in COMBOS:
            raise ValueError(f"unknown combo {self.combo!r}; expected one of {COMBOS}")
        if abs(self.value) > 1.0:
            raise ValueError("correlation value must lie in [-1, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def combo_axis_and_basis(combo: str) -> tuple[str, tuple[str, str]]:
    """Split a combo label into (rotation axis tag, analyzer basis pair)."""
    if combo not in COMBOS:
        raise ValueError(f"unknown combo {combo!r}; expected one of {COMBOS}")
    axis, basis_name = combo.split("-")
    return axis.lower(), _BASIS_BY_NAME[basis_name]


def _combo_setting_index(basis: tuple[str, str]) -> int:
    label = f"{basis[0]}{basis[1]}-{basis[0]}{basis[1]}"
    for idx, setting in enumerate(tomography_projectors().settings):
        if setting.label == label:
            return idx
    raise ValueError(f"no analyzer setting {label}")


def extract_correlation(counts: CountRecord, combo: str, phi: float) -> CorrelationSample:
    """Correlation E = (n_same - n_diff) / n_total from one analyzer setting.

    Outcomes 1 and 4 of the setting (both arms on the same basis state) are
    "same"; outcomes 2 and 3 are "diff". The uncertainty follows first-order
    Poisson propagation, sigma = 2*sqrt(n_same*n_diff/n_total^3), floored at
    1/n_total so noiseless perfect correlations keep a usable weight.
    """
    _, basis = combo_axis_and_basis(combo)
    idx = _combo_setting_index(basis)
    block = counts.counts[4 * idx : 4 * idx + 4].astype(float)
    total = block.sum()
    if total <= 0:
        raise ValueError(f"setting {basis} has zero total counts")
    n_same = block[0] + block[3]
    n_diff = block[1] + block[2]
    value = (n_same - n_diff) / total
    sigma = 2.0 * math.sqrt(n_same * n_diff / total**3)
    sigma = max(sigma, 1.0 / total)
    return CorrelationSample(combo=combo, phi=float(phi), value=float(value), sigma=float(sigma))


def correlation_operator(combo: str, phi: float) -> np.ndarray:
    """Observable whose expectation on rho is E(phi, 2, rho) for a combo.

    Models the middle experiment stage: rotate the system qubit by the
    Bloch angle 2*phi about the combo's axis (in the sense realized by the
    wave-plate stacks), then measure both arms in the combo's basis.
    """
    axis, basis = combo_axis_and_basis(combo)
    u = su2_rotation(named_axis_vector(axis), STACK_ROTATION_SIGN * 2 * phi)
    setting = tomography_projectors().settings[_combo_setting_index(basis)]
    diff_op = (
        setting.projectors[0]
        - setting.projectors[1]
        - setting.projectors[2]
        + setting.projectors[3]
    )
    u_full = np.kron(u, np.eye(2, dtype=complex))
    return u_full.conj().T @ diff_op @ u_full


@dataclass(frozen=True)
class SonFitResult:
    n: float
    n_uncertainty: float
    per_combo_n: tuple[float, ...]
    per_combo: tuple[str, ...]
    rho_params: dict[str, tuple[float, ...]]
    objective: float

    def __post_init__(self) -> None:
        if self.objective < 0:
            raise ValueError("objective must be non-negative")


# Shared cache of solved curves, keyed by (n quantized to the fit lattice,
# grid size). Curves are immutable, so reuse across fits is safe.
_N_QUANTUM = 5e-4
_CURVE_CACHE: dict[tuple[int, int], CorrelationCurve] = {}
_FIT_GRID_SIZE = 721  # 720 intervals: nodes hit every multiple of pi/12


def _cached_curve(n: float, grid_size: int = _FIT_GRID_SIZE) -> CorrelationCurve:
    key = (int(round(n / _N_QUANTUM)), grid_size)
    if key not in _CURVE_CACHE:
        _CURVE_CACHE[key] = solve_son(key[0] * _N_QUANTUM, grid_size)
    return _CURVE_CACHE[key]


def _t_matrix(params: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[0, 0], t[1, 1], t[2, 2], t[3, 3] = params[:4]
    off = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))
    for i, (r, c) in enumerate(off):
        t[r, c] = params[4 + 2 * i] + 1j * params[5 + 2 * i]
    return t


def _rho_from_params(params: np.ndarray) -> np.ndarray:
    t = _t_matrix(params)
    rho = t @ t.conj().T
    tr = np.trace(rho).real
    if tr <= 0 or not np.isfinite(tr):
        return np.eye(4, dtype=complex) / 4
    return rho / tr


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 1e-6, None)
    chol = np.linalg.cholesky((v * w) @ v.conj().T)
    params = np.zeros(16)
    params[:4] = np.real(np.diag(chol))
    off = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))
    for i, (r, c) in enumerate(off):
        params[4 + 2 * i] = chol[r, c].real
        params[5 + 2 * i] = chol[r, c].imag
    return params


def _n_lattice(center: float, half_width: float, step: float) -> np.ndarray:
    lo = max(1.0, center - half_width)
    hi = min(3.0, center + half_width)
    k_lo = int(round(lo / step))
    k_hi = int(round(hi / step))
    return np.array([k * step for k in range(k_lo, k_hi + 1)])


def son_fit(
    samples: list[CorrelationSample],
    rho_init: np.ndarray | None = None,
    restarts: int = 3,
    seed: int = 0,
) -> SonFitResult:
    """Weighted fit of the Born-rule exponent n to correlation samples.

    Samples are grouped by combo and each combo is fitted independently:
    the exponent is profiled over a lattice refined down to 5e-4 around the
    best coarse value, and for every candidate n the state parameters (a
    16-parameter Cholesky-style factorization keeping rho physical) are
    optimized by Nelder-Mead on the weighted squared residuals. The
    reported n is the mean of the per-combo estimates and its uncertainty
    their sample standard deviation. The model linearization holds for
    states near the singlet and n near 2, so the coarse search spans
    [1.5, 2.5].
    """
    groups: dict[str, list[CorrelationSample]] = {}
    for s in samples:
        groups.setdefault(s.combo, []).append(s)
    if not groups:
        raise ValueError("no samples supplied")
    for combo, grp in groups.items():
        if len(grp) < 5:
            raise ValueError(f"combo {combo} has {len(grp)} samples; at least 5 required")

    if rho_init is None:
        rho_init = werner(0.98)
    else:
        rho_init = validate_density_matrix(rho_init)
    base_params = _params_from_rho(rho_init)
    rng = np.random.default_rng(seed)

    psi_minus = projector(singlet())
    per_combo_n: list[float] = []
    per_combo: list[str] = []
    rho_params: dict[str, tuple[float, ...]] = {}
    total_objective = 0.0

    for combo in sorted(groups, key=COMBOS.index):
        grp = sorted(groups[combo], key=lambda s: s.phi)
        phis = np.array([s.phi for s in grp])
        thetas = np.array([phi_to_theta(phi) for phi in phis])
        y = np.array([s.value for s in grp])
        weights = np.array([1.0 / s.sigma**2 for s in grp])
        ops = np.stack([correlation_operator(combo, phi) for phi in phis])
        e_qm_singlet = np.array(
            [float(np.real(np.trace(op @ psi_minus))) for op in ops]
        )

        def objective(params: np.ndarray, shift: np.ndarray) -> float:
            rho = _rho_from_params(params)
            e_state = np.einsum("aij,ji->a", ops, rho).real
            resid = shift + e_state - y
            return float(np.dot(weights, resid**2))

        def fit_state(n_value: float, starts: list[np.ndarray]) -> tuple[float, np.ndarray]:
            curve = _cached_curve(n_value)
            shift = curve.value_at(thetas) - e_qm_singlet
            best_val, best_x = np.inf, None
            for x0 in starts:
                res = minimize(
                    objective,
                    x0,
                    args=(shift,),
                    method="Nelder-Mead",
                    options={"maxiter": 8000, "maxfev": 8000, "xatol": 1e-9, "fatol": 1e-11},
                )
                if res.fun < best_val:
                    best_val, best_x = res.fun, res.x
            return best_val, best_x

        first_starts = [base_params] + [
            base_params + rng.normal(0.0, 0.01, size=16) for _ in range(restarts - 1)
        ]
        _, warm = fit_state(2.0, first_starts)

        center = 2.0
        stage_plan = ((0.5, 0.05), (0.05, 0.005), (0.005, _N_QUANTUM))
        best_n, best_obj, best_params = center, np.inf, warm
        for half_width, step in stage_plan:
            lattice = _n_lattice(center, half_width, step)
            # sweep outward from the center so each fit warm-starts from a
            # neighboring exponent's optimum
            order = np.argsort(np.abs(lattice - center), kind="stable")
            carry = {0: best_params}
            stage_best = None
            for rank in order:
                n_value = lattice[rank]
                side = int(np.sign(lattice[rank] - center))
                start = carry.get(side, carry[0])
                val, x = fit_state(n_value, [start])
                carry[side] = x
                if side == 0:
                    carry[0] = x
                if stage_best is None or val < stage_best[0]:
                    stage_best = (val, n_value, x)
            best_obj, best_n, best_params = stage_best
            center = best_n

        per_combo.append(combo)
        per_combo_n.append(float(best_n))
        rho_params[combo] = tuple(float(v) for v in best_params)
        total_objective += float(best_obj)

    n_arr = np.array(per_combo_n)
    n_mean = float(n_arr.mean())
    n_unc = float(n_arr.std(ddof=1)) if len(n_arr) > 1 else 0.0
    return SonFitResult(
        n=n_mean,
        n_uncertainty=n_unc,
        per_combo_n=tuple(per_combo_n),
        per_combo=tuple(per_combo),
        rho_params=rho_params,
        objective=total_objective,
    )
