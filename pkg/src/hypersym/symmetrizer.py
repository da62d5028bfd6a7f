"""Damped generator M and Lyapunov symmetrizer R, with verification probes.

R is computed by solving the stationary Lyapunov identity
``M* R + R M = -a <xi>^rho I`` directly (machine precision, cheap at small
size); the defining integral ``R = a int <xi>^rho (e^{sM})* e^{sM} ds`` is
kept as an independent quadrature oracle anchoring the solve.  Probes verify
the lower bound, the symbol-class estimates, the Hoelder difference
estimates and the mollified variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from hypersym.coeffs import SystemCoefficients
from hypersym.errors import (
    BudgetError,
    SamplingError,
    SpectralCheckError,
    StabilityMarginError,
)
from hypersym.matkernel import expm_batched, taylor_matrix_frequency
from hypersym.weights import bracket, bracket_pow, poly_bump


def _num(x) -> float:
    return float(x)


@dataclass
class ParameterSet:
    """Weight/damping parameters with the admissibility constraints attached.

    Values may be exact rationals (from the planner) or floats; numeric
    consumers coerce to float.  ``nu = theta (1 - rho)`` and
    ``N = max(2 theta, m)`` are derived.  ``a0`` and ``eps0`` are empirical
    floor constants with no canonical closed form, calibrated per problem;
    ``c_spec`` is the certified spectral-bound constant.
    """

    rho: object
    a: object
    ell: object
    tau: object
    T: object
    c1: object
    theta: int
    kappa: object | None = None
    s: object | None = None
    delta: object | None = None
    a0: object = 1.0
    eps0: object = 0.5
    c_spec: object | None = None

    @property
    def nu(self) -> float:
        return self.theta * (1.0 - _num(self.rho))

    def n_taylor(self, m: int) -> int:
        return max(2 * self.theta, m)

    def to_json(self) -> dict:
        def enc(v):
            if v is None:
                return None
            return float(v)

        return {
            "rho": enc(self.rho),
            "a": enc(self.a),
            "ell": enc(self.ell),
            "tau": enc(self.tau),
            "T": enc(self.T),
            "c1": enc(self.c1),
            "theta": self.theta,
            "kappa": enc(self.kappa),
            "s": enc(self.s),
            "delta": enc(self.delta),
            "a0": enc(self.a0),
            "eps0": enc(self.eps0),
            "c_spec": enc(self.c_spec),
            "nu": self.nu,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ParameterSet":
        return cls(
            rho=doc["rho"],
            a=doc["a"],
            ell=doc["ell"],
            tau=doc["tau"],
            T=doc["T"],
            c1=doc["c1"],
            theta=int(doc["theta"]),
            kappa=doc.get("kappa"),
            s=doc.get("s"),
            delta=doc.get("delta"),
            a0=doc.get("a0", 1.0),
            eps0=doc.get("eps0", 0.5),
            c_spec=doc.get("c_spec"),
        )


def rescale_for_a(params: ParameterSet, a: float) -> ParameterSet:
    """Admissible variant of ``params`` with a different damping strength.

    Grows ell to the smallest power of two keeping ``a <= ell^(1-rho)`` and
    shrinks tau back inside the Taylor-scale window.
    """
    rho = _num(params.rho)
    ell = max(_num(params.ell), 2.0 ** math.ceil(math.log2(a) / (1.0 - rho)))
    eps0 = _num(params.eps0)
    tau = min(_num(params.tau), 0.999 * eps0 * ell ** (1.0 - rho))
    c1 = min(_num(params.c1), tau * max(_num(params.c_spec or 0.5), 1e-9))
    return replace(params, a=a, ell=ell, tau=tau, c1=c1)


# ---------------------------------------------------------------------------
# Generator M


def hn_matrix(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    t: float,
    x: float,
    xi: float,
) -> np.ndarray:
    """Frequency-Taylor generator H_N at one node.

    ``H_N = sum_{j<=N} (1/j!) D_x^j A(t,x,xi) (tau * grad <xi>^rho)^j``,
    realized through the eps-scaled Taylor polynomial with
    ``eps = tau * rho * <xi>_ell^(rho-2)``.
    """
    rho, ell, tau = _num(params.rho), _num(params.ell), _num(params.tau)
    eps = tau * rho * bracket(xi, ell) ** (rho - 2.0)
    return taylor_matrix_frequency(coeffs, t, x, xi, eps, params.n_taylor(coeffs.m))


def hn_over_lattice(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    t: float,
    x: float,
    xi_values: np.ndarray,
) -> np.ndarray:
    """Vectorized H_N over a frequency array; shape (nxi, m, m)."""
    rho, ell, tau = _num(params.rho), _num(params.ell), _num(params.tau)
    xi_values = np.asarray(xi_values, dtype=float)
    eps = tau * rho * bracket(xi_values, ell) ** (rho - 2.0)
    n = params.n_taylor(coeffs.m)
    out = np.zeros((len(xi_values), coeffs.m, coeffs.m), dtype=complex)
    fac = 1.0
    for j in range(n + 1):
        if j > 0:
            fac *= j
        dj = coeffs.a_field.dx(t, x, j)
        out += ((eps**j / fac) * xi_values ** (j + 1))[:, None, None] * dj[None]
    return out


def build_M(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    t: float,
    x: float,
    xi: float,
    hn_scale: float = 1.0,
    check_spectrum: bool = True,
) -> np.ndarray:
    """Damped generator ``M = i * hn_scale * H_N - a <xi>_ell^rho I``.

    ``hn_scale`` carries the squared spectral cutoff chi^2(h xi) of the
    regularized evolution; 1.0 means no truncation.  When requested, the
    spectrum is checked against the certified margin
    ``Re z <= c_spec (a0 - a) <xi>^rho``; failure means the parameters
    violate the calibrated damping floor.
    """
    mu = bracket_pow(xi, _num(params.ell), _num(params.rho))
    h = hn_matrix(coeffs, params, t, x, xi)
    m_mat = 1j * hn_scale * h - _num(params.a) * mu * np.eye(coeffs.m)
    if check_spectrum:
        re_max = float(np.max(np.linalg.eigvals(m_mat).real))
        slack = 1e-9 * (_num(params.a) * mu + np.linalg.norm(h, 2))
        if params.c_spec is not None:
            ceiling = _num(params.c_spec) * (_num(params.a0) - _num(params.a)) * mu
        else:
            ceiling = 0.0
        if re_max > ceiling + slack:
            raise SpectralCheckError(
                f"spectrum of M reaches Re = {re_max:.6g} above the certified "
                f"ceiling {ceiling:.6g}; damping floor a0 is violated"
            )
    return m_mat


# ---------------------------------------------------------------------------
# Lyapunov solve and quadrature oracle


def _lyap_solve_batch(m_stack: np.ndarray, rhs_scale: np.ndarray) -> np.ndarray:
    """Solve ``M* R + R M = -rhs I`` for a stack of matrices.

    Row-major vectorization: the operator is
    ``kron(M*, I) + kron(I, M^T)``; a dense m^2 x m^2 solve per node.
    """
    m_stack = np.asarray(m_stack, dtype=complex)
    m = m_stack.shape[-1]
    lead = m_stack.shape[:-2]
    flat = m_stack.reshape(-1, m, m)
    rhs = np.broadcast_to(np.asarray(rhs_scale, dtype=float), lead).reshape(-1)
    eye = np.eye(m)
    mstar = flat.conj().transpose(0, 2, 1)
    # Row-major vec: K[(i,j),(k,l)] = M*[i,k] delta[j,l] + delta[i,k] M[l,j]
    k1 = np.einsum("nik,jl->nijkl", mstar, eye)
    k2 = np.einsum("ik,njl->nijkl", eye, flat.transpose(0, 2, 1))
    op = (k1 + k2).reshape(-1, m * m, m * m)
    b = (-rhs[:, None] * np.eye(m).reshape(1, -1)).astype(complex)
    vec = np.linalg.solve(op, b[:, :, None])[:, :, 0]
    r = vec.reshape(-1, m, m)
    r = (r + r.conj().transpose(0, 2, 1)) / 2.0
    return r.reshape(*lead, m, m)


def solve_R_lyapunov(m_mat: np.ndarray, rhs_scale: float) -> np.ndarray:
    """Unique hermitian solution of ``M* R + R M = -rhs_scale I``.

    Refuses matrices whose stability margin is below ``1e-8 ||M||`` (the
    solve would be ill-conditioned near the imaginary axis); the residual of
    the returned solution is verified to 1e-10 relative.
    """
    m_mat = np.asarray(m_mat, dtype=complex)
    margin = -float(np.max(np.linalg.eigvals(m_mat).real))
    if margin < 1e-8 * np.linalg.norm(m_mat, 2):
        raise StabilityMarginError(
            f"stability margin {margin:.3g} below threshold; refusing solve"
        )
    r = _lyap_solve_batch(m_mat[None], np.array([rhs_scale]))[0]
    resid = np.linalg.norm(m_mat.conj().T @ r + r @ m_mat + rhs_scale * np.eye(r.shape[0]), 2)
    if resid > 1e-10 * abs(rhs_scale):
        raise ArithmeticError(f"Lyapunov residual {resid:.3g} too large")
    return r


def quadrature_R(
    m_mat: np.ndarray,
    rhs_scale,
    tol: float = 1e-8,
    max_refine: int = 8,
) -> np.ndarray:
    """Independent oracle: adaptive quadrature of ``rhs int (e^{sM})* e^{sM} ds``.

    The integrand is rescaled to unit decay rate (s = r / margin), truncated
    where the tail bound falls below ``tol`` and integrated by composite
    Gauss-Legendre with panel refinement until the relative change is below
    ``tol``.  Accepts a single matrix or a stack.
    """
    m_stack = np.asarray(m_mat, dtype=complex)
    single = m_stack.ndim == 2
    if single:
        m_stack = m_stack[None]
    size = m_stack.shape[-1]
    flat = m_stack.reshape(-1, size, size)
    rhs = np.broadcast_to(np.asarray(rhs_scale, dtype=float), m_stack.shape[:-2]).reshape(-1)

    margins = -np.max(np.linalg.eigvals(flat).real, axis=-1)
    if np.any(margins <= 0):
        raise StabilityMarginError("quadrature requires a Hurwitz matrix")
    scaled = flat / margins[:, None, None]

    # After rescaling the integrand decays like e^{-2r}; the truncation
    # tail at r_max is e^{-2 r_max} (modulo a polynomial transient).
    r_max = max(6.0, 0.85 * math.log(1.0 / tol))
    if math.exp(-2.0 * r_max) > tol:
        raise BudgetError("quadrature truncation bound unreachable within budget")

    def integral(group: np.ndarray, omega: float, nodes_per_panel: int) -> np.ndarray:
        n_panels = max(4, int(math.ceil(r_max * max(omega, 1.0) / 4.0)))
        gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_panel)
        edges = np.linspace(0.0, r_max, n_panels + 1)
        mids = (edges[:-1] + edges[1:]) / 2.0
        half = (edges[1:] - edges[:-1]) / 2.0
        rs = (mids[:, None] + half[:, None] * gl_x[None, :]).ravel()
        ws = (half[:, None] * gl_w[None, :]).ravel()
        exps = expm_batched(rs[:, None, None, None] * scaled[group][None])
        prods = exps.conj().swapaxes(-1, -2) @ exps
        acc = np.einsum("r,rnij->nij", ws, prods)
        return acc * (rhs[group] / margins[group])[:, None, None]

    # Nodes are grouped by their phase rate so slow nodes are not forced
    # onto the panel density of the fastest one.
    omegas = np.linalg.norm(flat, axis=(1, 2)) / margins
    order = np.argsort(omegas)
    result = np.empty_like(flat)
    start = 0
    while start < len(order):
        base = omegas[order[start]]
        stop = start
        while stop < len(order) and omegas[order[stop]] <= 2.0 * base + 1.0:
            stop += 1
        group = order[start:stop]
        omega = float(omegas[group].max())
        nodes = 8
        prev = integral(group, omega, nodes)
        for _ in range(max_refine):
            nodes = int(nodes * 1.5) + 1
            cur = integral(group, omega, nodes)
            delta = np.max(
                np.linalg.norm(cur - prev, axis=(1, 2))
                / np.maximum(np.linalg.norm(cur, axis=(1, 2)), 1e-300)
            )
            prev = cur
            if delta < tol:
                break
        else:
            raise BudgetError(
                "quadrature failed to converge within refinement budget"
            )
        result[group] = prev
        start = stop

    out = result.reshape(*m_stack.shape[:-2], size, size)
    out = (out + out.conj().swapaxes(-1, -2)) / 2.0
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Field construction and verification


@dataclass
class SymmetrizerField:
    """Hermitian positive matrices R over a (t, x, xi) grid, immutable after build."""

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    xi_nodes: np.ndarray
    R: np.ndarray  # (nt, nx, nxi, m, m)
    M: np.ndarray  # matching generators
    method: str
    params: ParameterSet

    def rhs_scales(self) -> np.ndarray:
        mu = bracket_pow(self.xi_nodes, _num(self.params.ell), _num(self.params.rho))
        return _num(self.params.a) * mu

    def check_invariants(self) -> dict:
        """Hermitian/positive/Lyapunov-residual checks over every node."""
        r = self.R
        herm = float(
            np.max(np.linalg.norm(r - r.conj().swapaxes(-1, -2), axis=(-2, -1)))
        )
        mineig = float(np.min(np.linalg.eigvalsh((r + r.conj().swapaxes(-1, -2)) / 2).min(axis=-1)))
        rhs = self.rhs_scales()[None, None, :, None, None]
        eye = np.eye(r.shape[-1])
        resid = (
            self.M.conj().swapaxes(-1, -2) @ r + r @ self.M + rhs * eye
        )
        rel = float(
            np.max(np.linalg.norm(resid, axis=(-2, -1)) / self.rhs_scales()[None, None, :])
        )
        return {
            "max_hermitian_defect": herm,
            "min_eigenvalue": mineig,
            "max_lyapunov_residual_rel": rel,
            "n_nodes": int(np.prod(r.shape[:-2])),
        }

    def to_csv(self, path) -> None:
        m = self.R.shape[-1]
        cols = ["t", "x", "xi", "min_eig"]
        for i in range(m):
            for j in range(m):
                cols += [f"re_R{i}{j}", f"im_R{i}{j}"]
        lines = [",".join(cols)]
        mineig = np.linalg.eigvalsh(self.R).min(axis=-1)
        for it, t in enumerate(self.t_nodes):
            for ix, x in enumerate(self.x_nodes):
                for ik, xi in enumerate(self.xi_nodes):
                    rr = self.R[it, ix, ik]
                    row = [repr(float(t)), repr(float(x)), repr(float(xi)),
                           repr(float(mineig[it, ix, ik]))]
                    for i in range(m):
                        for j in range(m):
                            row += [repr(rr[i, j].real), repr(rr[i, j].imag)]
                    lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_binary(self, path) -> None:
        """Row-major complex128 dump of R, shape (nt, nx, nxi, m, m)."""
        np.ascontiguousarray(self.R).tofile(path)


def build_field(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    t_nodes,
    x_nodes,
    xi_nodes,
    method: str = "lyapunov",
    quad_tol: float = 1e-8,
) -> SymmetrizerField:
    """Build R over the tensor grid by Lyapunov solve or by quadrature."""
    t_nodes = np.atleast_1d(np.asarray(t_nodes, dtype=float))
    x_nodes = np.atleast_1d(np.asarray(x_nodes, dtype=float))
    xi_nodes = np.atleast_1d(np.asarray(xi_nodes, dtype=float))
    m = coeffs.m
    a = _num(params.a)
    mu = bracket_pow(xi_nodes, _num(params.ell), _num(params.rho))
    m_stack = np.empty((len(t_nodes), len(x_nodes), len(xi_nodes), m, m), dtype=complex)
    for it, t in enumerate(t_nodes):
        for ix, x in enumerate(x_nodes):
            hs = hn_over_lattice(coeffs, params, float(t), float(x), xi_nodes)
            m_stack[it, ix] = 1j * hs - (a * mu)[:, None, None] * np.eye(m)
    rhs = np.broadcast_to((a * mu)[None, None, :], m_stack.shape[:-2])
    if method == "lyapunov":
        r = _lyap_solve_batch(m_stack, rhs)
    elif method == "quadrature":
        r = quadrature_R(m_stack, rhs, tol=quad_tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SymmetrizerField(
        t_nodes=t_nodes,
        x_nodes=x_nodes,
        xi_nodes=xi_nodes,
        R=r,
        M=m_stack,
        method=method,
        params=params,
    )


def _fit_window(xi_values: np.ndarray, ell: float) -> np.ndarray:
    """Frequencies where the bracket exponent is identifiable.

    Below xi ~ ell the bracket sits on its ell-plateau: the abscissa barely
    moves while values may still vary, so log-log regression has no
    leverage there.  Falls back to the full range when too few points
    remain.
    """
    mask = np.asarray(xi_values, dtype=float) >= ell
    if np.count_nonzero(mask) < 3:
        return np.ones(len(xi_values), dtype=bool)
    return mask


@dataclass
class LowerBoundReport:
    exponent: float
    c_prime: float
    target: float
    passed: bool
    xi_nodes: np.ndarray
    min_eigs: np.ndarray


def lower_bound_check(field: SymmetrizerField) -> LowerBoundReport:
    """Fit the decay of the smallest eigenvalue of R against the bracket.

    Passes when the fitted exponent stays above ``-2 nu - 0.1`` and the
    implied constant is bounded away from zero across the grid.
    """
    params = field.params
    nu = params.nu
    mineig = np.linalg.eigvalsh(field.R).min(axis=-1)  # (nt, nx, nxi)
    per_xi = mineig.min(axis=(0, 1))
    br = bracket(field.xi_nodes, _num(params.ell))
    win = _fit_window(field.xi_nodes, _num(params.ell))
    if np.count_nonzero(win) >= 2 and (br[win].max() / br[win].min()) > 1.001:
        slope, _ = np.polyfit(np.log(br[win]), np.log(per_xi[win]), 1)
    else:
        slope = 0.0
    c_prime = float(np.min(per_xi * br ** (2.0 * nu)))
    passed = bool(slope >= -2.0 * nu - 0.1 and c_prime > 0.0)
    return LowerBoundReport(
        exponent=float(slope),
        c_prime=c_prime,
        target=-2.0 * nu,
        passed=passed,
        xi_nodes=field.xi_nodes,
        min_eigs=per_xi,
    )


# ---------------------------------------------------------------------------
# Symbol-estimate probes


@dataclass
class SymbolEstimateRow:
    alpha: int
    beta: int
    dt: bool
    target: float
    fitted: float | None
    residual: float
    a_power_target: float | None
    a_power_fitted: float | None
    passed: bool
    inconclusive: bool


@dataclass
class SymbolEstimateReport:
    rows: list[SymbolEstimateRow]
    xi_values: np.ndarray
    params: ParameterSet

    @property
    def passed(self) -> bool:
        return all(r.passed or r.inconclusive for r in self.rows)


def _r_at(coeffs, params, t, x, xi, hn_scale=1.0):
    m_mat = build_M(coeffs, params, t, x, xi, hn_scale=hn_scale, check_spectrum=False)
    mu = bracket_pow(xi, _num(params.ell), _num(params.rho))
    return _lyap_solve_batch(m_mat[None], np.array([_num(params.a) * mu]))[0]


def _fd_derivative(coeffs, params, t, x, xi, alpha, beta, dt_flag):
    """Central finite differences of R in xi (alpha), x (beta) and t."""
    ell, rho = _num(params.ell), _num(params.rho)
    hxi = 1e-3 * bracket(xi, ell)
    band = max(coeffs.x_band, 1)
    hx = 2.0 * math.pi / (8.0 * band * max(beta, 1) + 64.0)
    ht = 1e-3

    def r_of(dxi_steps, dx_steps, dt_steps):
        return _r_at(
            coeffs,
            params,
            t + dt_steps * ht,
            x + dx_steps * hx,
            xi + dxi_steps * hxi,
        )

    def stencil(fun, order, h):
        if order == 0:
            return fun(0)
        if order == 1:
            return (fun(1) - fun(-1)) / (2 * h)
        return (fun(1) - 2 * fun(0) + fun(-1)) / h**2

    def in_t(dt_steps):
        def in_x(dx_steps):
            def in_xi(dxi_steps):
                return r_of(dxi_steps, dx_steps, dt_steps)

            return stencil(in_xi, alpha, hxi)

        return stencil(in_x, beta, hx)

    if dt_flag:
        return (in_t(1) - in_t(-1)) / (2 * ht)
    return in_t(0)


def symbol_estimate_probe(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    xi_values,
    t0: float = 0.1,
    x_probes=(0.0, 0.9, 2.1),
    max_order: int = 2,
    include_dt: bool = True,
    a_values=(2.0, 4.0, 8.0),
    check_a_power: bool = False,
    tol: float = 0.15,
) -> SymbolEstimateReport:
    """Measure ``d_x^beta d_xi^alpha R`` decay against the class targets.

    Target exponent per row: ``2 nu + (1 - rho + nu) |beta| - (rho - nu)
    |alpha|`` with an extra ``1 - rho + nu`` for the time derivative (one
    time derivative acts like one space derivative).  The fit passes when
    it does not exceed target + ``tol``; a log-fit residual above 0.3 marks
    the row inconclusive rather than failed.  Rows whose samples sit at the
    noise floor pass trivially.
    """
    xi_values = np.asarray(xi_values, dtype=float)
    nu = params.nu
    rho = _num(params.rho)
    ell = _num(params.ell)
    rows: list[SymbolEstimateRow] = []
    combos = [(al, be, False) for al in range(max_order + 1) for be in range(max_order + 1)
              if 0 < al + be <= max_order or (al, be) == (0, 0)]
    if include_dt:
        combos.append((0, 0, True))
    br = bracket(xi_values, ell)
    for alpha, beta, dt_flag in combos:
        target = 2 * nu + (1 - rho + nu) * beta - (rho - nu) * alpha
        if dt_flag:
            target += 1 - rho + nu
        vals = np.empty(len(xi_values))
        for i, xi in enumerate(xi_values):
            best = 0.0
            for xp in np.atleast_1d(x_probes):
                d = _fd_derivative(coeffs, params, t0, float(xp), float(xi), alpha, beta, dt_flag)
                best = max(best, float(np.linalg.norm(d, 2)))
            vals[i] = best
        floor = 1e-12
        if np.max(vals) <= floor:
            rows.append(
                SymbolEstimateRow(alpha, beta, dt_flag, target, None, 0.0,
                                  None, None, True, False)
            )
            continue
        good = (vals > floor) & _fit_window(xi_values, ell)
        if np.count_nonzero(good) < 3:
            good = vals > floor
        fit = np.polyfit(np.log(br[good]), np.log(vals[good]), 1)
        resid = float(np.sqrt(np.mean(
            (np.log(vals[good]) - np.polyval(fit, np.log(br[good]))) ** 2
        )))
        fitted = float(fit[0])
        inconclusive = resid > 0.3
        a_target = a_fitted = None
        if check_a_power:
            # The class constant is one-sided: families far below the bound
            # shed a-decay into their bracket slack, so the a-slope is
            # reported (with the class target for reference) and only
            # monotone non-increase in a is asserted.
            a_target = -float(alpha + beta + (1 if dt_flag else 0))
            xi_ref = float(xi_values[len(xi_values) // 2])
            norms = []
            for a in a_values:
                pa = rescale_for_a(params, float(a))
                d = _fd_derivative(coeffs, pa, t0, float(np.atleast_1d(x_probes)[0]),
                                   xi_ref, alpha, beta, dt_flag)
                norms.append(float(np.linalg.norm(d, 2)))
            if max(norms) > floor:
                a_fitted = float(
                    np.polyfit(np.log(np.asarray(a_values, float)),
                               np.log(np.maximum(norms, 1e-300)), 1)[0]
                )
        passed = bool(fitted <= target + tol)
        if check_a_power and a_fitted is not None:
            passed = passed and (a_fitted <= 0.05)
        rows.append(
            SymbolEstimateRow(alpha, beta, dt_flag, target, fitted, resid,
                              a_target, a_fitted, passed, inconclusive)
        )
    return SymbolEstimateReport(rows=rows, xi_values=xi_values, params=params)


# ---------------------------------------------------------------------------
# Mollified symmetrizer (Hoelder mode)


@dataclass
class MollifiedSymmetrizer:
    eval_ts: np.ndarray
    values: np.ndarray  # (ne,) + node_shape + (m, m)
    delta: float
    kernel: str
    source_ts: np.ndarray


def mollify_path(
    ts: np.ndarray,
    r_path: np.ndarray,
    bracket_vals: np.ndarray,
    delta: float,
    eval_ts,
    kernel=poly_bump,
    kernel_name: str = "poly_bump",
) -> MollifiedSymmetrizer:
    """Discrete time-mollification ``<xi>^delta int R(s) chi((t-s)<xi>^delta) ds``.

    ``r_path`` has shape (nt,) + node_shape + (m, m) and ``bracket_vals``
    broadcasts over node_shape.  Weights are renormalized to unit mass so a
    time-constant path is reproduced exactly; refuses paths sampled more
    coarsely than a quarter of the narrowest kernel width.
    """
    ts = np.asarray(ts, dtype=float)
    eval_ts = np.atleast_1d(np.asarray(eval_ts, dtype=float))
    br = np.asarray(bracket_vals, dtype=float)
    widths = br ** (-float(delta))
    dt = float(np.max(np.diff(ts)))
    if dt > float(np.min(widths)) / 4.0:
        raise SamplingError(
            f"path step {dt:.3g} too coarse for mollifier width {np.min(widths):.3g}"
        )
    if np.min(eval_ts) - np.min(ts) < np.max(widths) - 1e-12 or (
        np.max(ts) - np.max(eval_ts) < np.max(widths) - 1e-12
    ):
        raise SamplingError("path does not cover kernel support around eval times")
    node_shape = r_path.shape[1:-2]
    m = r_path.shape[-1]
    out = np.empty((len(eval_ts),) + node_shape + (m, m), dtype=complex)
    arg_shape = (len(ts),) + node_shape
    for ie, t in enumerate(eval_ts):
        u = (t - ts).reshape((len(ts),) + (1,) * len(node_shape)) / widths[None]
        w = kernel(np.broadcast_to(u, arg_shape))
        norm = np.sum(w, axis=0)
        w = w / np.where(norm == 0, 1.0, norm)
        out[ie] = np.einsum("t...,t...ij->...ij", w, r_path)
    return MollifiedSymmetrizer(
        eval_ts=eval_ts,
        values=out,
        delta=float(delta),
        kernel=kernel_name,
        source_ts=ts,
    )


@dataclass
class HolderDifferenceFit:
    exponent: float | None
    target: float
    max_ratio: float
    passed: bool
    xi_values: np.ndarray
    ratios: np.ndarray


def holder_difference_probe(
    coeffs: SystemCoefficients,
    params: ParameterSet,
    t_pairs,
    xi_values,
    x0: float = 0.0,
    tol: float = 0.15,
) -> HolderDifferenceFit:
    """Measure ``||R(t) - R(t')|| / |t - t'|^kappa`` across scales.

    Passes when the ratio stays bounded and its bracket exponent does not
    exceed ``3 nu + 1 - rho`` + tol.
    """
    kappa = float(params.kappa if params.kappa is not None else coeffs.kappa or 1.0)
    nu, rho = params.nu, _num(params.rho)
    xi_values = np.asarray(xi_values, dtype=float)
    ratios = np.zeros(len(xi_values))
    for i, xi in enumerate(xi_values):
        worst = 0.0
        for t1, t2 in t_pairs:
            r1 = _r_at(coeffs, params, float(t1), x0, float(xi))
            r2 = _r_at(coeffs, params, float(t2), x0, float(xi))
            worst = max(
                worst,
                float(np.linalg.norm(r1 - r2, 2)) / abs(t1 - t2) ** kappa,
            )
        ratios[i] = worst
    target = 3 * nu + 1 - rho
    br = bracket(xi_values, _num(params.ell))
    if np.max(ratios) <= 1e-12:
        return HolderDifferenceFit(None, target, float(np.max(ratios)), True,
                                   xi_values, ratios)
    good = (ratios > 1e-12) & _fit_window(xi_values, _num(params.ell))
    if np.count_nonzero(good) < 3:
        good = ratios > 1e-12
    slope = float(np.polyfit(np.log(br[good]), np.log(ratios[good]), 1)[0])
    passed = bool(slope <= target + tol and np.all(np.isfinite(ratios)))
    return HolderDifferenceFit(slope, target, float(np.max(ratios)), passed,
                               xi_values, ratios)
