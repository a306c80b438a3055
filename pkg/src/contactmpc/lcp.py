"""Path-following solver for cone-constrained residual programs.

A residual program packs unknowns w = (x, y, z) where x is free and the
cone pair (y, z) must stay elementwise positive. Its residual stacks
equality rows followed by the relaxed bilinear rows y*z - rho. Newton
steps with two backtracking conditions (positivity of the cone pair,
then merit decrease of ||r||) solve each subproblem; the central-path
parameter rho is cut by a fixed factor whenever the residual is tight,
walking the solution from soft to hard complementarity.

Solutions are differentiated with the implicit-function theorem at a
gradient-specific central-path parameter, re-solving (warm-started) when
the converged rho differs, since rho controls gradient smoothness.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

__all__ = [
    "PathFollowingSettings",
    "SolveResult",
    "DiffResult",
    "ResidualProgram",
    "MlcpData",
    "MlcpProgram",
    "solve",
    "differentiate",
    "write_trace_csv",
    "SingularJacobianError",
]

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
STALLED = "stalled"
SINGULAR = "singular_jacobian"


class SingularJacobianError(RuntimeError):
    pass


@dataclass(frozen=True)
class PathFollowingSettings:
    beta_ls: float = 0.5
    gamma_cp: float = 0.1
    rho_init: float = 0.1
    rho_target: float = 1e-6
    eps_r: float = 1e-8
    rho_grad: float = 1e-4
    max_inner: int = 100
    max_stages: int = 20
    max_backtracks: int = 40
    trace: bool = False

    def __post_init__(self):
        if not (0.0 < self.beta_ls < 1.0 and 0.0 < self.gamma_cp < 1.0):
            raise ValueError("backtracking and reduction factors must be in (0, 1)")
        if self.rho_target <= 0.0 or self.eps_r <= 0.0:
            raise ValueError("rho_target and eps_r must be positive")


@dataclass
class SolveResult:
    w: np.ndarray
    rho_final: float
    residual_norm: float
    newton_iterations: int
    stages: int
    status: str
    trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass
class DiffResult:
    sensitivity: np.ndarray  # d w* / d theta
    w: np.ndarray  # iterate the sensitivity was evaluated at
    rho: float
    least_squares: bool = False


class ResidualProgram:
    """Base class; subclasses fill in residual/Jacobian evaluation.

    Residual layout: n_x equality rows that may involve all of w, then
    n_cone equality rows carrying the identity on z, then n_cone bilinear
    rows y*z - rho. (Programs without the middle block set n_eq_y = 0.)
    """

    n_x: int
    n_cone: int

    def dim(self) -> int:
        return self.n_x + 2 * self.n_cone

    def split(self, w):
        return (
            w[: self.n_x],
            w[self.n_x : self.n_x + self.n_cone],
            w[self.n_x + self.n_cone :],
        )

    def residual(self, w, theta, rho) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, w, theta, rho) -> np.ndarray:
        """d r / d w used for Newton directions."""
        raise NotImplementedError

    def ift_jacobian(self, w, theta, rho) -> np.ndarray:
        """Exact d r / d w for sensitivities (defaults to ``jacobian``)."""
        return self.jacobian(w, theta, rho)

    def jacobian_theta(self, w, theta) -> np.ndarray:
        raise NotImplementedError

    def initial_point(self, theta) -> np.ndarray:
        w = np.zeros(self.dim())
        w[self.n_x :] = 1.0
        return w

    def search_direction(self, w, theta, rho, r) -> np.ndarray:
        J = self.jacobian(w, theta, rho)
        return _solve_with_fallback(J, r)

    def solve_many(self, w, theta, rho, rhs: np.ndarray) -> np.ndarray:
        """Solve (d r / d w) X = rhs for several right-hand sides at once."""
        J = self.ift_jacobian(w, theta, rho)
        lu, piv = scipy.linalg.lu_factor(J)
        return scipy.linalg.lu_solve((lu, piv), rhs)


def _solve_with_fallback(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    try:
        dw = np.linalg.solve(J, r)
    except np.linalg.LinAlgError:
        # exactly singular iterate: a tiny Tikhonov shift gives a usable,
        # deterministic direction (and breaks symmetric-bifurcation ties)
        scale = max(1.0, float(np.max(np.abs(J))))
        dw = np.linalg.solve(J + 1e-10 * scale * np.eye(J.shape[0]), r)
    if not np.all(np.isfinite(dw)):
        raise SingularJacobianError("non-finite Newton direction")
    return dw


def solve(
    program: ResidualProgram,
    theta,
    init: np.ndarray | None = None,
    settings: PathFollowingSettings = PathFollowingSettings(),
) -> SolveResult:
    """Run the path-following method on ``program`` at data ``theta``."""
    w = np.array(init if init is not None else program.initial_point(theta), dtype=float)
    nx = program.n_x
    if init is not None and not np.all(w[nx:] > 0.0):
        raise ValueError("initial cone variables must be strictly positive")

    rho = settings.rho_init
    trace: list = []
    total_newton = 0
    stages = 0
    status = CONVERGED
    rho_solved = rho
    rnorm = float(np.linalg.norm(program.residual(w, theta, rho)))

    while True:
        # Newton iterations at fixed rho
        converged_stage = False
        for _ in range(settings.max_inner):
            r = program.residual(w, theta, rho)
            rnorm = float(np.linalg.norm(r))
            if settings.trace:
                trace.append((stages, total_newton, rho, rnorm))
            if rnorm < settings.eps_r:
                converged_stage = True
                break
            try:
                dw = program.search_direction(w, theta, rho, r)
            except SingularJacobianError:
                status = SINGULAR
                break
            # keep the cone pair strictly positive
            alpha = 1.0
            cone = w[nx:]
            dcone = dw[nx:]
            for _ in range(settings.max_backtracks):
                if np.all(cone - alpha * dcone > 0.0):
                    break
                alpha *= settings.beta_ls
            else:
                status = STALLED
                break
            # merit backtracking: strict decrease of the residual norm
            accepted = False
            for _ in range(settings.max_backtracks):
                w_try = w - alpha * dw
                r_try = float(np.linalg.norm(program.residual(w_try, theta, rho)))
                if r_try < rnorm:
                    accepted = True
                    break
                alpha *= settings.beta_ls
            if not accepted:
                status = STALLED
                break
            w = w - alpha * dw
            total_newton += 1
        else:
            status = MAX_ITERATIONS
        if status != CONVERGED and not converged_stage:
            break
        rho_solved = rho
        stages += 1
        rho = settings.gamma_cp * rho
        if rho < settings.rho_target or stages >= settings.max_stages:
            break

    rnorm = float(np.linalg.norm(program.residual(w, theta, rho_solved)))
    if status == CONVERGED and rnorm >= settings.eps_r:
        status = MAX_ITERATIONS
    return SolveResult(
        w=w,
        rho_final=rho_solved,
        residual_norm=rnorm,
        newton_iterations=total_newton,
        stages=stages,
        status=status,
        trace=trace,
    )


def differentiate(
    program: ResidualProgram,
    w_star: np.ndarray,
    theta,
    rho_grad: float = 1e-4,
    settings: PathFollowingSettings = PathFollowingSettings(),
) -> DiffResult:
    """Implicit-function-theorem sensitivity d w*/d theta at rho_grad.

    If ``w_star`` does not already solve the program at ``rho_grad`` it is
    re-solved warm-started at that central-path parameter first.
    """
    w = np.asarray(w_star, dtype=float)
    r = program.residual(w, theta, rho_grad)
    if float(np.linalg.norm(r)) >= settings.eps_r:
        res = solve(
            program,
            theta,
            init=w,
            settings=replace(settings, rho_init=rho_grad, rho_target=rho_grad, trace=False),
        )
        if not res.converged:
            raise SingularJacobianError(
                f"re-solve at rho_grad={rho_grad:g} failed: {res.status}"
            )
        w = res.w

    jac_theta = np.asarray(program.jacobian_theta(w, theta))
    if jac_theta.ndim == 1:
        jac_theta = jac_theta[:, None]
    least_squares = False
    try:
        sens = -program.solve_many(w, theta, rho_grad, jac_theta)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        least_squares = True
        J = program.ift_jacobian(w, theta, rho_grad)
        sens = -np.linalg.lstsq(J, jac_theta, rcond=None)[0]
    if not np.all(np.isfinite(sens)):
        J = program.ift_jacobian(w, theta, rho_grad)
        sens = -np.linalg.lstsq(J, jac_theta, rcond=None)[0]
        least_squares = True
    return DiffResult(sensitivity=sens, w=w, rho=rho_grad, least_squares=least_squares)


def write_trace_csv(result: SolveResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "iteration", "rho", "residual_norm"])
        writer.writerows(result.trace)


# ---------------------------------------------------------------------------
# standard-form mixed LCP


@dataclass(frozen=True)
class MlcpData:
    """Six-block data (E, F, G, H, f, k) of the standard-form problem:

    E x + F y + f = 0
    G x + H y + z + k = 0
    y * z = rho, y, z >= 0
    """

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    f: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        n, m = self.E.shape[0], self.H.shape[0]
        assert self.E.shape == (n, n) and self.F.shape == (n, m)
        assert self.G.shape == (m, n) and self.H.shape == (m, m)
        assert self.f.shape == (n,) and self.k.shape == (m,)


class MlcpProgram(ResidualProgram):
    """Standard-form MLCP with fixed matrices; theta = concat(f, k)."""

    def __init__(self, E, F, G, H):
        self.E = np.asarray(E, dtype=float)
        self.F = np.asarray(F, dtype=float)
        self.G = np.asarray(G, dtype=float)
        self.H = np.asarray(H, dtype=float)
        self.n_x = self.E.shape[0]
        self.n_cone = self.H.shape[0]

    @staticmethod
    def from_data(data: MlcpData):
        return MlcpProgram(data.E, data.F, data.G, data.H), np.concatenate(
            [data.f, data.k]
        )

    def residual(self, w, theta, rho):
        x, y, z = self.split(w)
        f = theta[: self.n_x]
        k = theta[self.n_x :]
        return np.concatenate(
            [
                self.E @ x + self.F @ y + f,
                self.G @ x + self.H @ y + z + k,
                y * z - rho,
            ]
        )

    def jacobian(self, w, theta, rho):
        _, y, z = self.split(w)
        n, m = self.n_x, self.n_cone
        J = np.zeros((n + 2 * m, n + 2 * m))
        J[:n, :n] = self.E
        J[:n, n : n + m] = self.F
        J[n : n + m, :n] = self.G
        J[n : n + m, n : n + m] = self.H
        J[n : n + m, n + m :] = np.eye(m)
        J[n + m :, n : n + m] = np.diag(z)
        J[n + m :, n + m :] = np.diag(y)
        return J

    def jacobian_theta(self, w, theta):
        n, m = self.n_x, self.n_cone
        Jt = np.zeros((n + 2 * m, n + m))
        Jt[: n + m, : n + m] = np.eye(n + m)
        return Jt
