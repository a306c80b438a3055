"""Nonlinear hard-contact dynamics: residual, one-step solve, derivatives,
and simulation rollouts.

One step finds the next configuration and contact impulses satisfying the
impulse-balance rows, gap and friction-cone slack definitions, and the
maximum-dissipation rows, with relaxed complementarity y*z = rho. Contact
and control inputs carry impulse units (force integrated over one step).

Unknown layout (planar, one tangent direction doubled per contact):

    w = [ q_next | gamma (c) | psi (c) | beta (2c) | s_gap (c) | s_cone (c) | eta (2c) ]

with cone pairs (gamma, s_gap), (psi, s_cone), (beta, eta).

Newton directions use a first-order Jacobian (kinematic curvature and
velocity-bias derivatives dropped; they are orders of magnitude below the
M/h block at our step sizes), which the merit line search safeguards.
Sensitivities use the exact Jacobian, assembled with complex-step
derivatives of the analytic evaluators.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import lcp
from .diffutil import cstep_jacobian
from .model import Model
from .terrain import TerrainProfile

__all__ = [
    "ContactVariables",
    "ContactStepResult",
    "ContactProgram",
    "NoConvergenceError",
    "assemble_residual",
    "step",
    "step_jacobians",
    "simulate",
    "Trajectory",
    "project_to_feasible",
    "write_trajectory_csv",
    "trajectory_summary",
]

SIM_SETTINGS = lcp.PathFollowingSettings(rho_target=1e-6)


class NoConvergenceError(RuntimeError):
    def __init__(self, msg, result=None, step_index=None):
        super().__init__(msg)
        self.result = result
        self.step_index = step_index


@dataclass
class ContactVariables:
    gamma: np.ndarray  # normal impulses (c,)
    psi: np.ndarray  # friction-cone duals (c,)
    beta: np.ndarray  # doubled tangential impulses (2c,)
    s_gap: np.ndarray  # gap slacks (c,)
    s_cone: np.ndarray  # cone-margin slacks (c,)
    eta: np.ndarray  # tangential duals (2c,)

    @staticmethod
    def zeros(c: int) -> "ContactVariables":
        return ContactVariables(
            np.zeros(c), np.zeros(c), np.zeros(2 * c), np.zeros(c), np.zeros(c), np.zeros(2 * c)
        )

    @staticmethod
    def from_w(w: np.ndarray, n: int, c: int) -> "ContactVariables":
        y = w[n : n + 4 * c]
        z = w[n + 4 * c :]
        return ContactVariables(
            gamma=y[:c].copy(),
            psi=y[c : 2 * c].copy(),
            beta=y[2 * c :].copy(),
            s_gap=z[:c].copy(),
            s_cone=z[c : 2 * c].copy(),
            eta=z[2 * c :].copy(),
        )

    def cone_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.gamma, self.psi, self.beta, self.s_gap, self.s_cone, self.eta]
        )

    @property
    def tangent_impulse(self) -> np.ndarray:
        """Net tangential impulse per contact (+tangent minus -tangent)."""
        return self.beta[0::2] - self.beta[1::2]


@dataclass
class ContactStepResult:
    q_next: np.ndarray
    contact: ContactVariables
    v_next: np.ndarray
    iterations: int
    rho_final: float
    residual_norm: float
    status: str
    w: np.ndarray


class ContactProgram(lcp.ResidualProgram):
    """Residual program for one hard-contact step of a model.

    theta = concat(q_prev, q, u); an optional external generalized impulse
    (disturbance) enters the balance rows as fixed data.
    """

    def __init__(self, model: Model, terrain: TerrainProfile, ext_impulse=None):
        self.model = model
        self.terrain = terrain
        self.n_x = model.n
        self.n_cone = 4 * model.c
        self.ext = np.zeros(model.n) if ext_impulse is None else np.asarray(ext_impulse)

    # -- theta helpers ------------------------------------------------------

    def pack_theta(self, q_prev, q, u) -> np.ndarray:
        return np.concatenate([q_prev, q, u])

    def split_theta(self, theta):
        n, m = self.model.n, self.model.m
        return theta[:n], theta[n : 2 * n], theta[2 * n :]

    def initial_point(self, theta) -> np.ndarray:
        q_prev, q, _ = self.split_theta(theta)
        w = np.ones(self.dim())
        w[: self.n_x] = 2.0 * q - q_prev  # constant-velocity extrapolation
        return w

    # -- residual -----------------------------------------------------------

    def residual(self, w, theta, rho):
        mdl = self.model
        n, c, h = mdl.n, mdl.c, mdl.h
        q_prev, q, u = self.split_theta(theta)
        x = w[:n]
        y = w[n : n + 4 * c]
        z = w[n + 4 * c :]
        gamma, psi, beta = y[:c], y[c : 2 * c], y[2 * c :]
        s_gap, s_cone = z[:c], z[c : 2 * c]
        eta = z[2 * c :]

        v_next = (x - q) / h
        normal, tangent = mdl.contact_rows(x)
        beta_net = beta[0::2] - beta[1::2]
        balance = (
            (mdl.mass_matrix(q_prev) @ (q - q_prev) - mdl.mass_matrix(q) @ (x - q)) / h
            - h * mdl.bias(q, v_next)
            + normal.T @ gamma
            + tangent.T @ beta_net
            + mdl.input_matrix(x) @ u
            + self.ext
        )
        gap_rows = s_gap - mdl.gap(x, self.terrain)
        cone_rows = s_cone - (mdl.mu * gamma - (beta[0::2] + beta[1::2]))
        nu = tangent @ v_next
        md = np.empty(2 * c, dtype=balance.dtype)
        md[0::2] = eta[0::2] - nu - psi
        md[1::2] = eta[1::2] + nu - psi
        bilinear = y * z - rho
        return np.concatenate([balance, gap_rows, cone_rows, md, bilinear])

    # -- Jacobians ----------------------------------------------------------

    def _structure_blocks(self, x):
        """Jacobian blocks that are cheap and shared by both Jacobians."""
        mdl = self.model
        n, c = mdl.n, mdl.c
        normal, tangent = mdl.contact_rows(x)
        J = np.zeros((n + 8 * c, n + 8 * c))
        # balance rows, y columns
        J[:n, n : n + c] = normal.T
        for i in range(c):
            J[:n, n + 2 * c + 2 * i] = tangent[i]
            J[:n, n + 2 * c + 2 * i + 1] = -tangent[i]
        # gap rows
        J[n : n + c, :n] = -mdl.gap_jacobian(x, self.terrain)
        J[n : n + c, n + 4 * c : n + 5 * c] = np.eye(c)
        # cone rows
        J[n + c : n + 2 * c, n : n + c] = -np.diag(mdl.mu)
        for i in range(c):
            J[n + c + i, n + 2 * c + 2 * i : n + 2 * c + 2 * i + 2] = 1.0
        J[n + c : n + 2 * c, n + 5 * c : n + 6 * c] = np.eye(c)
        # maximum-dissipation rows
        for i in range(c):
            J[n + 2 * c + 2 * i, :n] = -tangent[i] / mdl.h
            J[n + 2 * c + 2 * i + 1, :n] = tangent[i] / mdl.h
            J[n + 2 * c + 2 * i : n + 2 * c + 2 * i + 2, n + c + i] = -1.0
        J[n + 2 * c : n + 4 * c, n + 6 * c :] = np.eye(2 * c)
        return J

    def jacobian(self, w, theta, rho):
        mdl = self.model
        n, c = mdl.n, mdl.c
        _, q, _ = self.split_theta(theta)
        x = w[:n]
        y = w[n : n + 4 * c]
        z = w[n + 4 * c :]
        J = self._structure_blocks(x)
        J[:n, :n] += -mdl.mass_matrix(q) / mdl.h
        J[n + 4 * c :, n : n + 4 * c] = np.diag(z)
        J[n + 4 * c :, n + 4 * c :] = np.diag(y)
        return J

    def ift_jacobian(self, w, theta, rho):
        """Exact d r / d w: adds kinematic curvature and bias derivatives."""
        mdl = self.model
        n, c, h = mdl.n, mdl.c, mdl.h
        q_prev, q, u = self.split_theta(theta)
        x = w[:n]
        y = w[n : n + 4 * c]
        z = w[n + 4 * c :]
        gamma = y[:c]
        beta = y[2 * c :]
        beta_net = beta[0::2] - beta[1::2]

        J = self._structure_blocks(x)

        def x_rows(xc):
            v_next = (xc - q) / h
            normal, tangent = mdl.contact_rows(xc)
            balance = (
                -mdl.mass_matrix(q) @ (xc - q) / h
                - h * mdl.bias(q, v_next)
                + normal.T @ gamma
                + tangent.T @ beta_net
                + mdl.input_matrix(xc) @ u
            )
            nu = tangent @ v_next
            md = np.empty(2 * c, dtype=xc.dtype)
            md[0::2] = -nu
            md[1::2] = nu
            return np.concatenate([balance, md])

        block = cstep_jacobian(x_rows, x)
        J[:n, :n] = block[:n]
        J[n + 2 * c : n + 4 * c, :n] = block[n:]
        J[n + 4 * c :, n : n + 4 * c] = np.diag(z)
        J[n + 4 * c :, n + 4 * c :] = np.diag(y)
        return J

    def jacobian_theta(self, w, theta):
        mdl = self.model
        n, c, m, h = mdl.n, mdl.c, mdl.m, mdl.h
        q_prev, q, u = self.split_theta(theta)
        x = w[:n]
        _, tangent = mdl.contact_rows(x)

        Jt = np.zeros((self.dim(), 2 * n + m))

        def balance_prev(qp):
            return mdl.mass_matrix(qp) @ (q - qp) / h

        def balance_cur(qc):
            v_next = (x - qc) / h
            return (
                mdl.mass_matrix(q_prev) @ (qc - q_prev) - mdl.mass_matrix(qc) @ (x - qc)
            ) / h - h * mdl.bias(qc, v_next)

        Jt[:n, :n] = cstep_jacobian(balance_prev, q_prev)
        Jt[:n, n : 2 * n] = cstep_jacobian(balance_cur, q)
        Jt[:n, 2 * n :] = np.real(mdl.input_matrix(x))
        # maximum-dissipation rows: nu = T(x)(x - q)/h depends on q
        for i in range(c):
            Jt[n + 2 * c + 2 * i, n : 2 * n] = tangent[i] / h
            Jt[n + 2 * c + 2 * i + 1, n : 2 * n] = -tangent[i] / h
        return Jt


# ---------------------------------------------------------------------------
# operations


def assemble_residual(model, terrain, q_prev, q, u, w, rho, ext_impulse=None):
    """Residual vector of the one-step feasibility problem at iterate w."""
    prog = ContactProgram(model, terrain, ext_impulse)
    return prog.residual(np.asarray(w, float), prog.pack_theta(q_prev, q, u), rho)


def _warm_start_w(prog: ContactProgram, theta, warm: ContactVariables) -> np.ndarray:
    mdl = prog.model
    q_prev, q, _ = prog.split_theta(theta)
    floor = 1e-4
    gamma = np.maximum(warm.gamma, floor)
    psi = np.maximum(warm.psi, floor)
    beta = np.maximum(warm.beta, floor)
    eta = np.maximum(warm.eta, floor)
    s_gap = np.maximum(np.real(mdl.gap(q, prog.terrain)), floor)
    s_cone = np.maximum(mdl.mu * gamma - (beta[0::2] + beta[1::2]), floor)
    x = 2.0 * q - q_prev
    return np.concatenate([x, gamma, psi, beta, s_gap, s_cone, eta])


def step(
    model: Model,
    terrain: TerrainProfile,
    q_prev,
    q,
    u,
    settings: lcp.PathFollowingSettings = SIM_SETTINGS,
    warm: ContactVariables | None = None,
    ext_impulse=None,
) -> ContactStepResult:
    """Advance the system one step by solving the contact feasibility problem."""
    prog = ContactProgram(model, terrain, ext_impulse)
    theta = prog.pack_theta(np.asarray(q_prev, float), np.asarray(q, float), np.asarray(u, float))
    init = _warm_start_w(prog, theta, warm) if warm is not None else None
    res = lcp.solve(prog, theta, init=init, settings=settings)
    if not res.converged:
        # a cold start is more robust than a bad warm start; retry once
        if init is not None:
            res = lcp.solve(prog, theta, init=None, settings=settings)
        if not res.converged:
            raise NoConvergenceError(
                f"contact step failed: {res.status}, |r|={res.residual_norm:.3e}",
                result=res,
            )
    q_next = res.w[: model.n].copy()
    return ContactStepResult(
        q_next=q_next,
        contact=ContactVariables.from_w(res.w, model.n, model.c),
        v_next=(q_next - np.asarray(q, float)) / model.h,
        iterations=res.newton_iterations,
        rho_final=res.rho_final,
        residual_norm=res.residual_norm,
        status=res.status,
        w=res.w,
    )


def step_jacobians(
    model: Model,
    terrain: TerrainProfile,
    result: ContactStepResult,
    q_prev,
    q,
    u,
    rho_grad: float = 1e-4,
    ext_impulse=None,
):
    """Sensitivities of q_next with respect to (q_prev, q, u) at rho_grad."""
    prog = ContactProgram(model, terrain, ext_impulse)
    theta = prog.pack_theta(np.asarray(q_prev, float), np.asarray(q, float), np.asarray(u, float))
    diff = lcp.differentiate(prog, result.w, theta, rho_grad=rho_grad)
    n, m = model.n, model.m
    rows = diff.sensitivity[:n]
    return rows[:, :n], rows[:, n : 2 * n], rows[:, 2 * n :], diff


# ---------------------------------------------------------------------------
# simulation


@dataclass
class Trajectory:
    model_name: str
    h: float
    qs: np.ndarray  # (N+2, n): q_{-1}, q_0, then one per step
    vs: np.ndarray  # (N+1, n): finite-difference velocities
    us: np.ndarray  # (N, m)
    gammas: np.ndarray  # (N, c)
    betas: np.ndarray  # (N, 2c)
    psis: np.ndarray  # (N, c)
    s_gaps: np.ndarray  # (N, c)
    iterations: np.ndarray  # (N,)
    energies: np.ndarray  # (N+1,)

    @property
    def steps(self) -> int:
        return self.us.shape[0]


def simulate(
    model: Model,
    terrain: TerrainProfile,
    q0,
    q1,
    controls,
    disturbances=None,
    settings: lcp.PathFollowingSettings = SIM_SETTINGS,
    warm_start: bool = True,
) -> Trajectory:
    """Roll the one-step dynamics over a control sequence.

    ``disturbances`` is an optional (N, n) array of additive generalized
    impulses, one per step (zeros reproduce the undisturbed rollout
    bit-exactly).
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    N = controls.shape[0]
    n = model.n
    qs = np.zeros((N + 2, n))
    qs[0] = q0
    qs[1] = q1
    vs = np.zeros((N + 1, n))
    vs[0] = (qs[1] - qs[0]) / model.h
    us = np.array(controls, dtype=float)
    gammas = np.zeros((N, model.c))
    betas = np.zeros((N, 2 * model.c))
    psis = np.zeros((N, model.c))
    s_gaps = np.zeros((N, model.c))
    iters = np.zeros(N, dtype=int)
    energies = np.zeros(N + 1)
    energies[0] = model.energy(qs[1], vs[0])

    warm: ContactVariables | None = None
    for k in range(N):
        ext = None if disturbances is None else np.asarray(disturbances[k], dtype=float)
        if ext is not None and not np.any(ext):
            ext = None
        try:
            res = step(
                model,
                terrain,
                qs[k],
                qs[k + 1],
                us[k],
                settings=settings,
                warm=warm if warm_start else None,
                ext_impulse=ext,
            )
        except NoConvergenceError as err:
            err.step_index = k
            raise
        qs[k + 2] = res.q_next
        vs[k + 1] = res.v_next
        gammas[k] = res.contact.gamma
        betas[k] = res.contact.beta
        psis[k] = res.contact.psi
        s_gaps[k] = res.contact.s_gap
        iters[k] = res.iterations
        energies[k + 1] = model.energy(res.q_next, res.v_next)
        warm = res.contact
    return Trajectory(
        model_name=model.name,
        h=model.h,
        qs=qs,
        vs=vs,
        us=us,
        gammas=gammas,
        betas=betas,
        psis=psis,
        s_gaps=s_gaps,
        iterations=iters,
        energies=energies,
    )


def project_to_feasible(model: Model, terrain: TerrainProfile, q) -> np.ndarray:
    """Raise the base vertically until no contact penetrates."""
    q = np.asarray(q, dtype=float).copy()
    if model.base_z_index is None:
        return q
    gap = np.min(np.real(model.gap(q, terrain)))
    if gap < 0.0:
        q[model.base_z_index] += -gap
    return q


# ---------------------------------------------------------------------------
# artifacts


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.qs.shape[1]
    m = traj.us.shape[1]
    c = traj.gammas.shape[1]
    header = (
        ["t"]
        + [f"q{i}" for i in range(n)]
        + [f"v{i}" for i in range(n)]
        + [f"u{i}" for i in range(m)]
        + [f"gamma{i}" for i in range(c)]
        + [f"beta{i}" for i in range(2 * c)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(traj.steps):
            row = (
                [k * traj.h]
                + list(traj.qs[k + 2])
                + list(traj.vs[k + 1])
                + list(traj.us[k])
                + list(traj.gammas[k])
                + list(traj.betas[k])
            )
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def trajectory_summary(traj: Trajectory, model: Model, terrain: TerrainProfile) -> dict:
    pen = []
    for k in range(traj.steps):
        pen.append(float(np.min(np.real(model.gap(traj.qs[k + 2], terrain)))))
    comp = traj.gammas * traj.s_gaps
    return {
        "model": traj.model_name,
        "steps": int(traj.steps),
        "energy_initial": float(traj.energies[0]),
        "energy_final": float(traj.energies[-1]),
        "min_gap": min(pen) if pen else 0.0,
        "max_complementarity": float(np.max(comp)) if comp.size else 0.0,
        "newton_iterations_total": int(np.sum(traj.iterations)),
        "newton_iterations_max": int(np.max(traj.iterations)) if traj.steps else 0,
    }


def save_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
