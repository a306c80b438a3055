"""Planar rigid-body systems with contacts.

Each model exposes the evaluators needed by the contact dynamics:
mass matrix M(q), bias C(q, v) (Coriolis plus gravity, with the sign
convention M dv/dt + C = generalized force), input map B(q), contact
point kinematics, the per-contact signed distance to the environment,
and world-aligned contact frames.

Contact rows are grouped per contact as (normal, tangent). For floor
contacts the normal is world-vertical and the tangent world-horizontal;
terrain shape enters only through the signed distance and its Jacobian.
Wall contacts (pushbot) use a horizontal normal toward the workspace.

Concrete systems are parameterized by JSON files in ``data/`` (masses,
lengths, inertias, friction, time step, policy defaults); the particle
is a programmatic test fixture.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .chain import PlanarChain, Joint, Body, Site, REVOLUTE, PRISMATIC_X, PRISMATIC_Z
from .terrain import TerrainProfile

__all__ = [
    "Model",
    "load_model",
    "particle",
    "signed_distance",
    "kinematics_jacobians",
    "manipulator_terms",
    "MODEL_NAMES",
]

MODEL_NAMES = ("pushbot", "hopper", "quadruped", "biped")


class Model:
    """Base class: floor-contact system over a terrain height field."""

    name: str = "model"
    n: int
    m: int
    c: int
    d: int = 2

    def __init__(self, h: float, gravity: float, mu, params: dict, policy: dict):
        self.h = float(h)
        self.gravity = float(gravity)
        self.mu = np.asarray(mu, dtype=float)
        self.params = dict(params)
        self.policy = dict(policy)

    # -- evaluators (complex-safe where noted) --------------------------------

    def mass_matrix(self, q):
        raise NotImplementedError

    def bias(self, q, v):
        raise NotImplementedError

    def input_matrix(self, q):
        raise NotImplementedError

    def contact_points(self, q):
        """(c, 2) world positions of the contact points. Complex-safe."""
        raise NotImplementedError

    def contact_rows(self, q):
        """(normal, tangent) rows, each (c, n). Complex-safe."""
        raise NotImplementedError

    def gap(self, q, terrain: TerrainProfile):
        pts = self.contact_points(q)
        return pts[:, 1] - terrain.height(pts[:, 0])

    def gap_jacobian(self, q, terrain: TerrainProfile):
        pts = self.contact_points(q)
        normal, tangent = self.contact_rows(q)
        slope = terrain.slope(pts[:, 0])
        return normal - slope[:, None] * tangent

    def potential_energy(self, q) -> float:
        raise NotImplementedError

    def kinetic_energy(self, q, v) -> float:
        return 0.5 * float(v @ self.mass_matrix(q) @ v)

    def energy(self, q, v) -> float:
        return self.kinetic_energy(q, v) + self.potential_energy(q)

    # -- metadata -------------------------------------------------------------

    @property
    def total_mass(self) -> float:
        raise NotImplementedError

    # index of the base horizontal translation coordinate, None if the
    # system is not translation-invariant (pushbot)
    base_x_index: int | None = 0
    base_z_index: int | None = 1
    base_tilt_index: int | None = None

    def fallen(self, q) -> bool:
        pol = self.policy
        if self.base_z_index is not None and "fall_base_z_below" in pol:
            if q[self.base_z_index] < pol["fall_base_z_below"]:
                return True
        if self.base_tilt_index is not None and "fall_tilt_above" in pol:
            if abs(q[self.base_tilt_index]) > pol["fall_tilt_above"]:
                return True
        return False

    def with_time_step(self, h: float) -> "Model":
        return type(self)(h, self.gravity, self.mu, self.params, self.policy)

    def with_payload(self, extra_mass: float) -> "Model":
        """Copy of the model with extra mass rigidly attached to the base."""
        raise NotImplementedError

    def param_hash(self) -> str:
        import hashlib

        payload = json.dumps(
            {
                "name": self.name,
                "h": self.h,
                "gravity": self.gravity,
                "mu": self.mu.tolist(),
                "params": self.params,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# particle: 2D point mass, pure test fixture


class Particle(Model):
    name = "particle"
    n = 2
    m = 2
    c = 1
    base_x_index = 0
    base_z_index = 1

    @property
    def total_mass(self) -> float:
        return self.params["mass"]

    def mass_matrix(self, q):
        return self.params["mass"] * np.eye(2, dtype=q.dtype)

    def bias(self, q, v):
        out = np.zeros(2, dtype=np.result_type(q.dtype, v.dtype))
        out[1] = self.params["mass"] * self.gravity
        return out

    def input_matrix(self, q):
        return np.eye(2, dtype=q.dtype)

    def contact_points(self, q):
        return q.reshape(1, 2)

    def contact_rows(self, q):
        normal = np.array([[0.0, 1.0]], dtype=q.dtype)
        tangent = np.array([[1.0, 0.0]], dtype=q.dtype)
        return normal, tangent

    def potential_energy(self, q) -> float:
        return float(self.params["mass"] * self.gravity * q[1])


def particle(mass=1.0, mu=0.5, h=0.01, gravity=9.81) -> Particle:
    policy = {
        "rate_hz": 1.0 / h,
        "horizon": 5,
        "weight_q": [1.0, 1.0],
        "weight_qprev": [0.01, 0.01],
        "weight_v": [0.1, 0.1],
        "weight_u": [1e-2, 1e-2],
        "fall_base_z_below": -10.0,
    }
    return Particle(h, gravity, [mu], {"mass": mass}, policy)


# ---------------------------------------------------------------------------
# hopper: planar monopod, lumped masses (constant M, gravity-only bias)


class Hopper(Model):
    """q = (x, z, body angle, leg length); controls (body moment, leg force)."""

    name = "hopper"
    n = 4
    m = 2
    c = 1
    base_x_index = 0
    base_z_index = 1
    base_tilt_index = 2

    @property
    def total_mass(self) -> float:
        return self.params["body_mass"] + self.params["leg_mass"]

    def mass_matrix(self, q):
        p = self.params
        mt = p["body_mass"] + p["leg_mass"]
        return np.diag(
            np.array([mt, mt, p["body_inertia"], p["leg_mass"]], dtype=q.dtype)
        )

    def bias(self, q, v):
        out = np.zeros(4, dtype=np.result_type(q.dtype, v.dtype))
        out[1] = self.total_mass * self.gravity
        return out

    def input_matrix(self, q):
        B = np.zeros((4, 2), dtype=q.dtype)
        B[2, 0] = 1.0
        B[3, 1] = 1.0
        return B

    def contact_points(self, q):
        x, z, th, r = q
        return np.stack([x + r * np.sin(th), z - r * np.cos(th)]).reshape(1, 2)

    def contact_rows(self, q):
        x, z, th, r = q
        one = np.ones((), dtype=q.dtype)
        normal = np.stack([0 * one, one, r * np.sin(th), -np.cos(th)]).reshape(1, 4)
        tangent = np.stack([one, 0 * one, r * np.cos(th), np.sin(th)]).reshape(1, 4)
        return normal, tangent

    def potential_energy(self, q) -> float:
        return float(self.total_mass * self.gravity * q[1])

    def with_payload(self, extra_mass: float) -> "Hopper":
        params = dict(self.params)
        params["body_mass"] = params["body_mass"] + extra_mass
        return Hopper(self.h, self.gravity, self.mu, params, self.policy)


# ---------------------------------------------------------------------------
# chain-backed systems


class ChainModel(Model):
    """Model whose dynamics come from a PlanarChain built in a subclass."""

    def __init__(self, h, gravity, mu, params, policy):
        super().__init__(h, gravity, mu, params, policy)
        self.chain, self._contact_sites, self._actuated = self._build()
        self.n = self.chain.n
        self.m = len(self._actuated) + (1 if self.params.get("body_moment", 0) else 0)
        self.c = len(self._contact_sites)

    def _build(self):
        raise NotImplementedError

    @property
    def total_mass(self) -> float:
        return float(sum(b.mass for b in self.chain.bodies))

    def mass_matrix(self, q):
        return self.chain.mass_matrix(q)

    def bias(self, q, v):
        return self.chain.bias(q, v, self.gravity)

    def input_matrix(self, q):
        B = np.zeros((self.n, self.m), dtype=q.dtype)
        col = 0
        if self.params.get("body_moment", 0):
            B[self.base_tilt_index, col] = 1.0
            col += 1
        for j in self._actuated:
            B[j, col] = 1.0
            col += 1
        return B

    def contact_points(self, q):
        pts = [self.chain.point(q, s.frame, s.offset) for s in self._contact_sites]
        return np.stack(pts)

    def contact_rows(self, q):
        frames = self.chain.frames(q)
        normal = np.zeros((self.c, self.n), dtype=q.dtype)
        tangent = np.zeros((self.c, self.n), dtype=q.dtype)
        for i, s in enumerate(self._contact_sites):
            J = self.chain.point_jacobian(q, s.frame, s.offset, frames)
            tangent[i] = J[0]
            normal[i] = J[1]
        return normal, tangent

    def potential_energy(self, q) -> float:
        return self.chain.potential_energy(q, self.gravity)


class Quadruped(ChainModel):
    """Planar quadruped: floating base plus four 2-joint point-foot legs."""

    name = "quadruped"
    base_x_index = 0
    base_z_index = 1
    base_tilt_index = 2

    def _build(self):
        p = self.params
        half = p["torso_half_length"]
        lth, lsh = p["thigh_length"], p["shank_length"]
        joints = [
            Joint(PRISMATIC_X, -1),
            Joint(PRISMATIC_Z, 0),
            Joint(REVOLUTE, 1),
        ]
        bodies = [Body(2, (0.0, 0.0), p["torso_mass"], p["torso_inertia"])]
        sites = []
        actuated = []
        for hip_x in (half, half, -half, -half):
            hip = len(joints)
            joints.append(Joint(REVOLUTE, 2, (hip_x, 0.0)))
            joints.append(Joint(REVOLUTE, hip, (0.0, -lth)))
            bodies.append(Body(hip, (0.0, -lth / 2), p["thigh_mass"], p["thigh_inertia"]))
            bodies.append(
                Body(hip + 1, (0.0, -lsh / 2), p["shank_mass"], p["shank_inertia"])
            )
            sites.append(Site(hip + 1, (0.0, -lsh)))
            actuated += [hip, hip + 1]
        return PlanarChain.build(joints, bodies, sites), tuple(sites), tuple(actuated)

    def with_payload(self, extra_mass: float) -> "Quadruped":
        params = dict(self.params)
        params["torso_mass"] = params["torso_mass"] + extra_mass
        return Quadruped(self.h, self.gravity, self.mu, params, self.policy)


class Biped(ChainModel):
    """Planar biped: floating torso, two 3-joint legs with heel/toe feet."""

    name = "biped"
    base_x_index = 0
    base_z_index = 1
    base_tilt_index = 2

    def _build(self):
        p = self.params
        lth, lsh = p["thigh_length"], p["shank_length"]
        joints = [
            Joint(PRISMATIC_X, -1),
            Joint(PRISMATIC_Z, 0),
            Joint(REVOLUTE, 1),
        ]
        bodies = [Body(2, (0.0, p["torso_com_height"]), p["torso_mass"], p["torso_inertia"])]
        sites = []
        actuated = []
        for _leg in range(2):
            hip = len(joints)
            joints.append(Joint(REVOLUTE, 2, (0.0, 0.0)))
            joints.append(Joint(REVOLUTE, hip, (0.0, -lth)))
            joints.append(Joint(REVOLUTE, hip + 1, (0.0, -lsh)))
            bodies.append(Body(hip, (0.0, -lth / 2), p["thigh_mass"], p["thigh_inertia"]))
            bodies.append(
                Body(hip + 1, (0.0, -lsh / 2), p["shank_mass"], p["shank_inertia"])
            )
            bodies.append(Body(hip + 2, (p["foot_com_x"], 0.0), p["foot_mass"], p["foot_inertia"]))
            sites.append(Site(hip + 2, (-p["heel_length"], 0.0)))
            sites.append(Site(hip + 2, (p["toe_length"], 0.0)))
            actuated += [hip, hip + 1, hip + 2]
        return PlanarChain.build(joints, bodies, sites), tuple(sites), tuple(actuated)

    def with_payload(self, extra_mass: float) -> "Biped":
        params = dict(self.params)
        params["torso_mass"] = params["torso_mass"] + extra_mass
        return Biped(self.h, self.gravity, self.mu, params, self.policy)


class Pushbot(ChainModel):
    """Inverted pendulum with a perpendicular prismatic pusher between walls.

    Contacts are the pusher tip against the right and left walls; their
    normals are horizontal (into the workspace) and tangents vertical.
    The terrain argument is ignored: walls are part of the model.
    """

    name = "pushbot"
    base_x_index = None
    base_z_index = None
    base_tilt_index = 0

    def _build(self):
        p = self.params
        joints = [
            Joint(REVOLUTE, -1),
            Joint(PRISMATIC_X, 0, (0.0, p["pole_length"])),
        ]
        bodies = [
            Body(0, (0.0, p["pole_com_height"]), p["pole_mass"], p["pole_inertia"]),
            Body(1, (0.0, 0.0), p["slider_mass"], p["slider_inertia"]),
        ]
        sites = [Site(1, (0.0, 0.0)), Site(1, (0.0, 0.0))]
        # torque at the base revolute joint, force at the prismatic joint
        return PlanarChain.build(joints, bodies, sites), tuple(sites), (0, 1)

    def contact_rows(self, q):
        J = self.chain.point_jacobian(q, 1, (0.0, 0.0))
        # right wall: normal -x, left wall: normal +x; tangent vertical
        normal = np.stack([-J[0], J[0]])
        tangent = np.stack([J[1], J[1]])
        return normal, tangent

    def gap(self, q, terrain=None):
        px = self.chain.point(q, 1, (0.0, 0.0))[0]
        w = self.params["wall_distance"]
        return np.stack([w - px, px + w])

    def gap_jacobian(self, q, terrain=None):
        normal, _ = self.contact_rows(q)
        return normal

    def fallen(self, q) -> bool:
        return abs(q[0]) > self.policy.get("fall_tilt_above", 1.2)


# ---------------------------------------------------------------------------
# loading

_KINDS = {
    "hopper": Hopper,
    "quadruped": Quadruped,
    "biped": Biped,
    "pushbot": Pushbot,
}


def load_model(name: str, h: float | None = None, **param_overrides) -> Model:
    """Build a shipped model from its JSON parameter file.

    ``name`` is one of MODEL_NAMES or a path to a compatible JSON file.
    Keyword overrides replace entries of the file's ``params`` section.
    """
    if name in MODEL_NAMES:
        text = resources.files("contactmpc").joinpath(f"data/{name}.json").read_text()
    else:
        with open(name) as fh:
            text = fh.read()
    spec = json.loads(text)
    cls = _KINDS[spec["kind"]]
    params = dict(spec["params"])
    params.update(param_overrides)
    model = cls(
        h if h is not None else spec["h"],
        spec.get("gravity", 9.81),
        spec["mu"],
        params,
        spec.get("policy", {}),
    )
    model_n = spec.get("n")
    if model_n is not None and model.n != model_n:
        raise ValueError(f"{spec['kind']}: built n={model.n}, file says {model_n}")
    return model


# ---------------------------------------------------------------------------
# module-level operations


def signed_distance(model: Model, terrain: TerrainProfile, q: np.ndarray) -> np.ndarray:
    """Per-contact gap between the contact points and the environment."""
    return np.asarray(model.gap(np.asarray(q, dtype=float), terrain), dtype=float)


def kinematics_jacobians(model: Model, q: np.ndarray):
    """Stacked contact Jacobian with (normal, tangent) row pairs, plus the
    tangent row blocks."""
    q = np.asarray(q, dtype=float)
    normal, tangent = model.contact_rows(q)
    J = np.zeros((model.c * model.d, model.n))
    for i in range(model.c):
        J[model.d * i] = normal[i]
        J[model.d * i + 1] = tangent[i]
    return J, tangent


def manipulator_terms(model: Model, q: np.ndarray, v: np.ndarray):
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    return model.mass_matrix(q), model.bias(q, v), model.input_matrix(q)
