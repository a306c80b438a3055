"""Planar rigid-body chains: kinematics, mass matrix, and velocity bias.

A chain is a tree of 1-DOF joints (revolute, or prismatic along a local
axis), each adding one generalized coordinate. Bodies (point mass plus
rotational inertia at a frame-fixed offset) and point sites (contact
points) attach to joint frames.

Every function here is written with analytic operations only (trig and
linear algebra), so it can be evaluated with complex configurations.
Higher-level code exploits this: machine-precision derivatives of any
first-order quantity (Jacobians, bias) are obtained with a complex step,
avoiding hand-derived second-order kinematics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Joint", "Body", "Site", "PlanarChain"]

# joint kinds
REVOLUTE = "revolute"
PRISMATIC_X = "prismatic_x"  # slides along the local +x axis
PRISMATIC_Z = "prismatic_z"  # slides along the local +z axis


@dataclass(frozen=True)
class Joint:
    kind: str
    parent: int  # parent joint index, -1 for the world
    offset: tuple = (0.0, 0.0)  # fixed translation in the parent frame


@dataclass(frozen=True)
class Body:
    frame: int
    com: tuple  # frame-fixed offset of the center of mass
    mass: float
    inertia: float  # rotational inertia about the com


@dataclass(frozen=True)
class Site:
    frame: int
    offset: tuple


def _rot(a):
    c, s = np.cos(a), np.sin(a)
    return c, s


def _rotate(c, s, vx, vz):
    # R(a) = [[cos, -sin], [sin, cos]] applied to (x, z)
    return c * vx - s * vz, s * vx + c * vz


@dataclass(frozen=True)
class PlanarChain:
    joints: tuple
    bodies: tuple
    sites: tuple
    _ancestors: tuple = field(default=(), compare=False)

    @staticmethod
    def build(joints, bodies, sites) -> "PlanarChain":
        joints = tuple(joints)
        anc = []
        for j, joint in enumerate(joints):
            path = []
            k = j
            while k >= 0:
                path.append(k)
                k = joints[k].parent
            anc.append(tuple(reversed(path)))
        return PlanarChain(joints, tuple(bodies), tuple(sites), tuple(anc))

    @property
    def n(self) -> int:
        return len(self.joints)

    # -- forward kinematics -------------------------------------------------

    def frames(self, q):
        """Angle and origin of every joint frame. Works on complex q."""
        n = self.n
        ang = np.zeros(n, dtype=q.dtype)
        ox = np.zeros(n, dtype=q.dtype)
        oz = np.zeros(n, dtype=q.dtype)
        for j, joint in enumerate(self.joints):
            if joint.parent < 0:
                pa, px, pz = 0.0, 0.0, 0.0
            else:
                p = joint.parent
                pa, px, pz = ang[p], ox[p], oz[p]
            c, s = _rot(pa)
            fx, fz = _rotate(c, s, joint.offset[0], joint.offset[1])
            bx, bz = px + fx, pz + fz
            if joint.kind == REVOLUTE:
                ang[j] = pa + q[j]
                ox[j], oz[j] = bx, bz
            elif joint.kind == PRISMATIC_X:
                ang[j] = pa
                dx, dz = _rotate(c, s, q[j], 0.0 * q[j])
                ox[j], oz[j] = bx + dx, bz + dz
            elif joint.kind == PRISMATIC_Z:
                ang[j] = pa
                dx, dz = _rotate(c, s, 0.0 * q[j], q[j])
                ox[j], oz[j] = bx + dx, bz + dz
            else:
                raise ValueError(joint.kind)
        return ang, ox, oz

    def point(self, q, frame, offset):
        ang, ox, oz = self.frames(q)
        c, s = _rot(ang[frame])
        dx, dz = _rotate(c, s, offset[0], offset[1])
        return np.stack([ox[frame] + dx, oz[frame] + dz])

    def _point_from_frames(self, frames, frame, offset):
        ang, ox, oz = frames
        c, s = _rot(ang[frame])
        dx, dz = _rotate(c, s, offset[0], offset[1])
        return ox[frame] + dx, oz[frame] + dz

    def point_jacobian(self, q, frame, offset, frames=None):
        """Geometric Jacobian d(point)/dq, shape (2, n). Complex-safe.

        Revolute ancestor j contributes perp(p - o_j); a prismatic ancestor
        contributes its world-frame axis direction.
        """
        if frames is None:
            frames = self.frames(q)
        ang, ox, oz = frames
        px, pz = self._point_from_frames(frames, frame, offset)
        J = np.zeros((2, self.n), dtype=q.dtype)
        for j in self._ancestors[frame]:
            joint = self.joints[j]
            if joint.kind == REVOLUTE:
                J[0, j] = -(pz - oz[j])
                J[1, j] = px - ox[j]
            else:
                pa = 0.0 if joint.parent < 0 else ang[joint.parent]
                c, s = _rot(pa)
                axis = (1.0, 0.0) if joint.kind == PRISMATIC_X else (0.0, 1.0)
                axw = _rotate(c, s, axis[0], axis[1])
                J[0, j] = axw[0]
                J[1, j] = axw[1]
        return J

    def point_jacobian_dot(self, q, v, frame, offset, frames=None):
        """Time derivative of the point Jacobian along velocity v, (2, n).

        Analytic: d/dt perp(p - o_j) = perp(dp - do_j) and prismatic axes
        rotate with the parent angle rate. Complex-safe in both q and v.
        """
        if frames is None:
            frames = self.frames(q)
        ang, ox, oz = frames
        pdot = self.point_jacobian(q, frame, offset, frames) @ v
        Jd = np.zeros((2, self.n), dtype=np.result_type(q.dtype, v.dtype))
        for j in self._ancestors[frame]:
            joint = self.joints[j]
            if joint.kind == REVOLUTE:
                odot = self._origin_velocity(q, v, j, frames)
                Jd[0, j] = -(pdot[1] - odot[1])
                Jd[1, j] = pdot[0] - odot[0]
            else:
                pa_rate = self._angle_rate(v, joint.parent)
                pa = 0.0 if joint.parent < 0 else ang[joint.parent]
                c, s = _rot(pa)
                axis = (1.0, 0.0) if joint.kind == PRISMATIC_X else (0.0, 1.0)
                axw = _rotate(c, s, axis[0], axis[1])
                # d/dt R(a) u = a_rate * perp(R(a) u)
                Jd[0, j] = -axw[1] * pa_rate
                Jd[1, j] = axw[0] * pa_rate
        return Jd

    def _origin_velocity(self, q, v, j, frames):
        joint = self.joints[j]
        if joint.kind == REVOLUTE:
            off = (0.0, 0.0)
            fr = j
        else:
            # prismatic origin moves with its own coordinate as well
            return self.point_jacobian(q, j, (0.0, 0.0), frames) @ v
        return self.point_jacobian(q, fr, off, frames) @ v

    def _angle_rate(self, v, frame):
        rate = 0.0
        k = frame
        while k >= 0:
            if self.joints[k].kind == REVOLUTE:
                rate = rate + v[k]
            k = self.joints[k].parent
        return rate

    def angle_jacobian_row(self, frame) -> np.ndarray:
        """d(frame angle)/dq: constant 0/1 row over revolute ancestors."""
        row = np.zeros(self.n)
        k = frame
        while k >= 0:
            if self.joints[k].kind == REVOLUTE:
                row[k] = 1.0
            k = self.joints[k].parent
        return row

    # -- dynamics -----------------------------------------------------------

    def mass_matrix(self, q):
        frames = self.frames(q)
        M = np.zeros((self.n, self.n), dtype=q.dtype)
        for b in self.bodies:
            Jp = self.point_jacobian(q, b.frame, b.com, frames)
            M += b.mass * (Jp.T @ Jp)
            ja = self.angle_jacobian_row(b.frame)
            M += b.inertia * np.outer(ja, ja)
        return M

    def bias(self, q, v, gravity: float):
        """Velocity-product and gravity bias C(q, v).

        Convention: M(q) dv/dt + C(q, v) = generalized force, so gravity
        appears with +m*g on the vertical rows. Complex-safe.
        """
        frames = self.frames(q)
        out = np.zeros(self.n, dtype=np.result_type(q.dtype, v.dtype))
        for b in self.bodies:
            Jp = self.point_jacobian(q, b.frame, b.com, frames)
            Jd = self.point_jacobian_dot(q, v, b.frame, b.com, frames)
            out += b.mass * (Jp.T @ (Jd @ v))
            out += b.mass * gravity * Jp[1, :]
        return out

    def potential_energy(self, q, gravity: float) -> float:
        frames = self.frames(q)
        pe = 0.0
        for b in self.bodies:
            _, z = self._point_from_frames(frames, b.frame, b.com)
            pe += b.mass * gravity * z
        return float(pe)
