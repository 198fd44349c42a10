"""Branched revolute-joint kinematic trees.

Joint ``j`` sits at the tip of its parent's link (or at the base for roots),
optionally shifted by ``origin`` expressed in the parent's frame. It rotates by
``q[j]`` about ``axis`` and carries a link of ``length`` along ``direction``
(both in the joint's local frame). The position reported for joint ``j`` is
the tip of its link; end effectors are link tips too.

Planar trees use axis ``z`` and direction ``x`` throughout and report 2-D
positions.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..partition import ActionPartition

BUILTIN_TREES = ("paper-8link", "mini-4link", "upper-body")


class TreeError(ValueError):
    pass


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if v.shape != (3,) or not n > 0:
        raise TreeError(f"expected a non-zero 3-vector, got {v!r}")
    return v / n


def rotation(axis, angle) -> np.ndarray:
    """Rodrigues rotation matrix about unit ``axis``."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


@dataclass(eq=False)
class KinematicTree:
    name: str
    parents: np.ndarray
    lengths: np.ndarray
    axes: np.ndarray
    directions: np.ndarray
    origins: np.ndarray
    limits: np.ndarray  # (n_joints, 2)
    end_effectors: tuple
    chains: tuple
    planar: bool = True
    velocity_limit: float = 0.1

    def __post_init__(self):
        n = len(self.parents)
        if n == 0:
            raise TreeError("tree has no joints")
        for j, p in enumerate(self.parents):
            if not -1 <= p < j:
                raise TreeError(f"joint {j}: parent {p} must be -1 or an earlier joint")
        if np.any(self.lengths <= 0):
            raise TreeError("link lengths must be positive")
        if np.any(self.limits[:, 0] >= self.limits[:, 1]):
            raise TreeError("joint limits must satisfy lower < upper")
        if self.planar and (np.any(self.axes[:, :2] != 0) or np.any(self.directions[:, 2] != 0)
                            or np.any(self.origins[:, 2] != 0)):
            raise TreeError("planar trees need z axes and in-plane directions/origins")
        for t, (ee, chain) in enumerate(zip(self.end_effectors, self.chains)):
            if tuple(chain) != self.path_to(ee):
                raise TreeError(f"task {t}: chain {list(chain)} is not the root path to joint {ee}")
        self.partition()  # validates the shared structure

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    @property
    def n_tasks(self) -> int:
        return len(self.end_effectors)

    @property
    def dim(self) -> int:
        return 2 if self.planar else 3

    def path_to(self, joint: int) -> tuple:
        return _root_path(self.parents, joint)

    def partition(self) -> ActionPartition:
        return ActionPartition(self.chains, self.n_joints)

    def max_reach(self) -> np.ndarray:
        """Per-task upper bound on base-to-end-effector distance."""
        return np.array([sum(self.lengths[j] + np.linalg.norm(self.origins[j]) for j in chain)
                         for chain in self.chains])

    def subtree(self, joint: int) -> list:
        return [j for j in range(self.n_joints) if joint in self.path_to(j)]

    def sample_q(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.limits[:, 0], self.limits[:, 1])


def joint_positions(tree: KinematicTree, q) -> np.ndarray:
    """Tip position of every link, shape ``(n_joints, dim)``."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (tree.n_joints,):
        raise ValueError(f"expected {tree.n_joints} joint angles, got shape {q.shape}")
    n = tree.n_joints
    if tree.planar:
        phi = np.empty(n)
        tips = np.empty((n, 2))
        for j in range(n):
            p = tree.parents[j]
            base_phi = phi[p] if p >= 0 else 0.0
            base = tips[p] if p >= 0 else np.zeros(2)
            ox, oy = tree.origins[j, :2]
            cb, sb = np.cos(base_phi), np.sin(base_phi)
            joint_pos = base + (cb * ox - sb * oy, sb * ox + cb * oy)
            phi[j] = base_phi + q[j] * tree.axes[j, 2]
            c, s = np.cos(phi[j]), np.sin(phi[j])
            dx, dy = tree.directions[j, :2] * tree.lengths[j]
            tips[j] = joint_pos + (c * dx - s * dy, s * dx + c * dy)
        return tips
    rots = np.empty((n, 3, 3))
    tips = np.empty((n, 3))
    for j in range(n):
        p = tree.parents[j]
        base_r = rots[p] if p >= 0 else np.eye(3)
        base = tips[p] if p >= 0 else np.zeros(3)
        joint_pos = base + base_r @ tree.origins[j]
        rots[j] = base_r @ rotation(tree.axes[j], q[j])
        tips[j] = joint_pos + rots[j] @ (tree.directions[j] * tree.lengths[j])
    return tips


def forward_kinematics(tree: KinematicTree, q) -> np.ndarray:
    """End-effector positions, shape ``(n_tasks, dim)``."""
    return joint_positions(tree, q)[list(tree.end_effectors)]


# -- tree files ----------------------------------------------------------------------

def tree_from_dict(d: dict) -> KinematicTree:
    planar = bool(d.get("planar", True))
    joints = d["joints"]
    names = [j.get("name", str(i)) for i, j in enumerate(joints)]

    def ref(x):
        if isinstance(x, str):
            try:
                return names.index(x)
            except ValueError:
                raise TreeError(f"unknown joint name {x!r}") from None
        return int(x)

    parents, lengths, axes, dirs, origins, limits = [], [], [], [], [], []
    for j in joints:
        parent = j.get("parent", -1)
        parents.append(-1 if parent in (-1, None) else ref(parent))
        lengths.append(float(j.get("length", 1.0)))
        axes.append(_unit(j.get("axis", [0, 0, 1])))
        dirs.append(_unit(j.get("direction", [1, 0, 0])))
        origins.append(np.asarray(j.get("origin", [0, 0, 0]), dtype=np.float64))
        lo, hi = j.get("limits", [-np.pi, np.pi])
        limits.append([_angle(lo), _angle(hi)])
    parents = np.array(parents, dtype=int)
    ees = tuple(ref(e) for e in d["end_effectors"])
    # chains are implied by the end effectors; an explicit list is checked against them
    chains = tuple(tuple(ref(j) for j in c) for c in d["tasks"]) if "tasks" in d else None
    if chains is None:
        chains = tuple(_root_path(parents, e) for e in ees)
    return KinematicTree(
        name=str(d.get("name", "tree")), parents=parents, lengths=np.array(lengths),
        axes=np.array(axes), directions=np.array(dirs), origins=np.array(origins),
        limits=np.array(limits), end_effectors=ees, chains=chains, planar=planar,
        velocity_limit=float(d.get("velocity_limit", 0.1)),
    )


def _root_path(parents, joint) -> tuple:
    path = []
    while joint != -1:
        if joint in path or not -1 <= joint < len(parents):
            raise TreeError(f"joint {joint}: parent links do not lead back to a root")
        path.append(int(joint))
        joint = parents[joint]
    return tuple(reversed(path))


def _angle(x) -> float:
    """Numbers, or strings like ``"pi"``, ``"-pi/2"``."""
    if isinstance(x, str):
        s = x.replace(" ", "").lower()
        sign = -1.0 if s.startswith("-") else 1.0
        s = s.lstrip("+-")
        num, _, den = s.partition("/")
        base = np.pi if num.endswith("pi") else None
        if base is None:
            raise TreeError(f"cannot parse angle {x!r}")
        factor = float(num[:-2]) if num[:-2] else 1.0
        return sign * factor * base / (float(den) if den else 1.0)
    return float(x)


def load_tree(name_or_path) -> KinematicTree:
    """Load a built-in tree by name or a YAML tree file by path."""
    if str(name_or_path) in BUILTIN_TREES:
        text = resources.files("digrad.envs").joinpath("trees", f"{name_or_path}.yaml").read_text()
    else:
        path = Path(name_or_path)
        if not path.exists():
            raise FileNotFoundError(f"no built-in tree or file named {name_or_path!r}")
        text = path.read_text()
    return tree_from_dict(yaml.safe_load(text))
