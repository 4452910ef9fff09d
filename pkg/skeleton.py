"""Árvore de juntas, partes direcionadas e estatísticas de comprimento de osso."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from errors import SkeletonError

ROOT_PARENT = -1

DEFAULT_JOINTS = (
    "pelvis",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
)
DEFAULT_PARENTS = (-1, 0, 1, 1, 3, 4, 1, 6, 7, 0, 9, 10, 0, 12, 13)

DEFAULT_BONE_STATS_FILE = Path(__file__).resolve().parent / "config" / "bone_stats_default.json"


def _bfs_parts(parent: Sequence[int], root_index: int) -> tuple[tuple[int, int], ...]:
    children: dict[int, list[int]] = {i: [] for i in range(len(parent))}
    for child, par in enumerate(parent):
        if par != ROOT_PARENT:
            children[par].append(child)
    parts: list[tuple[int, int]] = []
    queue = deque([root_index])
    while queue:
        node = queue.popleft()
        for child in sorted(children[node]):
            parts.append((node, child))
            queue.append(child)
    return tuple(parts)


@dataclass(frozen=True)
class SkeletonSpec:
    """Esqueleto com J juntas e J-1 partes em ordem de largura a partir da raiz."""

    name: str
    joint_names: tuple[str, ...]
    parent: tuple[int, ...]
    root_index: int
    parts: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        count = len(self.joint_names)
        if count < 1:
            raise SkeletonError("esqueleto sem juntas")
        if len(set(self.joint_names)) != count:
            raise SkeletonError("nomes de juntas repetidos")
        if len(self.parent) != count:
            raise SkeletonError("parent deve ter uma entrada por junta")
        if not 0 <= self.root_index < count or self.parent[self.root_index] != ROOT_PARENT:
            raise SkeletonError("raiz inválida")
        for joint, par in enumerate(self.parent):
            if joint == self.root_index:
                continue
            if not 0 <= par < count or par == joint:
                raise SkeletonError(f"pai inválido para {self.joint_names[joint]}")

        tree_parts = _bfs_parts(self.parent, self.root_index)
        if len(tree_parts) != count - 1:
            raise SkeletonError("parent não forma uma árvore única (ciclo ou junta inalcançável)")
        if not self.parts:
            object.__setattr__(self, "parts", tree_parts)
        else:
            parts = tuple((int(a), int(b)) for a, b in self.parts)
            if len(parts) != count - 1 or set(parts) != set(tree_parts):
                raise SkeletonError("parts deve enumerar exatamente as arestas da árvore")
            seen = {self.root_index}
            for par, child in parts:
                if par not in seen:
                    raise SkeletonError("parts deve seguir a ordem pai -> filho a partir da raiz")
                seen.add(child)
            object.__setattr__(self, "parts", parts)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_parts(self) -> int:
        return len(self.parts)

    @property
    def num_channels(self) -> int:
        """J heatmaps + 2(J-1) PAFs + 1 raiz + (J-1) profundidade relativa."""
        return self.num_joints + 2 * self.num_parts + 1 + self.num_parts

    @property
    def root_name(self) -> str:
        return self.joint_names[self.root_index]

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise SkeletonError(f"junta desconhecida: {name}") from None

    def part_index(self, child: int) -> int:
        """Índice da parte cujo filho é `child`."""
        for index, (_, ch) in enumerate(self.parts):
            if ch == child:
                return index
        raise SkeletonError(f"junta {child} não é filha de nenhuma parte")

    def part_name(self, index: int) -> str:
        par, child = self.parts[index]
        return f"{self.joint_names[par]}->{self.joint_names[child]}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": list(self.joint_names),
            "parent": list(self.parent),
            "root": self.root_name,
            "parts": [list(p) for p in self.parts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkeletonSpec":
        joints = tuple(str(j) for j in data["joints"])
        root = data["root"]
        root_index = joints.index(root) if isinstance(root, str) else int(root)
        return cls(
            name=str(data.get("name", "custom")),
            joint_names=joints,
            parent=tuple(int(p) for p in data["parent"]),
            root_index=root_index,
            parts=tuple(tuple(p) for p in data.get("parts", ())),
        )


@dataclass(frozen=True)
class BoneStats:
    """Comprimento 3D médio (mm) por parte, na ordem de `SkeletonSpec.parts`."""

    mean_length: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not (v > 0) for v in self.mean_length):
            raise SkeletonError("todo comprimento médio de osso deve ser positivo")

    def to_dict(self, spec: SkeletonSpec) -> dict:
        return {
            "skeleton": spec.name,
            "units": "mm",
            "mean_length": {spec.part_name(i): v for i, v in enumerate(self.mean_length)},
        }

    @classmethod
    def from_dict(cls, data: dict, spec: SkeletonSpec) -> "BoneStats":
        lengths = data["mean_length"]
        if isinstance(lengths, dict):
            missing = [spec.part_name(i) for i in range(spec.num_parts) if spec.part_name(i) not in lengths]
            if missing:
                raise SkeletonError(f"partes sem comprimento: {', '.join(missing)}")
            return cls(tuple(float(lengths[spec.part_name(i)]) for i in range(spec.num_parts)))
        if len(lengths) != spec.num_parts:
            raise SkeletonError("mean_length deve ter uma entrada por parte")
        return cls(tuple(float(v) for v in lengths))


@dataclass(frozen=True, eq=False)
class AbsolutePose3D:
    """Juntas 3D em coordenadas de câmera (mm) com flag de visibilidade."""

    joints: np.ndarray
    visible: np.ndarray

    def __post_init__(self) -> None:
        joints = np.asarray(self.joints, dtype=np.float64).reshape(-1, 3)
        visible = np.asarray(self.visible, dtype=bool).reshape(-1)
        if joints.shape[0] != visible.shape[0]:
            raise SkeletonError("joints e visible com tamanhos diferentes")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "visible", visible)

    @property
    def num_joints(self) -> int:
        return self.joints.shape[0]

    def root(self, spec: SkeletonSpec) -> np.ndarray:
        return self.joints[spec.root_index]


def default_skeleton() -> SkeletonSpec:
    """Esqueleto de 15 juntas (convenção CMU Panoptic), raiz na pelve."""
    return SkeletonSpec(name="default-15", joint_names=DEFAULT_JOINTS, parent=DEFAULT_PARENTS, root_index=0)


def half_body_skeleton() -> SkeletonSpec:
    """Meio corpo superior com raiz no pescoço."""
    return SkeletonSpec(
        name="half-body-8",
        joint_names=("neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"),
        parent=(-1, 0, 0, 2, 3, 0, 5, 6),
        root_index=0,
    )


@lru_cache(maxsize=1)
def _default_lengths() -> dict:
    return json.loads(DEFAULT_BONE_STATS_FILE.read_text(encoding="utf-8"))


def default_bone_stats(spec: SkeletonSpec | None = None) -> BoneStats:
    """Médias antropométricas de `config/bone_stats_default.json`, buscadas pelo nome da parte."""
    return BoneStats.from_dict(_default_lengths(), spec or default_skeleton())


def bone_lengths(pose: AbsolutePose3D, spec: SkeletonSpec) -> np.ndarray:
    """Comprimento 3D de cada parte; NaN onde alguma extremidade não é visível."""
    parents = np.array([p for p, _ in spec.parts], dtype=np.int64)
    children = np.array([c for _, c in spec.parts], dtype=np.int64)
    lengths = np.linalg.norm(pose.joints[children] - pose.joints[parents], axis=1)
    both = pose.visible[parents] & pose.visible[children]
    return np.where(both, lengths, np.nan)


def mean_bone_lengths(poses: Iterable[AbsolutePose3D], spec: SkeletonSpec) -> BoneStats:
    """Média aritmética por parte sobre as poses com as duas extremidades visíveis."""
    totals = np.zeros(spec.num_parts)
    counts = np.zeros(spec.num_parts, dtype=np.int64)
    for pose in poses:
        lengths = bone_lengths(pose, spec)
        valid = ~np.isnan(lengths)
        totals[valid] += lengths[valid]
        counts[valid] += 1
    empty = [spec.part_name(i) for i in np.flatnonzero(counts == 0)]
    if empty:
        raise SkeletonError(f"partes sem amostras visíveis: {', '.join(empty)}")
    return BoneStats(tuple(float(v) for v in totals / counts))


@dataclass(frozen=True)
class BoneViolation:
    part: int
    name: str
    length: float
    expected: float
    deviation: float


def validate_pose(pose: AbsolutePose3D, spec: SkeletonSpec, stats: BoneStats, tol: float) -> list[BoneViolation]:
    """Partes cujo comprimento desvia da média em mais de `tol` (fração)."""
    violations: list[BoneViolation] = []
    for index, length in enumerate(bone_lengths(pose, spec)):
        if np.isnan(length):
            continue
        expected = stats.mean_length[index]
        deviation = abs(length - expected) / expected
        if deviation > tol:
            violations.append(BoneViolation(index, spec.part_name(index), float(length), expected, float(deviation)))
    return violations
