"""Leitura e escrita do documento JSON de cena (GT e predições)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from camera_model import CameraIntrinsics
from errors import DomainError, SceneSchemaError, SkeletonError
from repr_encoder import Scene
from skeleton import AbsolutePose3D, SkeletonSpec, default_skeleton, half_body_skeleton
from utils import canonical_json

SCENE_FORMAT = "smap-scene"
SCENE_VERSION = 1
UNITS = {"length": "mm", "image": "px"}

KNOWN_SKELETONS = {spec.name: spec for spec in (default_skeleton(), half_body_skeleton())}


@dataclass(frozen=True, eq=False)
class SceneDocument:
    scene: Scene
    spec: SkeletonSpec
    provenance: dict[str, Any] = field(default_factory=dict)


def _coord(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def scene_to_dict(scene: Scene, spec: SkeletonSpec, provenance: dict[str, Any] | None = None) -> dict[str, Any]:
    people = []
    for pose in scene.people:
        joints = []
        for index, name in enumerate(spec.joint_names):
            x, y, z = pose.joints[index]
            joints.append(
                {"name": name, "X": _coord(x), "Y": _coord(y), "Z": _coord(z), "visible": bool(pose.visible[index])}
            )
        people.append({"joints": joints})
    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "units": dict(UNITS),
        "camera": scene.cam.to_dict(),
        "skeleton": spec.to_dict(),
        "people": people,
        "provenance": provenance or {},
    }


def _require(mapping: Any, key: str, path: str) -> Any:
    if not isinstance(mapping, dict):
        raise SceneSchemaError("objeto esperado", path)
    if key not in mapping:
        raise SceneSchemaError("campo obrigatório ausente", f"{path}.{key}")
    return mapping[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SceneSchemaError("número esperado", path)
    return float(value)


def _parse_skeleton(data: Any) -> SkeletonSpec:
    if isinstance(data, str):
        data = {"name": data}
    name = _require(data, "name", "$.skeleton")
    if "joints" not in data:
        if name not in KNOWN_SKELETONS:
            raise SceneSchemaError(f"esqueleto desconhecido {name!r}", "$.skeleton.name")
        return KNOWN_SKELETONS[name]
    try:
        return SkeletonSpec.from_dict(data)
    except (SkeletonError, KeyError, ValueError, TypeError) as exc:
        raise SceneSchemaError(str(exc), "$.skeleton") from None


def _parse_camera(data: Any) -> CameraIntrinsics:
    values = {key: _number(_require(data, key, "$.camera"), f"$.camera.{key}") for key in ("f", "cx", "cy", "w", "h")}
    try:
        return CameraIntrinsics.from_dict(values)
    except DomainError as exc:
        raise SceneSchemaError(str(exc), "$.camera") from None


def _parse_person(data: Any, spec: SkeletonSpec, path: str) -> AbsolutePose3D:
    joints_data = _require(data, "joints", path)
    if not isinstance(joints_data, list) or len(joints_data) != spec.num_joints:
        raise SceneSchemaError(f"esperadas {spec.num_joints} juntas", f"{path}.joints")
    joints = np.zeros((spec.num_joints, 3))
    visible = np.zeros(spec.num_joints, dtype=bool)
    for index, entry in enumerate(joints_data):
        jpath = f"{path}.joints[{index}]"
        name = _require(entry, "name", jpath)
        if name != spec.joint_names[index]:
            raise SceneSchemaError(f"esperado {spec.joint_names[index]!r}, recebido {name!r}", f"{jpath}.name")
        flag = _require(entry, "visible", jpath)
        if not isinstance(flag, bool):
            raise SceneSchemaError("booleano esperado", f"{jpath}.visible")
        for axis, key in enumerate(("X", "Y", "Z")):
            raw = _require(entry, key, jpath)
            if raw is None:
                if flag:
                    raise SceneSchemaError("junta visível sem coordenada", f"{jpath}.{key}")
                continue
            value = _number(raw, f"{jpath}.{key}")
            if flag and not math.isfinite(value):
                raise SceneSchemaError("coordenada não finita", f"{jpath}.{key}")
            joints[index, axis] = value
        if flag and not joints[index, 2] > 0:
            raise SceneSchemaError("junta visível com Z <= 0", f"{jpath}.Z")
        visible[index] = flag
    return AbsolutePose3D(joints, visible)


def scene_from_dict(data: Any) -> SceneDocument:
    """Valida o documento; erros nomeiam o caminho JSON do problema."""
    if _require(data, "format", "$") != SCENE_FORMAT:
        raise SceneSchemaError(f"formato deve ser {SCENE_FORMAT!r}", "$.format")
    if _require(data, "version", "$") != SCENE_VERSION:
        raise SceneSchemaError("versão não suportada", "$.version")
    units = _require(data, "units", "$")
    if units != UNITS:
        raise SceneSchemaError(f"unidades devem ser {UNITS}", "$.units")
    cam = _parse_camera(_require(data, "camera", "$"))
    spec = _parse_skeleton(_require(data, "skeleton", "$"))
    people_data = _require(data, "people", "$")
    if not isinstance(people_data, list):
        raise SceneSchemaError("lista esperada", "$.people")
    people = tuple(_parse_person(p, spec, f"$.people[{i}]") for i, p in enumerate(people_data))
    provenance = data.get("provenance", {})
    if not isinstance(provenance, dict):
        raise SceneSchemaError("objeto esperado", "$.provenance")
    return SceneDocument(scene=Scene(people=people, cam=cam), spec=spec, provenance=provenance)


def write_scene(path: Path, scene: Scene, spec: SkeletonSpec, provenance: dict[str, Any] | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(scene_to_dict(scene, spec, provenance)), encoding="utf-8")


def read_scene(path: Path) -> SceneDocument:
    return scene_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_camera(path: Path) -> CameraIntrinsics:
    """Câmera de um JSON próprio ({f, cx, cy, w, h}) ou do campo `camera` de uma cena."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "camera" in data:
        data = data["camera"]
    return _parse_camera(data)
