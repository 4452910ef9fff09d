"""Modelo de câmera pinhole, normalização de profundidade por FoV e projeções.

Convenções: comprimentos em milímetros, coordenadas de imagem em pixels
contínuos, centros de pixel em coordenadas inteiras.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, NewType

import numpy as np

from errors import DomainError
from utils import require_positive

NormalizedDepth = NewType("NormalizedDepth", float)


class Point2D(NamedTuple):
    u: float
    v: float


class Point3D(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class CameraIntrinsics:
    """Intrínsecos sem skew e com pixel quadrado (um único f)."""

    f: float
    cx: float
    cy: float
    width: float
    height: float

    def __post_init__(self) -> None:
        require_positive("f", self.f, DomainError)
        require_positive("width", self.width, DomainError)
        require_positive("height", self.height, DomainError)
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise DomainError("ponto principal deve ser finito")

    @classmethod
    def default(cls, width: float, height: float) -> "CameraIntrinsics":
        """Intrínsecos para imagens sem calibração: f = largura, centro da imagem."""
        return cls(f=float(width), cx=width / 2.0, cy=height / 2.0, width=float(width), height=float(height))

    def fov_ratio(self) -> float:
        """w / f; invariante a redimensionamento uniforme da imagem."""
        return self.width / self.f

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Mesma câmera após redimensionar a imagem por `factor`."""
        require_positive("factor", factor, DomainError)
        return CameraIntrinsics(
            f=self.f * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=self.width * factor,
            height=self.height * factor,
        )

    def to_dict(self) -> dict[str, float]:
        return {"f": self.f, "cx": self.cx, "cy": self.cy, "w": self.width, "h": self.height}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        return cls(
            f=float(data["f"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=float(data["w"]),
            height=float(data["h"]),
        )


def _check_depth(z: float) -> None:
    if not math.isfinite(z) or z <= 0:
        raise DomainError(f"profundidade deve ser positiva, recebido {z!r}")


def normalize_depth(z: float, cam: CameraIntrinsics) -> NormalizedDepth:
    """Z~ = Z * w / f."""
    _check_depth(z)
    return NormalizedDepth(z * cam.fov_ratio())


def denormalize_depth(zt: float, cam: CameraIntrinsics) -> float:
    """Inverso exato de `normalize_depth` para os mesmos intrínsecos."""
    _check_depth(zt)
    return zt / cam.fov_ratio()


def back_project(p: Point2D, z: float, cam: CameraIntrinsics) -> Point3D:
    """[X, Y, Z] = Z * K^-1 * [u, v, 1]."""
    _check_depth(z)
    return Point3D(z * (p.u - cam.cx) / cam.f, z * (p.v - cam.cy) / cam.f, z)


def project(q: Point3D, cam: CameraIntrinsics) -> Point2D:
    _check_depth(q.z)
    return Point2D(cam.f * q.x / q.z + cam.cx, cam.f * q.y / q.z + cam.cy)


def project_points(points: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Versão vetorizada de `project`: (N, 3) -> (N, 2).

    Pontos com Z <= 0 resultam em NaN em vez de erro.
    """
    points = np.asarray(points, dtype=np.float64)
    z = points[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.f * points[:, 0] / z + cam.cx
        v = cam.f * points[:, 1] / z + cam.cy
    uv = np.stack([u, v], axis=1)
    uv[~(z > 0)] = np.nan
    return uv


def back_project_points(uv: np.ndarray, z: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Versão vetorizada de `back_project`: (N, 2), (N,) -> (N, 3)."""
    uv = np.asarray(uv, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise DomainError("todas as profundidades devem ser positivas")
    x = z * (uv[:, 0] - cam.cx) / cam.f
    y = z * (uv[:, 1] - cam.cy) / cam.f
    return np.stack([x, y, z], axis=1)
