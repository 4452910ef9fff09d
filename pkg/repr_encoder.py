"""Renderização das representações intermediárias 2.5D e funções de perda.

Layout normativo dos canais (4J-2): heatmaps H_J por junta, PAFs C
intercalados (x, y) por parte, mapa de profundidade da raiz H_RZ e mapas de
profundidade relativa H_dZ por parte.

Todos os comprimentos de `EncoderConfig` estão em pixels do mapa; com
`map_stride = 1` coincidem com pixels da imagem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from camera_model import CameraIntrinsics, NormalizedDepth, Point2D, normalize_depth, project_points
from errors import DomainError, ShapeMismatchError, SkeletonError
from skeleton import AbsolutePose3D, SkeletonSpec
from utils import lookup_nearest, require_positive


@dataclass(frozen=True)
class EncoderConfig:
    sigma: float = 4.0
    paf_width: float = 4.0
    root_disk_radius: float = 2.0
    map_stride: float = 1.0
    gaussian_truncate: float = 4.0

    def __post_init__(self) -> None:
        for name in ("sigma", "paf_width", "root_disk_radius", "map_stride", "gaussian_truncate"):
            require_positive(name, getattr(self, name))

    def map_shape(self, cam: CameraIntrinsics) -> tuple[int, int]:
        return int(round(cam.height / self.map_stride)), int(round(cam.width / self.map_stride))


@dataclass(frozen=True, eq=False)
class Scene:
    people: tuple[AbsolutePose3D, ...]
    cam: CameraIntrinsics

    def __post_init__(self) -> None:
        object.__setattr__(self, "people", tuple(self.people))
        for index, pose in enumerate(self.people):
            z = pose.joints[pose.visible, 2]
            if np.any(~(z > 0)):
                raise DomainError(f"pessoa {index}: junta visível com Z <= 0")


@dataclass(frozen=True, eq=False)
class RepresentationStack:
    heatmaps: np.ndarray
    pafs: np.ndarray
    root_depth: np.ndarray
    rel_depth: np.ndarray

    def __post_init__(self) -> None:
        shape = self.root_depth.shape
        num_joints = self.heatmaps.shape[0]
        if self.root_depth.ndim != 2:
            raise ShapeMismatchError("root_depth deve ser 2D")
        if self.heatmaps.shape[1:] != shape or self.pafs.shape[1:] != shape or self.rel_depth.shape[1:] != shape:
            raise ShapeMismatchError("todos os canais devem ter a mesma resolução")
        if self.pafs.shape[0] != 2 * (num_joints - 1) or self.rel_depth.shape[0] != num_joints - 1:
            raise ShapeMismatchError("número de canais incompatível com J")

    @property
    def shape(self) -> tuple[int, int]:
        return self.root_depth.shape

    @property
    def num_channels(self) -> int:
        return self.heatmaps.shape[0] + self.pafs.shape[0] + 1 + self.rel_depth.shape[0]

    def part_field(self, part: int) -> np.ndarray:
        return self.pafs[2 * part: 2 * part + 2]

    def to_tensor(self) -> np.ndarray:
        return np.concatenate(
            [self.heatmaps, self.pafs, self.root_depth[None], self.rel_depth], axis=0
        ).astype(np.float32)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, spec: SkeletonSpec) -> "RepresentationStack":
        if tensor.ndim != 3 or tensor.shape[0] != spec.num_channels:
            raise ShapeMismatchError(
                f"tensor {tensor.shape} incompatível com {spec.num_channels} canais de {spec.name}"
            )
        j, p = spec.num_joints, spec.num_parts
        tensor = np.asarray(tensor, dtype=np.float32)
        return cls(
            heatmaps=tensor[:j],
            pafs=tensor[j: j + 2 * p],
            root_depth=tensor[j + 2 * p],
            rel_depth=tensor[j + 2 * p + 1:],
        )

    @classmethod
    def zeros(cls, spec: SkeletonSpec, shape: tuple[int, int]) -> "RepresentationStack":
        h, w = shape
        return cls(
            heatmaps=np.zeros((spec.num_joints, h, w), np.float32),
            pafs=np.zeros((2 * spec.num_parts, h, w), np.float32),
            root_depth=np.zeros((h, w), np.float32),
            rel_depth=np.zeros((spec.num_parts, h, w), np.float32),
        )


class Band(NamedTuple):
    rows: slice
    cols: slice
    mask: np.ndarray


def _window(lo_x: float, hi_x: float, lo_y: float, hi_y: float, shape: tuple[int, int]):
    h, w = shape
    x0, x1 = max(math.floor(lo_x), 0), min(math.ceil(hi_x), w - 1)
    y0, y1 = max(math.floor(lo_y), 0), min(math.ceil(hi_y), h - 1)
    if x0 > x1 or y0 > y1:
        return None
    return y0, y1, x0, x1


def segment_band_mask(a: np.ndarray, b: np.ndarray, width: float, shape: tuple[int, int]) -> Band | None:
    """Pixels a no máximo `width` do segmento a-b (cápsula), recortados ao mapa."""
    win = _window(
        min(a[0], b[0]) - width, max(a[0], b[0]) + width, min(a[1], b[1]) - width, max(a[1], b[1]) + width, shape
    )
    if win is None:
        return None
    y0, y1, x0, x1 = win
    xs = np.arange(x0, x1 + 1, dtype=np.float64)[None, :]
    ys = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
    d = b - a
    length_sq = float(d @ d)
    if length_sq > 0:
        t = np.clip(((xs - a[0]) * d[0] + (ys - a[1]) * d[1]) / length_sq, 0.0, 1.0)
    else:
        t = np.zeros((ys.shape[0], xs.shape[1]))
    dx = xs - (a[0] + t * d[0])
    dy = ys - (a[1] + t * d[1])
    mask = dx * dx + dy * dy <= width * width
    return Band(slice(y0, y1 + 1), slice(x0, x1 + 1), mask)


def _disk_mask(center: np.ndarray, radius: float, shape: tuple[int, int]) -> Band | None:
    return segment_band_mask(center, center, radius, shape)


def _check_scene(scene: Scene, spec: SkeletonSpec) -> None:
    for index, pose in enumerate(scene.people):
        if pose.num_joints != spec.num_joints:
            raise SkeletonError(f"pessoa {index} tem {pose.num_joints} juntas, esperado {spec.num_joints}")


def person_map_points(pose: AbsolutePose3D, cam: CameraIntrinsics, cfg: EncoderConfig) -> np.ndarray:
    """Projeções (J, 2) em coordenadas do mapa; NaN para juntas não renderizáveis."""
    uv = project_points(pose.joints, cam) / cfg.map_stride
    uv[~pose.visible] = np.nan
    return uv


def splat_gaussian(channel: np.ndarray, x: float, y: float, cfg: EncoderConfig) -> None:
    """Combina, pelo máximo, uma gaussiana truncada centrada em (x, y) no canal."""
    radius = cfg.gaussian_truncate * cfg.sigma
    win = _window(x - radius, x + radius, y - radius, y + radius, channel.shape)
    if win is None:
        return
    y0, y1, x0, x1 = win
    xs = np.arange(x0, x1 + 1, dtype=np.float64)[None, :]
    ys = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
    d2 = (xs - x) ** 2 + (ys - y) ** 2
    gauss = np.exp(-d2 / (2.0 * cfg.sigma ** 2))
    gauss[d2 > radius * radius] = 0.0
    view = channel[y0: y1 + 1, x0: x1 + 1]
    np.maximum(view, gauss.astype(np.float32), out=view)


def render_heatmaps(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> np.ndarray:
    """Gaussianas por junta, combinadas pelo máximo por pixel."""
    _check_scene(scene, spec)
    shape = cfg.map_shape(scene.cam)
    maps = np.zeros((spec.num_joints, *shape), np.float32)
    for pose in scene.people:
        points = person_map_points(pose, scene.cam, cfg)
        for joint, (x, y) in enumerate(points):
            if np.isfinite(x) and np.isfinite(y):
                splat_gaussian(maps[joint], float(x), float(y), cfg)
    return maps


def render_pafs(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> np.ndarray:
    """Vetor unitário ao longo de cada parte; sobreposições guardam a média (sem renormalizar)."""
    _check_scene(scene, spec)
    shape = cfg.map_shape(scene.cam)
    out = np.zeros((2 * spec.num_parts, *shape), np.float32)
    points = [person_map_points(pose, scene.cam, cfg) for pose in scene.people]
    for part, (par, child) in enumerate(spec.parts):
        acc = np.zeros((2, *shape))
        count = np.zeros(shape, np.int32)
        for pts in points:
            a, b = pts[par], pts[child]
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                continue
            length = float(np.hypot(*(b - a)))
            if length < 1e-9:
                continue
            band = segment_band_mask(a, b, cfg.paf_width, shape)
            if band is None:
                continue
            unit = (b - a) / length
            acc[0, band.rows, band.cols][band.mask] += unit[0]
            acc[1, band.rows, band.cols][band.mask] += unit[1]
            count[band.rows, band.cols][band.mask] += 1
        covered = count > 0
        out[2 * part][covered] = acc[0][covered] / count[covered]
        out[2 * part + 1][covered] = acc[1][covered] / count[covered]
    return out


def render_root_depth_map(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> np.ndarray:
    """Disco com Z~ da raiz; em sobreposição vence a pessoa mais próxima."""
    _check_scene(scene, spec)
    shape = cfg.map_shape(scene.cam)
    zbuf = np.full(shape, np.inf)
    for pose in scene.people:
        if not pose.visible[spec.root_index]:
            continue
        center = person_map_points(pose, scene.cam, cfg)[spec.root_index]
        disk = _disk_mask(center, cfg.root_disk_radius, shape)
        if disk is None:
            continue
        zt = normalize_depth(float(pose.joints[spec.root_index, 2]), scene.cam)
        view = zbuf[disk.rows, disk.cols]
        view[disk.mask] = np.minimum(view[disk.mask], zt)
    return np.where(np.isfinite(zbuf), zbuf, 0.0).astype(np.float32)


def render_relative_depth_maps(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> np.ndarray:
    """Z_filho - Z_pai (mm) na faixa de cada parte; vence o pai mais próximo."""
    _check_scene(scene, spec)
    shape = cfg.map_shape(scene.cam)
    out = np.zeros((spec.num_parts, *shape), np.float32)
    points = [person_map_points(pose, scene.cam, cfg) for pose in scene.people]
    for part, (par, child) in enumerate(spec.parts):
        parent_z = np.full(shape, np.inf)
        for pose, pts in zip(scene.people, points):
            a, b = pts[par], pts[child]
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                continue
            band = segment_band_mask(a, b, cfg.paf_width, shape)
            if band is None:
                continue
            z_parent = float(pose.joints[par, 2])
            delta = float(pose.joints[child, 2]) - z_parent
            zview = parent_z[band.rows, band.cols]
            wins = band.mask & (z_parent < zview)
            zview[wins] = z_parent
            out[part, band.rows, band.cols][wins] = delta
    return out


def encode(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> RepresentationStack:
    return RepresentationStack(
        heatmaps=render_heatmaps(scene, spec, cfg),
        pafs=render_pafs(scene, spec, cfg),
        root_depth=render_root_depth_map(scene, spec, cfg),
        rel_depth=render_relative_depth_maps(scene, spec, cfg),
    )


def root_targets(scene: Scene, spec: SkeletonSpec, cfg: EncoderConfig) -> list[tuple[Point2D, NormalizedDepth]]:
    """Raízes verdadeiras (coordenadas do mapa, Z~*) para `compute_losses`."""
    targets = []
    for pose in scene.people:
        if not pose.visible[spec.root_index]:
            continue
        x, y = person_map_points(pose, scene.cam, cfg)[spec.root_index]
        zt = normalize_depth(float(pose.joints[spec.root_index, 2]), scene.cam)
        targets.append((Point2D(float(x), float(y)), zt))
    return targets


@dataclass(frozen=True)
class LossWeights:
    w_2d: float = 0.1
    w_dz: float = 5.0
    w_rz: float = 10.0


@dataclass(frozen=True)
class LossReport:
    l_2d: float
    l_dz: float
    l_rz: float
    total: float


def _sq_error(pred: np.ndarray, gt: np.ndarray) -> float:
    diff = pred.astype(np.float64) - gt.astype(np.float64)
    return float(np.sum(diff * diff))


def compute_losses(
    pred: RepresentationStack,
    gt: RepresentationStack,
    gt_roots: Sequence[tuple[Point2D, float]],
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """L2 sobre heatmaps/PAFs e profundidade relativa; L1 da raiz nas raízes verdadeiras."""
    for name in ("heatmaps", "pafs", "root_depth", "rel_depth"):
        if getattr(pred, name).shape != getattr(gt, name).shape:
            raise ShapeMismatchError(f"{name}: {getattr(pred, name).shape} != {getattr(gt, name).shape}")
    l_2d = _sq_error(pred.heatmaps, gt.heatmaps) + _sq_error(pred.pafs, gt.pafs)
    l_dz = _sq_error(pred.rel_depth, gt.rel_depth)
    l_rz = 0.0
    if gt_roots:
        points = np.array([[p[0], p[1]] for p, _ in gt_roots], dtype=np.float64)
        read = lookup_nearest(pred.root_depth.astype(np.float64), points)
        target = np.array([float(z) for _, z in gt_roots])
        l_rz = float(np.sum(np.abs(read - target)))
    total = weights.w_2d * l_2d + weights.w_dz * l_dz + weights.w_rz * l_rz
    return LossReport(l_2d=l_2d, l_dz=l_dz, l_rz=l_rz, total=total)
