"""Geração determinística de cenas sintéticas e do corpus de oclusão.

As cenas substituem os conjuntos de dados reais: poses eretas de frente para
a câmera, com variação de membros, rotação de corpo e comprimento de osso,
posicionadas por amostragem com rejeição.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.spatial.transform import Rotation

from camera_model import CameraIntrinsics, Point2D, back_project, project_points
from errors import ConfigError
from logger import get_logger
from repr_encoder import EncoderConfig, RepresentationStack, Scene, encode, render_heatmaps, segment_band_mask, splat_gaussian
from skeleton import AbsolutePose3D, BoneStats, SkeletonSpec
from utils import DEFAULT_IMAGE_HEIGHT, DEFAULT_IMAGE_WIDTH, require_positive, spawn_seeds

LOGGER = get_logger("scene_synth")

# Direção de cada osso (pai -> filha) na pose de referência; x à esquerda da pessoa, y para baixo.
TEMPLATE_DIRECTIONS = {
    "neck": (0.0, -1.0, 0.0),
    "head": (0.0, -1.0, 0.0),
    "l_shoulder": (1.0, 0.0, 0.0),
    "r_shoulder": (-1.0, 0.0, 0.0),
    "l_elbow": (0.3, 1.0, 0.0),
    "r_elbow": (-0.3, 1.0, 0.0),
    "l_wrist": (0.15, 1.0, -0.2),
    "r_wrist": (-0.15, 1.0, -0.2),
    "l_hip": (1.0, 0.0, 0.0),
    "r_hip": (-1.0, 0.0, 0.0),
    "l_knee": (0.05, 1.0, 0.0),
    "r_knee": (-0.05, 1.0, 0.0),
    "l_ankle": (0.0, 1.0, 0.1),
    "r_ankle": (0.0, 1.0, 0.1),
}
_FALLBACK_DIRECTION = (0.0, 1.0, 0.0)

# Distância (px) entre raízes de um par sobreposto: discos de raio 2 se cruzam
# e os dois picos sobrevivem ao NMS de raio 2.
OVERLAP_ROOT_DISTANCE = (3.6, 3.9)

OcclusionFamily = Literal["prioridade_frontal", "ligacao_espuria", "disjunto"]
OCCLUSION_FAMILIES: tuple[OcclusionFamily, ...] = ("prioridade_frontal", "ligacao_espuria", "disjunto")

# Atenuação da PAF da pessoa da frente no cenário de prioridade.
FRONT_PAF_ATTENUATION = 0.4
SPURIOUS_SHIN_FACTOR = 2.5


@dataclass(frozen=True)
class SynthConfig:
    min_people: int = 1
    max_people: int = 5
    min_depth: float = 2000.0
    max_depth: float = 6000.0
    overlap_prob: float = 0.0
    truncation_prob: float = 0.0
    bone_jitter: float = 0.05
    limb_jitter_deg: float = 15.0
    yaw_deg: float = 30.0
    min_separation_px: float = 20.0
    margin_px: float = 4.0
    max_attempts: int = 200
    width: float = float(DEFAULT_IMAGE_WIDTH)
    height: float = float(DEFAULT_IMAGE_HEIGHT)
    focal: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_people < 0 or self.max_people < self.min_people:
            raise ConfigError("intervalo de pessoas vazio")
        require_positive("min_depth", self.min_depth)
        if self.max_depth < self.min_depth:
            raise ConfigError("intervalo de profundidade vazio")
        for name in ("overlap_prob", "truncation_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} deve estar em [0, 1]")
        if self.overlap_prob > 0 and self.max_people < 2:
            raise ConfigError("sobreposição exige ao menos duas pessoas")
        if not 0.0 <= self.bone_jitter < 1.0:
            raise ConfigError("bone_jitter deve estar em [0, 1)")
        if self.limb_jitter_deg < 0 or self.yaw_deg < 0 or self.min_separation_px < 0 or self.margin_px < 0:
            raise ConfigError("amplitudes e margens não podem ser negativas")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts deve ser >= 1")
        require_positive("width", self.width)
        require_positive("height", self.height)
        if self.focal is not None:
            require_positive("focal", self.focal)

    def camera(self) -> CameraIntrinsics:
        if self.focal is None:
            return CameraIntrinsics.default(self.width, self.height)
        return CameraIntrinsics(self.focal, self.width / 2.0, self.height / 2.0, self.width, self.height)


def sample_pose(rng: np.random.Generator, spec: SkeletonSpec, stats: BoneStats, cfg: SynthConfig) -> np.ndarray:
    """Pose (J, 3) relativa à raiz, em mm."""
    relative = np.zeros((spec.num_joints, 3))
    for part, (par, child) in enumerate(spec.parts):
        direction = np.array(TEMPLATE_DIRECTIONS.get(spec.joint_names[child], _FALLBACK_DIRECTION))
        direction /= np.linalg.norm(direction)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = math.radians(rng.uniform(-cfg.limb_jitter_deg, cfg.limb_jitter_deg))
        direction = Rotation.from_rotvec(axis * angle).apply(direction)
        length = stats.mean_length[part] * (1.0 + rng.uniform(-cfg.bone_jitter, cfg.bone_jitter))
        relative[child] = relative[par] + length * direction
    yaw = Rotation.from_euler("y", rng.uniform(-cfg.yaw_deg, cfg.yaw_deg), degrees=True)
    return yaw.apply(relative)


def _inside(uv: np.ndarray, cam: CameraIntrinsics, margin: float) -> np.ndarray:
    return (
        np.isfinite(uv).all(axis=1)
        & (uv[:, 0] >= margin)
        & (uv[:, 0] <= cam.width - 1 - margin)
        & (uv[:, 1] >= margin)
        & (uv[:, 1] <= cam.height - 1 - margin)
    )


def separated(uv_a: np.ndarray, uv_b: np.ndarray, gap: float) -> bool:
    """Caixas 2D das projeções afastadas por pelo menos `gap` px em x ou y."""
    gap_x = max(uv_a[:, 0].min() - uv_b[:, 0].max(), uv_b[:, 0].min() - uv_a[:, 0].max())
    gap_y = max(uv_a[:, 1].min() - uv_b[:, 1].max(), uv_b[:, 1].min() - uv_a[:, 1].max())
    return max(gap_x, gap_y) >= gap


def place_pose(relative: np.ndarray, root_px: Point2D, depth: float, cam: CameraIntrinsics, spec: SkeletonSpec) -> np.ndarray:
    root = np.array(back_project(root_px, depth, cam))
    return relative - relative[spec.root_index] + root


def synth_scene(cfg: SynthConfig, spec: SkeletonSpec, stats: BoneStats) -> Scene:
    """Cena determinada por `cfg.seed`.

    Sobreposição: as duas primeiras pessoas têm raízes projetadas a
    `OVERLAP_ROOT_DISTANCE` px. Truncamento: a raiz fica na imagem e ao menos
    uma junta sai dela. Se o posicionamento esgotar as tentativas, a cena fica
    com menos pessoas. `min_separation_px = 0` desativa a separação.
    """
    rng = np.random.default_rng(cfg.seed)
    cam = cfg.camera()
    count = int(rng.integers(cfg.min_people, cfg.max_people + 1))
    overlap = count >= 2 and rng.random() < cfg.overlap_prob
    margin = cfg.margin_px
    people: list[AbsolutePose3D] = []
    projections: list[np.ndarray] = []
    for index in range(count):
        truncated = rng.random() < cfg.truncation_prob
        partner = overlap and index == 1
        placed = None
        for _ in range(cfg.max_attempts):
            relative = sample_pose(rng, spec, stats, cfg)
            depth = rng.uniform(cfg.min_depth, cfg.max_depth)
            if partner:
                theta = rng.uniform(0.0, 2.0 * math.pi)
                dist = rng.uniform(*OVERLAP_ROOT_DISTANCE)
                anchor = projections[0][spec.root_index]
                root_px = Point2D(anchor[0] + dist * math.cos(theta), anchor[1] + dist * math.sin(theta))
            else:
                root_px = Point2D(
                    rng.uniform(margin, cam.width - 1 - margin), rng.uniform(margin, cam.height - 1 - margin)
                )
            joints = place_pose(relative, root_px, depth, cam, spec)
            if np.any(joints[:, 2] <= 0):
                continue
            uv = project_points(joints, cam)
            inside = _inside(uv, cam, margin)
            if not inside[spec.root_index]:
                continue
            if truncated == bool(inside.all()):
                continue
            others = [] if partner else projections
            if cfg.min_separation_px > 0 and not all(separated(uv, other, cfg.min_separation_px) for other in others):
                continue
            placed = (joints, uv)
            break
        if placed is None:
            LOGGER.warning("[SYNTH] seed=%d: pessoa %d sem posição válida; cena com %d pessoas", cfg.seed, index, index)
            break
        people.append(AbsolutePose3D(placed[0], np.ones(spec.num_joints, dtype=bool)))
        projections.append(placed[1])
    return Scene(people=tuple(people), cam=cam)


def synth_corpus(cfg: SynthConfig, spec: SkeletonSpec, stats: BoneStats, count: int) -> list[Scene]:
    """`count` cenas com sementes derivadas de `cfg.seed`."""
    return [synth_scene(replace(cfg, seed=seed), spec, stats) for seed in spawn_seeds(cfg.seed, count)]


@dataclass(frozen=True, eq=False)
class OcclusionCase:
    """Pilha construída e cena GT usada para rotular candidatos."""

    family: OcclusionFamily
    scene: Scene
    stack: RepresentationStack


def _hidden(pose: AbsolutePose3D, joint: int) -> AbsolutePose3D:
    visible = pose.visible.copy()
    visible[joint] = False
    return AbsolutePose3D(pose.joints.copy(), visible)


def _person(
    rng: np.random.Generator,
    spec: SkeletonSpec,
    stats: BoneStats,
    cfg: SynthConfig,
    cam: CameraIntrinsics,
    depth_range: tuple[float, float],
    u_range: tuple[float, float],
    v_range: tuple[float, float],
) -> AbsolutePose3D | None:
    for _ in range(cfg.max_attempts):
        relative = sample_pose(rng, spec, stats, cfg)
        root_px = Point2D(rng.uniform(*u_range), rng.uniform(*v_range))
        joints = place_pose(relative, root_px, rng.uniform(*depth_range), cam, spec)
        if np.all(joints[:, 2] > 0) and _inside(project_points(joints, cam), cam, cfg.margin_px).all():
            return AbsolutePose3D(joints, np.ones(spec.num_joints, dtype=bool))
    return None


def _front_priority(
    rng: np.random.Generator, spec: SkeletonSpec, stats: BoneStats, enc: EncoderConfig, cfg: SynthConfig
) -> OcclusionCase | None:
    cam = cfg.camera()
    wrist, elbow = spec.joint_index("l_wrist"), spec.joint_index("l_elbow")
    part = spec.part_index(wrist)
    front = _person(rng, spec, stats, cfg, cam, (3200.0, 4000.0), (0.3 * cam.width, 0.45 * cam.width), (0.45 * cam.height, 0.55 * cam.height))
    back = _person(rng, spec, stats, cfg, cam, (4800.0, 6000.0), (0.6 * cam.width, 0.72 * cam.width), (0.4 * cam.height, 0.6 * cam.height))
    if front is None or back is None:
        return None
    front_uv = project_points(front.joints, cam)
    back_uv = project_points(back.joints, cam)
    if not separated(front_uv, back_uv, cfg.min_separation_px):
        return None
    # O punho de trás passa a projetar exatamente sobre o punho da frente.
    joints = back.joints.copy()
    joints[wrist] = back_project(Point2D(*front_uv[wrist]), float(joints[elbow, 2]), cam)
    back = AbsolutePose3D(joints, back.visible)
    stack = encode(Scene((front, back), cam), spec, enc)

    labelled = Scene((front, _hidden(back, wrist)), cam)
    heatmaps = stack.heatmaps.copy()
    heatmaps[wrist] = render_heatmaps(labelled, spec, enc)[wrist]

    shape = stack.shape
    pafs = stack.pafs.copy()
    front_pts = project_points(front.joints, cam) / enc.map_stride
    back_pts = project_points(back.joints, cam) / enc.map_stride
    front_band = segment_band_mask(front_pts[elbow], front_pts[wrist], enc.paf_width, shape)
    back_band = segment_band_mask(back_pts[elbow], back_pts[wrist], enc.paf_width, shape)
    if front_band is None:
        return None
    attenuate = np.zeros(shape, dtype=bool)
    attenuate[front_band.rows, front_band.cols] = front_band.mask
    if back_band is not None:
        attenuate[back_band.rows, back_band.cols] &= ~back_band.mask
    for channel in (2 * part, 2 * part + 1):
        pafs[channel][attenuate] *= FRONT_PAF_ATTENUATION
    stack = RepresentationStack(heatmaps=heatmaps, pafs=pafs, root_depth=stack.root_depth, rel_depth=stack.rel_depth)
    return OcclusionCase("prioridade_frontal", labelled, stack)


def _spurious_link(
    rng: np.random.Generator, spec: SkeletonSpec, stats: BoneStats, enc: EncoderConfig, cfg: SynthConfig
) -> OcclusionCase | None:
    cam = cfg.camera()
    ankle, knee = spec.joint_index("r_ankle"), spec.joint_index("r_knee")
    person = _person(rng, spec, stats, cfg, cam, (4000.0, 6000.0), (0.35 * cam.width, 0.65 * cam.width), (175.0, 185.0))
    if person is None:
        return None
    uv = project_points(person.joints, cam)
    spurious = uv[knee] + SPURIOUS_SHIN_FACTOR * (uv[ankle] - uv[knee])
    if not _inside(spurious[None, :], cam, cfg.margin_px)[0]:
        return None
    stack = encode(Scene((person,), cam), spec, enc)
    heatmaps = stack.heatmaps.copy()
    heatmaps[ankle] = 0.0
    splat_gaussian(heatmaps[ankle], float(spurious[0] / enc.map_stride), float(spurious[1] / enc.map_stride), enc)
    stack = RepresentationStack(heatmaps=heatmaps, pafs=stack.pafs, root_depth=stack.root_depth, rel_depth=stack.rel_depth)
    return OcclusionCase("ligacao_espuria", Scene((_hidden(person, ankle),), cam), stack)


def _disjoint(
    rng: np.random.Generator, spec: SkeletonSpec, stats: BoneStats, enc: EncoderConfig, cfg: SynthConfig
) -> OcclusionCase | None:
    local = replace(cfg, min_people=2, max_people=3, overlap_prob=0.0, truncation_prob=0.0, seed=int(rng.integers(2**31)))
    scene = synth_scene(local, spec, stats)
    if len(scene.people) < 2:
        return None
    return OcclusionCase("disjunto", scene, encode(scene, spec, enc))


_BUILDERS = {
    "prioridade_frontal": _front_priority,
    "ligacao_espuria": _spurious_link,
    "disjunto": _disjoint,
}


def build_occlusion_case(
    family: OcclusionFamily,
    seed: int,
    spec: SkeletonSpec,
    stats: BoneStats,
    enc: EncoderConfig,
    cfg: SynthConfig | None = None,
) -> OcclusionCase:
    """Caso de uma família de conflito de associação; repete sorteios até obter um caso válido."""
    if family not in _BUILDERS:
        raise ConfigError(f"família desconhecida: {family}")
    cfg = cfg or SynthConfig(seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(cfg.max_attempts):
        case = _BUILDERS[family](rng, spec, stats, enc, cfg)
        if case is not None:
            return case
    raise ConfigError(f"não foi possível construir um caso {family} com seed={seed}")


def occlusion_plan(count: int, seed: int) -> list[tuple[OcclusionFamily, int]]:
    """Famílias em rodízio, uma semente derivada por caso."""
    seeds = spawn_seeds(seed, count)
    return [(OCCLUSION_FAMILIES[i % len(OCCLUSION_FAMILIES)], s) for i, s in enumerate(seeds)]
