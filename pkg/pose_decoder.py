"""Decodificação das representações 2.5D em poses 3D absolutas.

Etapas: extração de keypoints (NMS + ajuste sub-pixel), pontuação por PAF,
associação de partes ciente de profundidade (prior ordinal + limite adaptativo
de comprimento de osso), leitura de profundidades e retroprojeção.

Posições `map_pos` e segmentos de PAF estão em pixels do mapa; `pos` está em
pixels da imagem (`map_pos * stride`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from camera_model import CameraIntrinsics, NormalizedDepth, Point2D, back_project, denormalize_depth
from errors import ConfigError, DomainError
from logger import get_logger
from repr_encoder import RepresentationStack
from skeleton import AbsolutePose3D, BoneStats, SkeletonSpec
from utils import lookup_nearest, nearest_pixel, require_positive, segment_samples

LOGGER = get_logger("pose_decoder")

AssocMethod = Literal["dapa", "2dpa"]
Refiner = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AssocConfig:
    relaxation: float = 1.5
    paf_samples: int = 10
    min_paf_score: float = 0.2
    nms_radius: float = 2.0
    detect_threshold: float = 0.1
    # Limite fixo da associação 2D de referência: metade da largura da imagem.
    distance_cap: float = 0.5

    def __post_init__(self) -> None:
        require_positive("relaxation", self.relaxation)
        require_positive("nms_radius", self.nms_radius)
        require_positive("detect_threshold", self.detect_threshold)
        require_positive("distance_cap", self.distance_cap)
        if int(self.paf_samples) != self.paf_samples or self.paf_samples < 2:
            raise ConfigError("paf_samples deve ser inteiro >= 2")


@dataclass(frozen=True)
class KeypointCandidate:
    cid: int
    joint_type: int
    pos: Point2D
    map_pos: tuple[float, float]
    score: float


@dataclass(frozen=True)
class LinkCandidate:
    part: int
    a: int
    b: int
    paf_score: float
    length_2d: float
    length_ratio: float


@dataclass(frozen=True)
class PersonHypothesis:
    joints_2d: tuple[Point2D | None, ...]
    map_points: tuple[tuple[float, float] | None, ...]
    scores: tuple[float | None, ...]
    candidate_ids: tuple[int | None, ...]
    root_depth: NormalizedDepth
    links: tuple[LinkCandidate, ...] = ()
    joint_depths: tuple[float | None, ...] | None = None


@dataclass(frozen=True)
class DecodeResult:
    candidates: list[list[KeypointCandidate]]
    hypotheses: list[PersonHypothesis]
    poses: list[AbsolutePose3D]


@dataclass
class _Builder:
    zt: float
    members: list[KeypointCandidate | None]
    links: list[LinkCandidate] = field(default_factory=list)

    def freeze(self) -> PersonHypothesis:
        return PersonHypothesis(
            joints_2d=tuple(c.pos if c else None for c in self.members),
            map_points=tuple(c.map_pos if c else None for c in self.members),
            scores=tuple(c.score if c else None for c in self.members),
            candidate_ids=tuple(c.cid if c else None for c in self.members),
            root_depth=NormalizedDepth(self.zt),
            links=tuple(self.links),
        )


def _disk_offsets(radius: float) -> list[tuple[int, int]]:
    reach = int(math.floor(radius))
    return [
        (dy, dx)
        for dy in range(-reach, reach + 1)
        for dx in range(-reach, reach + 1)
        if (dy or dx) and dy * dy + dx * dx <= radius * radius
    ]


def _parabola_offset(left: float, center: float, right: float) -> float:
    # Ajuste no log: exato para picos gaussianos.
    if min(left, center, right) > 0:
        left, center, right = math.log(left), math.log(center), math.log(right)
    denom = left - 2.0 * center + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def _subpixel(channel: np.ndarray, y: int, x: int) -> tuple[float, float]:
    h, w = channel.shape
    dx = dy = 0.0
    if 0 < x < w - 1:
        dx = _parabola_offset(float(channel[y, x - 1]), float(channel[y, x]), float(channel[y, x + 1]))
    if 0 < y < h - 1:
        dy = _parabola_offset(float(channel[y - 1, x]), float(channel[y, x]), float(channel[y + 1, x]))
    return dx, dy


def extract_keypoints(heatmaps: np.ndarray, cfg: AssocConfig, stride: float = 1.0) -> list[list[KeypointCandidate]]:
    """Máximos locais acima do limiar, com NMS em disco de raio `nms_radius`.

    Empates: sobrevive o pico de menor linha e, depois, menor coluna.
    """
    reach = int(math.floor(cfg.nms_radius))
    offsets = _disk_offsets(cfg.nms_radius)
    padded = np.pad(heatmaps, ((0, 0), (reach, reach), (reach, reach)), constant_values=-np.inf)
    radius_sq = cfg.nms_radius * cfg.nms_radius
    result: list[list[KeypointCandidate]] = []
    cid = 0
    for joint in range(heatmaps.shape[0]):
        channel = heatmaps[joint]
        ys, xs = np.nonzero(channel >= cfg.detect_threshold)
        found: list[KeypointCandidate] = []
        if ys.size:
            values = channel[ys, xs]
            is_peak = np.ones(ys.size, dtype=bool)
            for dy, dx in offsets:
                is_peak &= values >= padded[joint, ys + reach + dy, xs + reach + dx]
            kept: list[tuple[int, int]] = []
            for y, x, value in zip(ys[is_peak], xs[is_peak], values[is_peak]):
                if any((y - ky) ** 2 + (x - kx) ** 2 <= radius_sq for ky, kx in kept):
                    continue
                kept.append((int(y), int(x)))
                off_x, off_y = _subpixel(channel, int(y), int(x))
                mx, my = float(x) + off_x, float(y) + off_y
                found.append(KeypointCandidate(cid, joint, Point2D(mx * stride, my * stride), (mx, my), float(value)))
                cid += 1
        result.append(found)
    return result


def paf_score_matrix(
    starts: np.ndarray, ends: np.ndarray, part_field: np.ndarray, samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pontuações (Na, Nb) e comprimentos de todos os pares início/fim de uma parte.

    Pares de comprimento nulo recebem -inf.
    """
    starts = np.asarray(starts, dtype=np.float64).reshape(-1, 2)
    ends = np.asarray(ends, dtype=np.float64).reshape(-1, 2)
    delta = ends[None, :, :] - starts[:, None, :]
    lengths = np.hypot(delta[..., 0], delta[..., 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = delta / lengths[..., None]
    points = segment_samples(starts[:, None, :], ends[None, :, :], samples)
    vectors = lookup_nearest(part_field.astype(np.float64), points)
    dots = vectors[0] * unit[..., 0, None] + vectors[1] * unit[..., 1, None]
    scores = dots.mean(axis=-1)
    scores[lengths <= 0] = -np.inf
    return scores, lengths


def paf_score(a: Point2D, b: Point2D, part_field: np.ndarray, cfg: AssocConfig) -> float:
    """Alinhamento médio do campo com a direção a->b em `paf_samples` pontos."""
    if a[0] == b[0] and a[1] == b[1]:
        raise DomainError("segmento de comprimento nulo")
    scores, _ = paf_score_matrix(np.array([a]), np.array([b]), part_field, cfg.paf_samples)
    return float(scores[0, 0])


def link_threshold(part: int, root_zt: float, stats: BoneStats, cfg: AssocConfig) -> float:
    """Comprimento 2D máximo, como fração da largura: lambda * D_osso / Z~."""
    if not root_zt > 0:
        raise DomainError(f"profundidade normalizada deve ser positiva, recebido {root_zt!r}")
    return cfg.relaxation * stats.mean_length[part] / root_zt


def read_root_depth(candidate: KeypointCandidate, root_map: np.ndarray, cfg: AssocConfig) -> float:
    """Z~ no pixel mais próximo; se não supervisionado, o máximo no disco de NMS."""
    h, w = root_map.shape
    x, y = (int(v) for v in nearest_pixel(np.array(candidate.map_pos)))
    if 0 <= x < w and 0 <= y < h and root_map[y, x] > 0:
        return float(root_map[y, x])
    best = 0.0
    for dy, dx in _disk_offsets(cfg.nms_radius):
        yy, xx = y + dy, x + dx
        if 0 <= xx < w and 0 <= yy < h:
            best = max(best, float(root_map[yy, xx]))
    return best


def _seed(
    candidates: Sequence[Sequence[KeypointCandidate]], stack: RepresentationStack, spec: SkeletonSpec, cfg: AssocConfig
) -> list[_Builder]:
    builders = []
    for cand in candidates[spec.root_index]:
        zt = read_root_depth(cand, stack.root_depth, cfg)
        if zt <= 0:
            continue
        members: list[KeypointCandidate | None] = [None] * spec.num_joints
        members[spec.root_index] = cand
        builders.append(_Builder(zt=zt, members=members))
    return builders


def _part_scores(
    active: list[_Builder], par: int, kids: Sequence[KeypointCandidate], stack: RepresentationStack, part: int, cfg: AssocConfig
) -> tuple[np.ndarray, np.ndarray]:
    starts = np.array([b.members[par].map_pos for b in active])
    ends = np.array([k.map_pos for k in kids])
    scores, lengths = paf_score_matrix(starts, ends, stack.part_field(part), cfg.paf_samples)
    return scores, lengths


def depth_aware_associate(
    candidates: Sequence[Sequence[KeypointCandidate]],
    stack: RepresentationStack,
    spec: SkeletonSpec,
    stats: BoneStats,
    cfg: AssocConfig,
) -> list[PersonHypothesis]:
    """Raízes de perto para longe; cada pessoa escolhe, parte a parte, o melhor filho livre."""
    builders = _seed(candidates, stack, spec, cfg)
    # Ordenação estável: empates de Z~ mantêm a ordem de varredura 2D.
    builders.sort(key=lambda b: b.zt)
    width = stack.shape[1]
    for part, (par, child) in enumerate(spec.parts):
        kids = candidates[child]
        active = [b for b in builders if b.members[par] is not None]
        if not kids or not active:
            continue
        scores, lengths = _part_scores(active, par, kids, stack, part, cfg)
        ratios = lengths / width
        claimed = np.zeros(len(kids), dtype=bool)
        for row, builder in enumerate(active):
            limit = link_threshold(part, builder.zt, stats, cfg)
            valid = ~claimed & (scores[row] >= cfg.min_paf_score) & (ratios[row] <= limit)
            if not valid.any():
                continue
            best = int(np.argmax(np.where(valid, scores[row], -np.inf)))
            claimed[best] = True
            builder.members[child] = kids[best]
            builder.links.append(
                LinkCandidate(
                    part=part,
                    a=builder.members[par].cid,
                    b=kids[best].cid,
                    paf_score=float(scores[row, best]),
                    length_2d=float(lengths[row, best]),
                    length_ratio=float(ratios[row, best]),
                )
            )
    return [b.freeze() for b in builders]


def associate_2d(
    candidates: Sequence[Sequence[KeypointCandidate]],
    stack: RepresentationStack,
    spec: SkeletonSpec,
    cfg: AssocConfig,
) -> list[PersonHypothesis]:
    """Associação gulosa 2D de referência: ordem global de PAF e limite fixo."""
    builders = _seed(candidates, stack, spec, cfg)
    width = stack.shape[1]
    for part, (par, child) in enumerate(spec.parts):
        kids = candidates[child]
        active = [b for b in builders if b.members[par] is not None]
        if not kids or not active:
            continue
        scores, lengths = _part_scores(active, par, kids, stack, part, cfg)
        ratios = lengths / width
        rows, cols = np.nonzero((scores >= cfg.min_paf_score) & (ratios <= cfg.distance_cap))
        order = np.lexsort((cols, rows, -scores[rows, cols]))
        used_rows: set[int] = set()
        used_cols: set[int] = set()
        for idx in order:
            row, col = int(rows[idx]), int(cols[idx])
            if row in used_rows or col in used_cols:
                continue
            used_rows.add(row)
            used_cols.add(col)
            builder = active[row]
            builder.members[child] = kids[col]
            builder.links.append(
                LinkCandidate(
                    part=part,
                    a=builder.members[par].cid,
                    b=kids[col].cid,
                    paf_score=float(scores[row, col]),
                    length_2d=float(lengths[row, col]),
                    length_ratio=float(ratios[row, col]),
                )
            )
    return [b.freeze() for b in builders]


def read_depths(
    person: PersonHypothesis,
    stack: RepresentationStack,
    spec: SkeletonSpec,
    cam: CameraIntrinsics,
    samples: int = 10,
) -> PersonHypothesis:
    """Profundidade da raiz desnormalizada e propagação de dZ ao longo da árvore."""
    depths: list[float | None] = [None] * spec.num_joints
    depths[spec.root_index] = denormalize_depth(person.root_depth, cam)
    for part, (par, child) in enumerate(spec.parts):
        start, end = person.map_points[par], person.map_points[child]
        if depths[par] is None or start is None or end is None:
            continue
        points = segment_samples(np.array(start), np.array(end), samples)
        delta = float(np.mean(lookup_nearest(stack.rel_depth[part].astype(np.float64), points)))
        depths[child] = depths[par] + delta
    return replace(person, joint_depths=tuple(depths))


def reconstruct_3d(person: PersonHypothesis, cam: CameraIntrinsics) -> AbsolutePose3D:
    """Retroprojeção de cada junta com 2D e profundidade conhecidos."""
    count = len(person.joints_2d)
    joints = np.zeros((count, 3))
    visible = np.zeros(count, dtype=bool)
    depths = person.joint_depths or (None,) * count
    for joint, (point, depth) in enumerate(zip(person.joints_2d, depths)):
        if point is None or depth is None or not depth > 0:
            continue
        joints[joint] = back_project(point, depth, cam)
        visible[joint] = True
    return AbsolutePose3D(joints, visible)


def identity_refiner(joints_2d: np.ndarray, relative_3d: np.ndarray) -> np.ndarray:
    return relative_3d


def apply_refiner(
    pose: AbsolutePose3D, person: PersonHypothesis, spec: SkeletonSpec, refine: Refiner
) -> AbsolutePose3D:
    """Refina a pose relativa à raiz sem alterar a raiz.

    Juntas ausentes entram como zero; saídas não nulas passam a ser visíveis.
    """
    root = pose.joints[spec.root_index].copy()
    relative = pose.joints - root
    relative[~pose.visible] = 0.0
    uv = np.array([p if p is not None else (0.0, 0.0) for p in person.joints_2d], dtype=np.float64)
    refined = np.asarray(refine(uv, relative), dtype=np.float64).reshape(spec.num_joints, 3)
    refined[spec.root_index] = 0.0
    visible = pose.visible | (np.isfinite(refined).all(axis=1) & np.any(refined != 0.0, axis=1))
    joints = np.where(visible[:, None], root + np.nan_to_num(refined), 0.0)
    joints[spec.root_index] = root
    return AbsolutePose3D(joints, visible)


def decode_frame(
    stack: RepresentationStack,
    cam: CameraIntrinsics,
    spec: SkeletonSpec,
    stats: BoneStats,
    cfg: AssocConfig,
    associate: AssocMethod = "dapa",
    refine: Refiner | None = None,
) -> DecodeResult:
    """Pipeline completo com diagnósticos (candidatos e hipóteses)."""
    stride = cam.width / stack.shape[1]
    candidates = extract_keypoints(stack.heatmaps, cfg, stride)
    if associate == "dapa":
        hypotheses = depth_aware_associate(candidates, stack, spec, stats, cfg)
    elif associate == "2dpa":
        hypotheses = associate_2d(candidates, stack, spec, cfg)
    else:
        raise ConfigError(f"associação desconhecida: {associate}")
    # Saída sempre de perto para longe; ordenação estável.
    hypotheses = sorted(
        (read_depths(h, stack, spec, cam, cfg.paf_samples) for h in hypotheses), key=lambda h: h.root_depth
    )
    poses = []
    for hypothesis in hypotheses:
        pose = reconstruct_3d(hypothesis, cam)
        if refine is not None:
            pose = apply_refiner(pose, hypothesis, spec, refine)
        poses.append(pose)
    LOGGER.debug(
        "decode %s: %d candidatos, %d pessoas",
        associate,
        sum(len(c) for c in candidates),
        len(poses),
    )
    return DecodeResult(candidates=candidates, hypotheses=hypotheses, poses=poses)


def decode(
    stack: RepresentationStack,
    cam: CameraIntrinsics,
    spec: SkeletonSpec,
    stats: BoneStats,
    cfg: AssocConfig,
    associate: AssocMethod = "dapa",
    refine: Refiner | None = None,
) -> list[AbsolutePose3D]:
    return decode_frame(stack, cam, spec, stats, cfg, associate, refine).poses
