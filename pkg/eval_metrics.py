"""Métricas de avaliação: casamento, MPJPE, RtError, 3DPCK, AUC, PCOD e recall.

Convenções:
- "correto" significa erro estritamente menor que o limiar (com limiar 0,
  apenas erro exatamente 0 conta);
- variantes "all" contam juntas de pessoas GT sem par como erradas;
  variantes "matched" as ignoram;
- agregação entre quadros soma contagens por junta (PCK, AUC) e por par
  (MPJPE, RtError, PCOD).
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import integrate, optimize

from camera_model import CameraIntrinsics, project_points
from errors import ConfigError, DomainError, UndefinedMetricError
from pose_decoder import DecodeResult
from skeleton import AbsolutePose3D, SkeletonSpec
from utils import require_positive

PckMode = Literal["rel", "abs", "root"]
PckScope = Literal["all", "matched"]
PCK_MODES: tuple[PckMode, ...] = ("rel", "abs", "root")

# Custo de pares fora do gate na atribuição ótima.
_BLOCKED = 1e12


@dataclass(frozen=True)
class EvalConfig:
    pck_threshold: float = 150.0
    pcod_tie: float = 300.0
    gate_px: float = 40.0
    match_method: str = "greedy"
    auc_max: float = 150.0
    auc_step: float = 5.0

    def __post_init__(self) -> None:
        require_positive("pck_threshold", self.pck_threshold)
        require_positive("gate_px", self.gate_px)
        require_positive("auc_max", self.auc_max)
        require_positive("auc_step", self.auc_step)
        if not self.pcod_tie >= 0:
            raise ConfigError("pcod_tie deve ser >= 0")
        if self.match_method not in ("greedy", "optimal"):
            raise ConfigError(f"match_method inválido: {self.match_method}")

    def auc_thresholds(self) -> np.ndarray:
        return np.arange(0.0, self.auc_max + self.auc_step / 2.0, self.auc_step)

    def policy(self) -> "MatchPolicy":
        return MatchPolicy(gate_px=self.gate_px, method=self.match_method)


@dataclass(frozen=True)
class MatchPolicy:
    gate_px: float = 40.0
    method: str = "greedy"


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    unmatched_gt: tuple[int, ...]

    def gt_to_pred(self) -> dict[int, int]:
        return {g: p for p, g in self.pairs}


def root_distance_matrix(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    cam: CameraIntrinsics,
    spec: SkeletonSpec,
    pred_cam: CameraIntrinsics | None = None,
) -> np.ndarray:
    """Distância (px) entre projeções das raízes; inf se alguma raiz é inválida.

    `pred_cam` projeta as predições quando foram decodificadas com outra câmera.
    """
    def roots_2d(poses: Sequence[AbsolutePose3D], camera: CameraIntrinsics) -> np.ndarray:
        if not poses:
            return np.zeros((0, 2))
        uv = project_points(np.array([p.joints[spec.root_index] for p in poses]), camera)
        invisible = np.array([not p.visible[spec.root_index] for p in poses])
        uv[invisible] = np.nan
        return uv

    a, b = roots_2d(pred, pred_cam or cam), roots_2d(gt, cam)
    dist = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return np.where(np.isnan(dist), np.inf, dist)


def match_people(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    policy: MatchPolicy,
    cam: CameraIntrinsics,
    spec: SkeletonSpec,
    pred_cam: CameraIntrinsics | None = None,
) -> Matching:
    """Casamento injetivo predição <-> GT dentro de `gate_px`.

    "greedy": pares em ordem crescente de distância (empates por índices);
    "optimal": soma mínima de distâncias entre os pares admissíveis.
    """
    dist = root_distance_matrix(pred, gt, cam, spec, pred_cam)
    admissible = dist <= policy.gate_px
    pairs: list[tuple[int, int]] = []
    if policy.method == "greedy":
        rows, cols = np.nonzero(admissible)
        order = np.lexsort((cols, rows, dist[rows, cols]))
        used_pred: set[int] = set()
        used_gt: set[int] = set()
        for idx in order:
            p, g = int(rows[idx]), int(cols[idx])
            if p in used_pred or g in used_gt:
                continue
            used_pred.add(p)
            used_gt.add(g)
            pairs.append((p, g))
    elif policy.method == "optimal":
        if admissible.any():
            cost = np.where(admissible, dist, _BLOCKED)
            rows, cols = optimize.linear_sum_assignment(cost)
            pairs = [(int(p), int(g)) for p, g in zip(rows, cols) if admissible[p, g]]
    else:
        raise ConfigError(f"método de casamento desconhecido: {policy.method}")
    pairs.sort(key=lambda pair: pair[1])
    matched_gt = {g for _, g in pairs}
    return Matching(tuple(pairs), tuple(g for g in range(len(gt)) if g not in matched_gt))


def _pair_joint_errors(pred: AbsolutePose3D, gt: AbsolutePose3D, spec: SkeletonSpec, mode: PckMode) -> np.ndarray:
    """Erro por junta GT visível do conjunto do modo; inf onde a predição falta."""
    root = spec.root_index
    joints = np.array([root]) if mode == "root" else np.arange(spec.num_joints)
    selected = joints[gt.visible[joints]]
    predicted = pred.joints
    if mode == "rel":
        if not (pred.visible[root] and gt.visible[root]):
            return np.full(selected.size, np.inf)
        predicted = predicted - predicted[root] + gt.joints[root]
    errors = np.linalg.norm(predicted[selected] - gt.joints[selected], axis=1)
    errors[~pred.visible[selected]] = np.inf
    return errors


def joint_errors(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    matching: Matching,
    spec: SkeletonSpec,
    mode: PckMode,
) -> tuple[np.ndarray, np.ndarray]:
    """Erros de todas as juntas GT do modo e máscara de pessoa casada."""
    lookup = matching.gt_to_pred()
    errors: list[np.ndarray] = []
    matched: list[np.ndarray] = []
    for g, gt_pose in enumerate(gt):
        p = lookup.get(g)
        if p is None:
            joints = np.array([spec.root_index]) if mode == "root" else np.arange(spec.num_joints)
            e = np.full(int(gt_pose.visible[joints].sum()), np.inf)
        else:
            e = _pair_joint_errors(pred[p], gt_pose, spec, mode)
        errors.append(e)
        matched.append(np.full(e.size, p is not None))
    if not errors:
        return np.zeros(0), np.zeros(0, dtype=bool)
    return np.concatenate(errors), np.concatenate(matched)


def _correct(errors: np.ndarray, threshold: float) -> np.ndarray:
    if threshold == 0:
        return errors == 0
    return errors < threshold


def mpjpe(pred: Sequence[AbsolutePose3D], gt: Sequence[AbsolutePose3D], matching: Matching, spec: SkeletonSpec) -> float:
    """Média, sobre os pares, do erro médio por junta após alinhar as raízes."""
    total, count = _mpjpe_sums(pred, gt, matching, spec)
    if count == 0:
        raise UndefinedMetricError("MPJPE indefinido: nenhum par casado com juntas comparáveis")
    return total / count


def _mpjpe_sums(pred, gt, matching: Matching, spec: SkeletonSpec) -> tuple[float, int]:
    total, count = 0.0, 0
    for p, g in matching.pairs:
        errors = _pair_joint_errors(pred[p], gt[g], spec, "rel")
        finite = errors[np.isfinite(errors)]
        if finite.size:
            total += float(finite.mean())
            count += 1
    return total, count


def rt_error(pred: Sequence[AbsolutePose3D], gt: Sequence[AbsolutePose3D], matching: Matching, spec: SkeletonSpec) -> float:
    """Distância 3D média entre raízes casadas."""
    total, count = _rt_sums(pred, gt, matching, spec)
    if count == 0:
        raise UndefinedMetricError("RtError indefinido: nenhum par casado")
    return total / count


def _rt_sums(pred, gt, matching: Matching, spec: SkeletonSpec) -> tuple[float, int]:
    root = spec.root_index
    total, count = 0.0, 0
    for p, g in matching.pairs:
        if pred[p].visible[root] and gt[g].visible[root]:
            total += float(np.linalg.norm(pred[p].joints[root] - gt[g].joints[root]))
            count += 1
    return total, count


def pck3d(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    matching: Matching,
    spec: SkeletonSpec,
    threshold: float = 150.0,
    mode: PckMode = "rel",
    scope: PckScope = "all",
) -> float:
    """Percentual de juntas GT com erro < `threshold` (mm)."""
    require_positive("threshold", threshold, DomainError)
    errors, matched = joint_errors(pred, gt, matching, spec, mode)
    if scope == "matched":
        errors = errors[matched]
    if errors.size == 0:
        raise UndefinedMetricError(f"PCK {mode}/{scope} indefinido: nenhuma junta GT")
    return 100.0 * float(_correct(errors, threshold).mean())


def _check_grid(thresholds: Sequence[float]) -> np.ndarray:
    grid = np.asarray(thresholds, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("limiares do AUC devem ser estritamente crescentes (>= 2 valores)")
    return grid


def _auc_from_curve(curve: np.ndarray, grid: np.ndarray) -> float:
    return float(integrate.trapezoid(curve, grid) / (grid[-1] - grid[0]))


def auc_rel(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    matching: Matching,
    spec: SkeletonSpec,
    thresholds: Sequence[float] = tuple(np.arange(0.0, 152.5, 5.0)),
    scope: PckScope = "all",
) -> float:
    """Média trapezoidal do PCK relativo sobre a grade de limiares."""
    grid = _check_grid(thresholds)
    errors, matched = joint_errors(pred, gt, matching, spec, "rel")
    if scope == "matched":
        errors = errors[matched]
    if errors.size == 0:
        raise UndefinedMetricError("AUC indefinido: nenhuma junta GT")
    curve = np.array([100.0 * _correct(errors, t).mean() for t in grid])
    return _auc_from_curve(curve, grid)


def ordinal_class(delta: float, tie: float) -> int:
    """-1 mais perto, 0 aproximadamente igual (|dZ| <= tie), +1 mais longe."""
    if abs(delta) <= tie:
        return 0
    return 1 if delta > 0 else -1


def _pcod_counts(pred, gt, matching: Matching, spec: SkeletonSpec, tie: float) -> tuple[int, int]:
    root = spec.root_index
    usable = [(p, g) for p, g in matching.pairs if pred[p].visible[root] and gt[g].visible[root]]
    correct = total = 0
    for (p1, g1), (p2, g2) in itertools.combinations(usable, 2):
        gt_class = ordinal_class(gt[g1].joints[root, 2] - gt[g2].joints[root, 2], tie)
        pred_class = ordinal_class(pred[p1].joints[root, 2] - pred[p2].joints[root, 2], tie)
        correct += int(gt_class == pred_class)
        total += 1
    return correct, total


def pcod(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    matching: Matching,
    spec: SkeletonSpec,
    tie: float = 300.0,
) -> float:
    """Percentual de pares não ordenados de pessoas casadas com a mesma relação ordinal."""
    correct, total = _pcod_counts(pred, gt, matching, spec, tie)
    if total == 0:
        raise UndefinedMetricError("PCOD indefinido: menos de duas pessoas casadas")
    return 100.0 * correct / total


def _zeros(n: int) -> tuple[int, ...]:
    return (0,) * n


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b, strict=True))


@dataclass(frozen=True)
class FrameTally:
    """Somas por quadro; `+` é associativo e comutativo."""

    gt_people: int = 0
    matched_people: int = 0
    mpjpe_sum: float = 0.0
    mpjpe_pairs: int = 0
    rt_sum: float = 0.0
    rt_pairs: int = 0
    # Ordem de PCK_MODES: rel, abs, root.
    pck_all_correct: tuple[int, int, int] = (0, 0, 0)
    pck_all_total: tuple[int, int, int] = (0, 0, 0)
    pck_matched_correct: tuple[int, int, int] = (0, 0, 0)
    pck_matched_total: tuple[int, int, int] = (0, 0, 0)
    auc_all_correct: tuple[int, ...] = field(default=())
    auc_all_total: int = 0
    auc_matched_correct: tuple[int, ...] = field(default=())
    auc_matched_total: int = 0
    pcod_correct: int = 0
    pcod_pairs: int = 0
    frames: int = 0

    def __add__(self, other: "FrameTally") -> "FrameTally":
        if not isinstance(other, FrameTally):
            return NotImplemented
        width = max(len(self.auc_all_correct), len(other.auc_all_correct))

        def pad(values: tuple[int, ...]) -> tuple[int, ...]:
            return values or _zeros(width)

        return FrameTally(
            gt_people=self.gt_people + other.gt_people,
            matched_people=self.matched_people + other.matched_people,
            mpjpe_sum=self.mpjpe_sum + other.mpjpe_sum,
            mpjpe_pairs=self.mpjpe_pairs + other.mpjpe_pairs,
            rt_sum=self.rt_sum + other.rt_sum,
            rt_pairs=self.rt_pairs + other.rt_pairs,
            pck_all_correct=_add(self.pck_all_correct, other.pck_all_correct),
            pck_all_total=_add(self.pck_all_total, other.pck_all_total),
            pck_matched_correct=_add(self.pck_matched_correct, other.pck_matched_correct),
            pck_matched_total=_add(self.pck_matched_total, other.pck_matched_total),
            auc_all_correct=_add(pad(self.auc_all_correct), pad(other.auc_all_correct)),
            auc_all_total=self.auc_all_total + other.auc_all_total,
            auc_matched_correct=_add(pad(self.auc_matched_correct), pad(other.auc_matched_correct)),
            auc_matched_total=self.auc_matched_total + other.auc_matched_total,
            pcod_correct=self.pcod_correct + other.pcod_correct,
            pcod_pairs=self.pcod_pairs + other.pcod_pairs,
            frames=self.frames + other.frames,
        )

    def __radd__(self, other):
        if other == 0:
            return self
        return NotImplemented


def tally_frame(
    pred: Sequence[AbsolutePose3D],
    gt: Sequence[AbsolutePose3D],
    cam: CameraIntrinsics,
    spec: SkeletonSpec,
    cfg: EvalConfig,
    pred_cam: CameraIntrinsics | None = None,
) -> FrameTally:
    matching = match_people(pred, gt, cfg.policy(), cam, spec, pred_cam)
    grid = cfg.auc_thresholds()
    counts: dict[str, list[int]] = {k: [] for k in ("ac", "at", "mc", "mt")}
    auc_all = auc_matched = None
    for mode in PCK_MODES:
        errors, matched = joint_errors(pred, gt, matching, spec, mode)
        ok = _correct(errors, cfg.pck_threshold)
        counts["ac"].append(int(ok.sum()))
        counts["at"].append(int(errors.size))
        counts["mc"].append(int(ok[matched].sum()))
        counts["mt"].append(int(matched.sum()))
        if mode == "rel":
            auc_all = (tuple(int(_correct(errors, t).sum()) for t in grid), int(errors.size))
            sub = errors[matched]
            auc_matched = (tuple(int(_correct(sub, t).sum()) for t in grid), int(sub.size))
    mpjpe_sum, mpjpe_pairs = _mpjpe_sums(pred, gt, matching, spec)
    rt_sum, rt_pairs = _rt_sums(pred, gt, matching, spec)
    pcod_correct, pcod_pairs = _pcod_counts(pred, gt, matching, spec, cfg.pcod_tie)
    return FrameTally(
        gt_people=len(gt),
        matched_people=len(matching.pairs),
        mpjpe_sum=mpjpe_sum,
        mpjpe_pairs=mpjpe_pairs,
        rt_sum=rt_sum,
        rt_pairs=rt_pairs,
        pck_all_correct=tuple(counts["ac"]),
        pck_all_total=tuple(counts["at"]),
        pck_matched_correct=tuple(counts["mc"]),
        pck_matched_total=tuple(counts["mt"]),
        auc_all_correct=auc_all[0],
        auc_all_total=auc_all[1],
        auc_matched_correct=auc_matched[0],
        auc_matched_total=auc_matched[1],
        pcod_correct=pcod_correct,
        pcod_pairs=pcod_pairs,
        frames=1,
    )


@dataclass(frozen=True)
class MetricReport:
    """Percentuais em [0, 100] e erros em mm; None marca métrica indefinida."""

    recall: float | None
    mpjpe: float | None
    rt_error: float | None
    pck_rel: float | None
    pck_abs: float | None
    pck_root: float | None
    pck_rel_matched: float | None
    pck_abs_matched: float | None
    pck_root_matched: float | None
    auc_rel: float | None
    auc_rel_matched: float | None
    pcod: float | None
    frames: int
    gt_people: int
    matched_people: int
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: float, den: float, scale: float = 1.0) -> float | None:
    return scale * num / den if den else None


def report_from_tally(tally: FrameTally, cfg: EvalConfig) -> MetricReport:
    pck_all = [_ratio(c, t, 100.0) for c, t in zip(tally.pck_all_correct, tally.pck_all_total)]
    pck_matched = [_ratio(c, t, 100.0) for c, t in zip(tally.pck_matched_correct, tally.pck_matched_total)]
    grid = cfg.auc_thresholds()

    def auc(correct: tuple[int, ...], total: int) -> float | None:
        if not total or len(correct) != grid.size:
            return None
        return _auc_from_curve(100.0 * np.asarray(correct, dtype=np.float64) / total, grid)

    config = asdict(cfg)
    config["auc_thresholds"] = grid.tolist()
    return MetricReport(
        recall=_ratio(tally.matched_people, tally.gt_people, 100.0),
        mpjpe=_ratio(tally.mpjpe_sum, tally.mpjpe_pairs),
        rt_error=_ratio(tally.rt_sum, tally.rt_pairs),
        pck_rel=pck_all[0],
        pck_abs=pck_all[1],
        pck_root=pck_all[2],
        pck_rel_matched=pck_matched[0],
        pck_abs_matched=pck_matched[1],
        pck_root_matched=pck_matched[2],
        auc_rel=auc(tally.auc_all_correct, tally.auc_all_total),
        auc_rel_matched=auc(tally.auc_matched_correct, tally.auc_matched_total),
        pcod=_ratio(tally.pcod_correct, tally.pcod_pairs, 100.0),
        frames=tally.frames,
        gt_people=tally.gt_people,
        matched_people=tally.matched_people,
        config=config,
    )


def evaluate(
    pred_set: Sequence[Sequence[AbsolutePose3D]],
    gt_set: Sequence[Sequence[AbsolutePose3D]],
    cams: Sequence[CameraIntrinsics],
    spec: SkeletonSpec,
    cfg: EvalConfig,
) -> MetricReport:
    """Casa e pontua cada quadro e agrega as contagens."""
    if not len(pred_set) == len(gt_set) == len(cams):
        raise DomainError("pred_set, gt_set e cams devem ter o mesmo número de quadros")
    total = sum((tally_frame(p, g, c, spec, cfg) for p, g, c in zip(pred_set, gt_set, cams)), FrameTally())
    return report_from_tally(total, cfg)


def candidate_owners(
    result: DecodeResult, gt: Sequence[AbsolutePose3D], cam: CameraIntrinsics, radius: float = 3.0
) -> dict[int, int | None]:
    """Dono verdadeiro de cada candidato: pessoa GT com junta visível do mesmo tipo mais próxima (<= radius px)."""
    projected = [project_points(pose.joints, cam) for pose in gt]
    owners: dict[int, int | None] = {}
    for per_joint in result.candidates:
        for cand in per_joint:
            best, best_dist = None, radius
            for person, (pose, uv) in enumerate(zip(gt, projected)):
                if not pose.visible[cand.joint_type]:
                    continue
                dist = float(np.hypot(*(uv[cand.joint_type] - np.asarray(cand.pos))))
                if dist <= best_dist:
                    best, best_dist = person, dist
            owners[cand.cid] = best
    return owners


def association_accuracy(
    result: DecodeResult, gt: Sequence[AbsolutePose3D], cam: CameraIntrinsics, spec: SkeletonSpec, radius: float = 3.0
) -> tuple[int, int]:
    """(acertos, total) de candidatos atribuídos à pessoa GT correta.

    A identidade de uma hipótese é o dono do seu candidato raiz; candidatos sem
    dono só contam como acerto se ficarem sem pessoa.
    """
    owners = candidate_owners(result, gt, cam, radius)
    assigned: dict[int, int | None] = {}
    for hypothesis in result.hypotheses:
        identity = owners.get(hypothesis.candidate_ids[spec.root_index])
        for cid in hypothesis.candidate_ids:
            if cid is not None:
                assigned[cid] = identity
    correct = 0
    for cid, owner in owners.items():
        if cid not in assigned:
            correct += int(owner is None)
        else:
            correct += int(owner is not None and assigned[cid] == owner)
    return correct, len(owners)
