"""Motor de pipeline: síntese, codificação, decodificação, avaliação, benchmark e ablação."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from tqdm import tqdm

from camera_model import CameraIntrinsics
from eval_metrics import FrameTally, MetricReport, association_accuracy, report_from_tally, tally_frame
from pose_decoder import AssocMethod, DecodeResult, associate_2d, decode_frame, depth_aware_associate, extract_keypoints
from profile_manager import RunProfile
from repr_encoder import RepresentationStack, Scene, encode
from scene_synth import (
    OCCLUSION_FAMILIES,
    OcclusionFamily,
    SynthConfig,
    build_occlusion_case,
    occlusion_plan,
    synth_corpus,
    synth_scene,
)
from skeleton import AbsolutePose3D, BoneStats, SkeletonSpec, validate_pose
from timing_tracker import TimingTracker

# Desvio relativo máximo de um osso decodificado antes de ser apontado no debug.
BONE_TOLERANCE = 0.5


@dataclass(frozen=True, eq=False)
class FrameOutcome:
    index: int
    scene: Scene
    poses: list[AbsolutePose3D]
    tally: FrameTally

    def row(self) -> dict:
        t = self.tally
        return {
            "frame": self.index,
            "gt_people": t.gt_people,
            "pred_people": len(self.poses),
            "matched": t.matched_people,
            "mpjpe": t.mpjpe_sum / t.mpjpe_pairs if t.mpjpe_pairs else None,
            "rt_error": t.rt_sum / t.rt_pairs if t.rt_pairs else None,
            "pcod": 100.0 * t.pcod_correct / t.pcod_pairs if t.pcod_pairs else None,
        }


@dataclass(frozen=True, eq=False)
class RoundtripResult:
    report: MetricReport
    frames: list[FrameOutcome]

    def rows(self) -> list[dict]:
        return [f.row() for f in self.frames]


@dataclass(frozen=True)
class AblationRow:
    family: str
    method: str
    correct: int
    total: int

    @property
    def accuracy(self) -> float | None:
        return 100.0 * self.correct / self.total if self.total else None


class PipelineEngine:
    def __init__(
        self,
        logger,
        profile: RunProfile,
        spec: SkeletonSpec,
        stats: BoneStats,
        workers: int = 1,
        progress: bool = False,
        debug_mode: bool = False,
        debug_callback: Callable[[str], None] | None = None,
    ) -> None:
        self.logger = logger
        self.profile = profile
        self.spec = spec
        self.stats = stats
        self.workers = max(1, int(workers))
        self.progress = progress
        self.debug_mode = debug_mode
        self._debug_callback = debug_callback

    def _debug(self, message: str) -> None:
        if not self.debug_mode:
            return
        payload = f"[DEBUG] {message}"
        self.logger.info(payload)
        if self._debug_callback:
            self._debug_callback(payload)

    def log_startup(self, command: str) -> None:
        p = self.profile
        self.logger.info(
            "[STARTUP] comando=%s | perfil=%s | esqueleto=%s (J=%d) | sigma=%.2f paf_width=%.2f stride=%.2f | "
            "lambda=%.2f | workers=%d | debug=%s",
            command,
            p.name,
            self.spec.name,
            self.spec.num_joints,
            p.encoder.sigma,
            p.encoder.paf_width,
            p.encoder.map_stride,
            p.assoc.relaxation,
            self.workers,
            "on" if self.debug_mode else "off",
        )

    def _map(self, fn: Callable, items: Sequence, desc: str) -> list:
        """Aplica `fn` em paralelo preservando a ordem de entrada."""
        if self.workers == 1:
            iterator: Iterable = map(fn, items)
            return list(tqdm(iterator, total=len(items), desc=desc, disable=not self.progress))
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=not self.progress))

    # --- etapas unitárias -------------------------------------------------

    def synth(self, cfg: SynthConfig | None = None) -> Scene:
        cfg = cfg or self.profile.synth
        scene = synth_scene(cfg, self.spec, self.stats)
        self.logger.info("[SYNTH] seed=%d | pessoas=%d", cfg.seed, len(scene.people))
        return scene

    def synth_frames(self, count: int | None = None) -> list[Scene]:
        count = count or self.profile.frames
        scenes = synth_corpus(self.profile.synth, self.spec, self.stats, count)
        self.logger.info(
            "[SYNTH] %d cenas | seed=%d | pessoas=%d", count, self.profile.synth.seed, sum(len(s.people) for s in scenes)
        )
        return scenes

    def encode(self, scene: Scene) -> RepresentationStack:
        stack = encode(scene, self.spec, self.profile.encoder)
        self._debug(f"encode: {len(scene.people)} pessoas -> {stack.num_channels} canais {stack.shape}")
        return stack

    def decode(
        self, stack: RepresentationStack, cam: CameraIntrinsics, associate: AssocMethod = "dapa"
    ) -> DecodeResult:
        result = decode_frame(stack, cam, self.spec, self.stats, self.profile.assoc, associate)
        if self.debug_mode:
            violations = [
                v for pose in result.poses for v in validate_pose(pose, self.spec, self.stats, BONE_TOLERANCE)
            ]
            self._debug(
                f"decode {associate}: {len(result.poses)} pessoas | ossos fora da tolerância: {len(violations)}"
            )
            for v in violations:
                self._debug(f"osso {v.name}: {v.length:.1f} mm (média {v.expected:.1f} mm)")
        return result

    def evaluate(
        self,
        pred: Sequence[Sequence[AbsolutePose3D]],
        gt: Sequence[Scene],
        pred_cams: Sequence[CameraIntrinsics] | None = None,
    ) -> MetricReport:
        pred_cams = pred_cams or [scene.cam for scene in gt]
        total = sum(
            (
                tally_frame(p, scene.people, scene.cam, self.spec, self.profile.eval, pc)
                for p, scene, pc in zip(pred, gt, pred_cams, strict=True)
            ),
            FrameTally(),
        )
        report = report_from_tally(total, self.profile.eval)
        self._log_report("[EVAL]", report)
        return report

    def _log_report(self, tag: str, report: MetricReport) -> None:
        def fmt(value: float | None) -> str:
            return "n/d" if value is None else f"{value:.2f}"

        self.logger.info(
            "%s quadros=%d | recall=%s | mpjpe=%s | rt=%s | pck_rel=%s | pck_abs=%s | pck_root=%s | auc=%s | pcod=%s",
            tag,
            report.frames,
            fmt(report.recall),
            fmt(report.mpjpe),
            fmt(report.rt_error),
            fmt(report.pck_rel),
            fmt(report.pck_abs),
            fmt(report.pck_root),
            fmt(report.auc_rel),
            fmt(report.pcod),
        )

    # --- execuções completas ----------------------------------------------

    def run_roundtrip(
        self,
        scenes: Sequence[Scene] | None = None,
        associate: AssocMethod = "dapa",
        default_intrinsics: bool = False,
    ) -> RoundtripResult:
        """synth -> encode -> decode -> eval por quadro, agregando as contagens.

        Com `default_intrinsics` a decodificação usa f = largura e centro da imagem.
        """
        scenes = list(scenes) if scenes is not None else self.synth_frames()

        def process(item: tuple[int, Scene]) -> FrameOutcome:
            index, scene = item
            cam = scene.cam
            decode_cam = CameraIntrinsics.default(cam.width, cam.height) if default_intrinsics else cam
            stack = encode(scene, self.spec, self.profile.encoder)
            result = decode_frame(stack, decode_cam, self.spec, self.stats, self.profile.assoc, associate)
            tally = tally_frame(result.poses, scene.people, cam, self.spec, self.profile.eval, decode_cam)
            return FrameOutcome(index, scene, result.poses, tally)

        self.logger.info(
            "[DECODE] roundtrip de %d quadros | assoc=%s | intrinsecos=%s",
            len(scenes),
            associate,
            "padrao" if default_intrinsics else "verdadeiros",
        )
        frames = self._map(process, list(enumerate(scenes)), desc="roundtrip")
        report = report_from_tally(sum((f.tally for f in frames), FrameTally()), self.profile.eval)
        self._log_report("[EVAL]", report)
        return RoundtripResult(report, frames)

    def run_bench(self, people: int, repeat: int, associate: AssocMethod = "dapa") -> TimingTracker:
        """Tempo de extração + associação com mapas pré-computados."""
        cfg = replace(
            self.profile.synth,
            min_people=people,
            max_people=people,
            min_depth=6000.0,
            max_depth=12000.0,
            overlap_prob=0.0,
            truncation_prob=0.0,
            min_separation_px=0.0,
        )
        scene = synth_scene(cfg, self.spec, self.stats)
        stack = encode(scene, self.spec, self.profile.encoder)
        stride = scene.cam.width / stack.shape[1]
        tracker = TimingTracker()
        assoc = self.profile.assoc
        for index in range(repeat):
            start = time.perf_counter()
            candidates = extract_keypoints(stack.heatmaps, assoc, stride)
            middle = time.perf_counter()
            if associate == "dapa":
                depth_aware_associate(candidates, stack, self.spec, self.stats, assoc)
            else:
                associate_2d(candidates, stack, self.spec, assoc)
            end = time.perf_counter()
            tracker.add(len(scene.people), associate, index, 1000.0 * (middle - start), 1000.0 * (end - middle))
        summary = tracker.summary()
        for row in summary.itertuples():
            self.logger.info(
                "[BENCH] %s | pessoas=%d | quadros=%d | media=%.2f ms | p95=%.2f ms | max=%.2f ms",
                row.method,
                row.people,
                row.frames,
                row.mean_ms,
                row.p95_ms,
                row.max_ms,
            )
        return tracker

    def run_ablation(self, count: int, seed: int) -> list[AblationRow]:
        """Acurácia de associação DAPA vs 2DPA por família do corpus de oclusão.

        Cada caso é construído, pontuado e descartado dentro do worker.
        """
        plan = occlusion_plan(count, seed)

        def score(item: tuple[OcclusionFamily, int]) -> dict[str, tuple[int, int]]:
            family, case_seed = item
            case = build_occlusion_case(
                family, case_seed, self.spec, self.stats, self.profile.encoder, self.profile.synth
            )
            out = {}
            for method in ("dapa", "2dpa"):
                result = decode_frame(case.stack, case.scene.cam, self.spec, self.stats, self.profile.assoc, method)
                out[method] = association_accuracy(result, case.scene.people, case.scene.cam, self.spec)
            return out

        scores = self._map(score, plan, desc="ablate")
        rows = []
        for family in (*OCCLUSION_FAMILIES, "total"):
            for method in ("dapa", "2dpa"):
                picked = [s[method] for (f, _), s in zip(plan, scores) if family in ("total", f)]
                row = AblationRow(family, method, sum(c for c, _ in picked), sum(t for _, t in picked))
                rows.append(row)
                self.logger.info(
                    "[ABLATE] familia=%s | metodo=%s | acuracia=%s (%d/%d)",
                    family,
                    method,
                    "n/d" if row.accuracy is None else f"{row.accuracy:.2f}%",
                    row.correct,
                    row.total,
                )
        return rows
