"""Ponto de entrada do codec SMAP (linha de comando)."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable

from engine import PipelineEngine
from errors import SmapError
from logger import LOG_DIR, setup_logger
from profile_manager import ProfileManager, RunProfile
from report_generator import ReportGenerator
from repr_encoder import RepresentationStack, Scene
from scene_io import KNOWN_SKELETONS, read_camera, read_scene, write_scene
from skeleton import BoneStats, SkeletonSpec, default_bone_stats, mean_bone_lengths
from tensor_file import read_stack, write_stack

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


class CliParser(argparse.ArgumentParser):
    """Erros de uso saem com código 1 (erro de entrada)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: erro: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="smap", description="Codec SMAP de poses 3D absolutas multi-pessoa.")
    parser.add_argument("--log-dir", default=str(LOG_DIR), help="pasta do log rotativo ('' desativa)")
    parser.add_argument("--debug", action="store_true", help="log detalhado [DEBUG]")

    common = CliParser(add_help=False)
    common.add_argument(
        "--profile", help="perfil base (padrao, sobreposicao, truncamento, oclusao; ablate usa oclusao)"
    )
    common.add_argument("--config", type=Path, help="perfil JSON com overrides")
    common.add_argument("--skeleton", help="nome de esqueleto conhecido ou arquivo JSON")
    stats_source = common.add_mutually_exclusive_group()
    stats_source.add_argument("--bone-stats", type=Path, help="JSON com comprimentos médios por parte")
    stats_source.add_argument("--bone-stats-from", type=Path, help="cena JSON de onde medir os comprimentos médios")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("synth", parents=[common], help="gera uma cena sintética")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("encode", parents=[common], help="renderiza a pilha 2.5D de uma cena")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--paf-width", type=float)
    p.add_argument("--root-disk", type=float)
    p.add_argument("--stride", type=float)

    p = sub.add_parser("decode", parents=[common], help="decodifica uma pilha em poses 3D")
    p.add_argument("--stack", type=Path, required=True)
    p.add_argument("--camera", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--lambda", dest="relaxation", type=float)
    p.add_argument("--assoc", choices=("dapa", "2dpa"), default="dapa")

    p = sub.add_parser("eval", parents=[common], help="avalia predições contra GT")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, help="relatório JSON (padrão: reports/eval.json)")
    _add_eval_flags(p)

    p = sub.add_parser("roundtrip", parents=[common], help="synth -> encode -> decode -> eval")
    p.add_argument("--report", type=Path, help="relatório JSON (padrão: reports/roundtrip.json)")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--assoc", choices=("dapa", "2dpa"), default="dapa")
    p.add_argument("--lambda", dest="relaxation", type=float)
    p.add_argument("--default-intrinsics", action="store_true", help="decodifica com f = largura")
    p.add_argument("--csv", type=Path, help="métricas por quadro")
    _add_eval_flags(p)

    p = sub.add_parser("bench", parents=[common], help="tempo de extração + associação")
    p.add_argument("--people", type=int, default=20)
    p.add_argument("--repeat", type=int, default=10)
    p.add_argument("--assoc", choices=("dapa", "2dpa"), default="dapa")
    p.add_argument("--out", type=Path, help="CSV com as medições (+ _resumo.csv e sidecars de proveniência)")

    p = sub.add_parser("ablate", parents=[common], help="acurácia de associação DAPA vs 2DPA")
    p.add_argument("--report", type=Path, help="relatório JSON (padrão: reports/ablate.json)")
    p.add_argument("--count", type=int, help="casos do corpus (padrão: frames do perfil)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", type=Path)
    return parser


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pck-threshold", type=float)
    p.add_argument("--pcod-tie", type=float)
    p.add_argument("--gate-px", type=float)
    p.add_argument("--match", dest="match_method", choices=("greedy", "optimal"))
    p.add_argument("--table", type=Path, help="tabela de texto alinhada")


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    def pick(*names: str, rename: dict[str, str] | None = None) -> dict[str, Any]:
        rename = rename or {}
        return {rename.get(n, n): getattr(args, n, None) for n in names}

    return {
        "encoder": pick("sigma", "paf_width", "root_disk", "stride", rename={"root_disk": "root_disk_radius", "stride": "map_stride"}),
        "assoc": pick("relaxation"),
        "eval": pick("pck_threshold", "pcod_tie", "gate_px", "match_method"),
        "synth": pick("seed"),
        "frames": getattr(args, "frames", None),
        "skeleton": getattr(args, "skeleton", None),
    }


def load_profile(args: argparse.Namespace, default: str = "padrao") -> RunProfile:
    manager = ProfileManager()
    profile = manager.load(args.config) if args.config else manager.get_profile(args.profile or default)
    return ProfileManager({profile.name: profile}).get_profile(profile.name, _overrides(args))


def resolve_skeleton(ref: str) -> SkeletonSpec:
    if ref in KNOWN_SKELETONS:
        return KNOWN_SKELETONS[ref]
    path = Path(ref)
    if not path.exists():
        raise SmapError(f"esqueleto desconhecido: {ref} (conhecidos: {', '.join(sorted(KNOWN_SKELETONS))})")
    return SkeletonSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))


def resolve_stats(args: argparse.Namespace, spec: SkeletonSpec) -> BoneStats:
    if args.bone_stats:
        return BoneStats.from_dict(json.loads(args.bone_stats.read_text(encoding="utf-8")), spec)
    if args.bone_stats_from:
        doc = read_scene(args.bone_stats_from)
        if doc.spec.joint_names != spec.joint_names:
            raise SmapError(f"{args.bone_stats_from}: esqueleto {doc.spec.name} difere de {spec.name}")
        return mean_bone_lengths(doc.scene.people, spec)
    return default_bone_stats(spec)


def _engine(args, logger, profile: RunProfile, spec: SkeletonSpec, workers: int = 1) -> PipelineEngine:
    engine = PipelineEngine(
        logger,
        profile,
        spec,
        resolve_stats(args, spec),
        workers=workers,
        progress=sys.stderr.isatty(),
        debug_mode=args.debug,
    )
    engine.log_startup(args.command)
    return engine


def _provenance(args, profile: RunProfile, **extra: Any) -> dict[str, Any]:
    return {"command": args.command, "profile": profile.to_dict(), **extra}


def cmd_synth(args, logger) -> int:
    profile = load_profile(args)
    spec = resolve_skeleton(profile.skeleton)
    engine = _engine(args, logger, profile, spec)
    scene = engine.synth()
    write_scene(args.out, scene, spec, _provenance(args, profile))
    logger.info("[REPORT] cena gravada em %s", args.out)
    return EXIT_OK


def cmd_encode(args, logger) -> int:
    profile = load_profile(args)
    doc = read_scene(args.scene)
    engine = _engine(args, logger, profile, doc.spec)
    stack = engine.encode(doc.scene)
    provenance = _provenance(
        args,
        profile,
        encoder=asdict(profile.encoder),
        camera=doc.scene.cam.to_dict(),
        skeleton=doc.spec.to_dict(),
        channels=stack.num_channels,
    )
    write_stack(args.out, stack.to_tensor(), provenance)
    logger.info("[ENCODE] %d canais %s gravados em %s", stack.num_channels, stack.shape, args.out)
    return EXIT_OK


def cmd_decode(args, logger) -> int:
    profile = load_profile(args)
    tensor, stack_prov = read_stack(args.stack)
    if "skeleton" in stack_prov and not args.skeleton:
        spec = SkeletonSpec.from_dict(stack_prov["skeleton"])
    else:
        spec = resolve_skeleton(profile.skeleton)
    stack = RepresentationStack.from_tensor(tensor, spec)
    cam = read_camera(args.camera)
    engine = _engine(args, logger, profile, spec)
    result = engine.decode(stack, cam, args.assoc)
    provenance = _provenance(
        args, profile, assoc_method=args.assoc, bone_stats=engine.stats.to_dict(spec), stack=stack_prov
    )
    write_scene(args.out, Scene(tuple(result.poses), cam), spec, provenance)
    logger.info("[DECODE] %d pessoas gravadas em %s", len(result.poses), args.out)
    return EXIT_OK


def cmd_eval(args, logger) -> int:
    profile = load_profile(args)
    pred = read_scene(args.pred)
    gt = read_scene(args.gt)
    if pred.spec.joint_names != gt.spec.joint_names:
        raise SmapError("pred e gt usam esqueletos diferentes")
    engine = _engine(args, logger, profile, gt.spec)
    report = engine.evaluate([pred.scene.people], [gt.scene], [pred.scene.cam])
    reports = ReportGenerator()
    provenance = _provenance(args, profile, pred=str(args.pred), gt=str(args.gt))
    out = reports.write_metric_report(args.out or reports.default_path("eval.json"), report, provenance)
    if args.table:
        reports.write_table(args.table, {"eval": report}, provenance)
    logger.info("[REPORT] relatório gravado em %s", out)
    return EXIT_OK


def cmd_roundtrip(args, logger) -> int:
    profile = load_profile(args)
    spec = resolve_skeleton(profile.skeleton)
    engine = _engine(args, logger, profile, spec, workers=args.workers)
    result = engine.run_roundtrip(associate=args.assoc, default_intrinsics=args.default_intrinsics)
    reports = ReportGenerator()
    provenance = _provenance(
        args,
        profile,
        assoc_method=args.assoc,
        default_intrinsics=args.default_intrinsics,
        bone_stats=engine.stats.to_dict(spec),
    )
    out = reports.write_metric_report(args.report or reports.default_path("roundtrip.json"), result.report, provenance)
    if args.table:
        reports.write_table(args.table, {args.assoc.upper(): result.report}, provenance)
    if args.csv:
        reports.write_frames_csv(args.csv, result.rows(), provenance)
    logger.info("[REPORT] relatório gravado em %s", out)
    return EXIT_OK


def cmd_bench(args, logger) -> int:
    profile = load_profile(args)
    spec = resolve_skeleton(profile.skeleton)
    engine = _engine(args, logger, profile, spec)
    tracker = engine.run_bench(args.people, args.repeat, args.assoc)
    if args.out:
        provenance = _provenance(args, profile, people=args.people, repeat=args.repeat, assoc_method=args.assoc)
        summary = args.out.with_name(args.out.stem + "_resumo.csv")
        tracker.export_csv(args.out)
        tracker.export_summary(summary)
        reports = ReportGenerator()
        for target in (args.out, summary):
            reports.write_provenance(target, provenance)
        logger.info("[REPORT] medições gravadas em %s", args.out)
    return EXIT_OK


def cmd_ablate(args, logger) -> int:
    profile = load_profile(args, default="oclusao")
    spec = resolve_skeleton(profile.skeleton)
    engine = _engine(args, logger, profile, spec, workers=args.workers)
    count = args.count or profile.frames
    seed = profile.synth.seed
    rows = engine.run_ablation(count, seed)
    provenance = _provenance(args, profile, count=count, seed=seed)
    payload = {
        "ablation": [{**asdict(r), "accuracy": r.accuracy} for r in rows],
        "provenance": provenance,
    }
    reports = ReportGenerator()
    out = reports.write_json(args.report or reports.default_path("ablate.json"), payload)
    if args.csv:
        reports.write_ablation(args.csv, payload["ablation"], provenance)
    logger.info("[REPORT] ablação gravada em %s", out)
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace, logging.Logger], int]] = {
    "synth": cmd_synth,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "roundtrip": cmd_roundtrip,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger = setup_logger(
        log_dir=Path(args.log_dir) if args.log_dir else None,
        level=logging.DEBUG if args.debug else logging.INFO,
    )
    try:
        return COMMANDS[args.command](args, logger)
    except (SmapError, OSError, json.JSONDecodeError) as exc:
        logger.error("[ERRO] %s", exc)
        return EXIT_INPUT
    except Exception as exc:
        logger.exception("[ERRO] falha interna: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
