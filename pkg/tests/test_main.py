import json

import pytest

from main import EXIT_INPUT, EXIT_OK, build_parser, main
from scene_io import read_scene
from skeleton import mean_bone_lengths
from tensor_file import read_stack
from utils import sidecar_path


def run(*argv):
    return main(["--log-dir", "", *map(str, argv)])


def test_synth_encode_decode_eval(tmp_path):
    gt = tmp_path / "gt.json"
    stack = tmp_path / "gt.smap"
    pred = tmp_path / "pred.json"
    report = tmp_path / "eval.json"
    table = tmp_path / "eval.txt"
    assert run("synth", "--out", gt, "--seed", 21) == EXIT_OK
    assert run("encode", "--scene", gt, "--out", stack) == EXIT_OK
    assert run("decode", "--stack", stack, "--camera", gt, "--out", pred) == EXIT_OK
    assert run("eval", "--pred", pred, "--gt", gt, "--out", report, "--table", table) == EXIT_OK

    tensor, provenance = read_stack(stack)
    assert tensor.shape == (58, 512, 832)
    assert provenance["skeleton"]["name"] == "default-15"
    assert provenance["channels"] == 58
    doc = read_scene(pred)
    assert doc.provenance["assoc_method"] == "dapa"
    assert len(doc.scene.people) == len(read_scene(gt).scene.people)

    data = json.loads(report.read_text(encoding="utf-8"))
    assert data["metrics"]["recall"] == 100.0
    assert data["metrics"]["mpjpe"] <= 20.0
    assert data["provenance"]["command"] == "eval"
    assert table.read_text(encoding="utf-8").splitlines()[1].split()[0] == "eval"


def test_half_body_skeleton_through_cli(tmp_path):
    gt = tmp_path / "gt.json"
    stack = tmp_path / "gt.smap"
    assert run("synth", "--out", gt, "--skeleton", "half-body-8", "--seed", 3) == EXIT_OK
    assert read_scene(gt).spec.name == "half-body-8"
    assert run("encode", "--scene", gt, "--out", stack) == EXIT_OK
    assert read_stack(stack)[0].shape[0] == 4 * 8 - 2


def test_roundtrip_report_is_reproducible(tmp_path):
    common = ("roundtrip", "--frames", 3, "--seed", 4)
    first, second, pooled = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    csv = tmp_path / "quadros.csv"
    assert run(*common, "--report", first, "--csv", csv) == EXIT_OK
    assert run(*common, "--report", second) == EXIT_OK
    assert run(*common, "--report", pooled, "--workers", 2) == EXIT_OK
    assert first.read_bytes() == second.read_bytes() == pooled.read_bytes()
    assert len(csv.read_text(encoding="utf-8").splitlines()) == 4


def test_config_file_and_overrides(tmp_path):
    config = tmp_path / "perfil.json"
    config.write_text(json.dumps({"base": "padrao", "frames": 2, "assoc": {"relaxation": 2.0}}), encoding="utf-8")
    report = tmp_path / "r.json"
    assert run("roundtrip", "--config", config, "--report", report, "--lambda", 1.8, "--match", "optimal") == EXIT_OK
    profile = json.loads(report.read_text(encoding="utf-8"))["provenance"]["profile"]
    assert profile["frames"] == 2
    assert profile["assoc"]["relaxation"] == 1.8
    assert profile["eval"]["match_method"] == "optimal"


def test_ablate_and_bench_outputs(tmp_path):
    report, csv = tmp_path / "ablacao.json", tmp_path / "ablacao.csv"
    assert run("ablate", "--report", report, "--count", 3, "--csv", csv) == EXIT_OK
    data = json.loads(report.read_text(encoding="utf-8"))
    rows = data["ablation"]
    assert {r["method"] for r in rows} == {"dapa", "2dpa"}
    assert all("accuracy" in r for r in rows)
    assert data["provenance"]["profile"]["name"] == "oclusao"
    assert json.loads(sidecar_path(csv).read_text(encoding="utf-8"))["provenance"] == data["provenance"]
    bench = tmp_path / "bench.csv"
    assert run("bench", "--people", 4, "--repeat", 2, "--out", bench) == EXIT_OK
    summary = tmp_path / "bench_resumo.csv"
    assert summary.exists()
    for target in (bench, summary):
        provenance = json.loads(sidecar_path(target).read_text(encoding="utf-8"))["provenance"]
        assert provenance["command"] == "bench"
        assert provenance["people"] == 4
        assert provenance["profile"]["name"] == "padrao"


def test_ablate_case_count_comes_from_profile(tmp_path):
    config = tmp_path / "oclusao.json"
    config.write_text(json.dumps({"base": "oclusao", "frames": 3, "synth": {"seed": 5}}), encoding="utf-8")
    report = tmp_path / "ablacao.json"
    assert run("ablate", "--config", config, "--report", report) == EXIT_OK
    data = json.loads(report.read_text(encoding="utf-8"))
    assert (data["provenance"]["count"], data["provenance"]["seed"]) == (3, 5)
    total = {r["method"]: r["total"] for r in data["ablation"] if r["family"] == "total"}
    assert total["dapa"] == total["2dpa"] > 0


def test_bare_output_names_are_written_in_place(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("synth", "--out", "gt.json", "--seed", 2) == EXIT_OK
    argv = ("eval", "--pred", "gt.json", "--gt", "gt.json", "--out", "report.json", "--table", "tabela.txt")
    assert run(*argv) == EXIT_OK
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "tabela.txt").exists()
    assert not (tmp_path / "reports").exists()
    assert run("eval", "--pred", "gt.json", "--gt", "gt.json") == EXIT_OK
    assert (tmp_path / "reports" / "eval.json").exists()


def test_bone_stats_measured_from_scene(tmp_path):
    gt, stack, pred = tmp_path / "gt.json", tmp_path / "gt.smap", tmp_path / "pred.json"
    assert run("synth", "--out", gt, "--seed", 21) == EXIT_OK
    assert run("encode", "--scene", gt, "--out", stack) == EXIT_OK
    assert run("decode", "--stack", stack, "--camera", gt, "--out", pred, "--bone-stats-from", gt) == EXIT_OK
    doc = read_scene(gt)
    expected = mean_bone_lengths(doc.scene.people, doc.spec).to_dict(doc.spec)
    assert read_scene(pred).provenance["bone_stats"] == expected
    half = tmp_path / "half.json"
    assert run("synth", "--out", half, "--skeleton", "half-body-8") == EXIT_OK
    assert run("decode", "--stack", stack, "--camera", gt, "--out", pred, "--bone-stats-from", half) == EXIT_INPUT

def test_missing_input_exits_with_input_error(tmp_path):
    assert run("encode", "--scene", tmp_path / "nada.json", "--out", tmp_path / "x.smap") == EXIT_INPUT
    assert run("synth", "--out", tmp_path / "x.json", "--skeleton", "centopeia") == EXIT_INPUT
    assert run("synth", "--out", tmp_path / "x.json", "--profile", "turbo") == EXIT_INPUT


def test_corrupted_stack_is_an_input_error(tmp_path):
    gt, stack = tmp_path / "gt.json", tmp_path / "gt.smap"
    assert run("synth", "--out", gt) == EXIT_OK
    assert run("encode", "--scene", gt, "--out", stack) == EXIT_OK
    data = bytearray(stack.read_bytes())
    data[40] ^= 0xFF
    stack.write_bytes(bytes(data))
    assert run("decode", "--stack", stack, "--camera", gt, "--out", tmp_path / "p.json") == EXIT_INPUT


def test_eval_rejects_different_skeletons(tmp_path):
    full, half = tmp_path / "full.json", tmp_path / "half.json"
    assert run("synth", "--out", full) == EXIT_OK
    assert run("synth", "--out", half, "--skeleton", "half-body-8") == EXIT_OK
    assert run("eval", "--pred", half, "--gt", full, "--out", tmp_path / "r.json") == EXIT_INPUT


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["voar"],
        ["decode", "--stack", "x"],
        ["roundtrip", "--report", "r", "--assoc", "3d"],
        ["synth", "--out", "x", "--bone-stats", "a.json", "--bone-stats-from", "b.json"],
    ],
)
def test_usage_errors_exit_with_code_1(argv):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(argv)
    assert info.value.code == EXIT_INPUT


def test_eval_of_ground_truth_against_itself_is_perfect(tmp_path):
    gt, report = tmp_path / "gt.json", tmp_path / "r.json"
    assert run("synth", "--out", gt, "--seed", 6) == EXIT_OK
    assert run("eval", "--pred", gt, "--gt", gt, "--out", report) == EXIT_OK
    metrics = json.loads(report.read_text(encoding="utf-8"))["metrics"]
    assert metrics["recall"] == 100.0
    assert metrics["mpjpe"] == 0.0
    assert metrics["rt_error"] == 0.0
    assert metrics["pck_abs"] == metrics["pck_rel"] == metrics["auc_rel"] == 100.0
    assert metrics["pcod"] in (100.0, None)
