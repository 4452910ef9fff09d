import json
from pathlib import Path

import pytest

from errors import ConfigError
from profile_manager import DEFAULT_PROFILES, ProfileManager, RunProfile

CONFIG = Path(__file__).resolve().parent.parent / "config"


def test_builtin_profiles():
    manager = ProfileManager()
    assert manager.names == ["oclusao", "padrao", "sobreposicao", "truncamento"]
    overlap = manager.get_profile("sobreposicao")
    assert overlap.synth.overlap_prob == 1.0
    assert overlap.frames == 100
    assert manager.get_profile() is DEFAULT_PROFILES["padrao"]


def test_unknown_profile_lists_available():
    with pytest.raises(ConfigError, match="padrao"):
        ProfileManager().get_profile("turbo")


def test_section_overrides_keep_other_fields():
    profile = ProfileManager().get_profile("padrao", {"assoc": {"relaxation": 2.0, "nms_radius": None}, "frames": 10})
    assert profile.assoc.relaxation == 2.0
    assert profile.assoc.nms_radius == DEFAULT_PROFILES["padrao"].assoc.nms_radius
    assert profile.frames == 10
    assert profile.encoder == DEFAULT_PROFILES["padrao"].encoder


def test_override_values_are_validated():
    manager = ProfileManager()
    with pytest.raises(ConfigError):
        manager.get_profile("padrao", {"encoder": {"sigma": -1.0}})
    with pytest.raises(ConfigError, match="sigmaa"):
        manager.get_profile("padrao", {"encoder": {"sigmaa": 1.0}})
    with pytest.raises(ConfigError, match="turbo"):
        manager.get_profile("padrao", {"turbo": True})
    with pytest.raises(ConfigError):
        RunProfile("x", frames=0)


def test_load_shipped_configs():
    manager = ProfileManager()
    default = manager.load(CONFIG / "default_run.json")
    assert default.name == "padrao-arquivo"
    assert default.encoder == DEFAULT_PROFILES["padrao"].encoder
    assert default.assoc == DEFAULT_PROFILES["padrao"].assoc
    overlap = manager.load(CONFIG / "overlap_run.json")
    assert overlap.name == "sobreposicao"
    assert overlap.synth.seed == 7
    assert overlap.synth.overlap_prob == 1.0


def test_load_rejects_non_object(tmp_path):
    path = tmp_path / "lista.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        ProfileManager().load(path)


def test_dump_and_load_round_trip(tmp_path):
    manager = ProfileManager()
    profile = manager.get_profile("truncamento", {"synth": {"seed": 9}})
    path = tmp_path / "perfil.json"
    ProfileManager.dump(profile, path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["synth"]["truncation_prob"] == 0.5
    assert manager.get_profile("padrao", data) == profile
