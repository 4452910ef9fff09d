"""Gestão de perfis de execução (encoder, associação, avaliação e síntese)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict

from errors import ConfigError
from eval_metrics import EvalConfig
from pose_decoder import AssocConfig
from repr_encoder import EncoderConfig
from scene_synth import SynthConfig
from utils import canonical_json

_SECTIONS = {
    "encoder": EncoderConfig,
    "assoc": AssocConfig,
    "eval": EvalConfig,
    "synth": SynthConfig,
}
_SCALARS = ("frames", "skeleton")


@dataclass(frozen=True)
class RunProfile:
    name: str
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    assoc: AssocConfig = field(default_factory=AssocConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    frames: int = 200
    skeleton: str = "default-15"

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ConfigError("frames deve ser >= 1")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULT_PROFILES: Dict[str, RunProfile] = {
    "padrao": RunProfile("padrao"),
    "sobreposicao": RunProfile("sobreposicao", synth=SynthConfig(min_people=2, overlap_prob=1.0), frames=100),
    "truncamento": RunProfile("truncamento", synth=SynthConfig(truncation_prob=0.5), frames=100),
    # ablate: frames é o número de casos do corpus de oclusão.
    "oclusao": RunProfile("oclusao", frames=100),
}


def _build_section(name: str, base: Any, overrides: dict[str, Any]) -> Any:
    cls = _SECTIONS[name]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(f"chaves desconhecidas em {name}: {', '.join(unknown)}")
    data = asdict(base)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**data)


class ProfileManager:
    """Fornece o perfil selecionado com possibilidade de ajustes pontuais."""

    def __init__(self, profiles: Dict[str, RunProfile] | None = None) -> None:
        self._profiles = dict(profiles or DEFAULT_PROFILES)

    @property
    def names(self) -> list[str]:
        return sorted(self._profiles)

    def get_profile(self, name: str = "padrao", overrides: dict[str, Any] | None = None) -> RunProfile:
        """Perfil `name` com overrides por seção ({"assoc": {"relaxation": 2.0}, "frames": 10})."""
        if name not in self._profiles:
            raise ConfigError(f"perfil desconhecido: {name} (disponíveis: {', '.join(self.names)})")
        profile = self._profiles[name]
        if not overrides:
            return profile
        unknown = sorted(set(overrides) - set(_SECTIONS) - set(_SCALARS) - {"name", "base"})
        if unknown:
            raise ConfigError(f"chaves desconhecidas no perfil: {', '.join(unknown)}")
        sections = {
            key: _build_section(key, getattr(profile, key), overrides.get(key) or {}) for key in _SECTIONS
        }
        scalars = {key: getattr(profile, key) for key in _SCALARS}
        scalars.update({key: overrides[key] for key in _SCALARS if overrides.get(key) is not None})
        return RunProfile(name=overrides.get("name") or profile.name, **sections, **scalars)

    def load(self, path: Path) -> RunProfile:
        """Perfil JSON: {"base": "padrao", "synth": {...}, ...}; seções omitidas herdam a base."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: objeto JSON esperado")
        return self.get_profile(data.get("base", "padrao"), data)

    @staticmethod
    def dump(profile: RunProfile, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(profile.to_dict()), encoding="utf-8")
