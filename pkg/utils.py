"""Funções utilitárias compartilhadas."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from errors import ConfigError

# Resolução de entrada da rede (832x512) usada como padrão dos mapas.
DEFAULT_IMAGE_WIDTH = 832
DEFAULT_IMAGE_HEIGHT = 512


def require_positive(name: str, value: float, error_cls: type[Exception] = ConfigError) -> None:
    """Valida que `value` é finito e estritamente positivo."""
    if not math.isfinite(value) or value <= 0:
        raise error_cls(f"{name} deve ser positivo, recebido {value!r}")


def nearest_pixel(coords: np.ndarray | float) -> np.ndarray:
    """Arredonda coordenadas contínuas para o pixel mais próximo (meio sobe)."""
    return np.floor(np.asarray(coords, dtype=np.float64) + 0.5).astype(np.int64)


def segment_samples(a: np.ndarray, b: np.ndarray, count: int) -> np.ndarray:
    """Retorna `count` pontos igualmente espaçados de `a` até `b` (inclusive).

    `a` e `b` podem ter dimensões extras à esquerda: (..., 2) -> (..., count, 2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.linspace(0.0, 1.0, count)
    return a[..., None, :] + (b - a)[..., None, :] * t[:, None]


def lookup_nearest(field: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Lê `field[..., y, x]` no pixel mais próximo de cada ponto (x, y).

    Pontos fora do mapa leem zero.
    """
    height, width = field.shape[-2:]
    px = nearest_pixel(points[..., 0])
    py = nearest_pixel(points[..., 1])
    inside = (px >= 0) & (px < width) & (py >= 0) & (py < height)
    cx = np.clip(px, 0, width - 1)
    cy = np.clip(py, 0, height - 1)
    values = field[..., cy, cx]
    return np.where(inside, values, 0.0)


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Sementes independentes por quadro, estáveis para qualquer ordem de execução."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def canonical_json(payload: Any) -> str:
    """Serialização determinística (chaves ordenadas) para artefatos."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def sidecar_path(path: Path) -> Path:
    """`<arquivo>.json` ao lado do artefato, com a proveniência."""
    path = Path(path)
    return path.with_name(path.name + ".json")
