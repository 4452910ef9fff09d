"""Hierarquia de exceções do codec SMAP."""
from __future__ import annotations


class SmapError(Exception):
    """Erro base do projeto; o CLI trata como erro de entrada (saída 1)."""


class DomainError(SmapError, ValueError):
    """Valor fora do domínio geométrico (profundidade <= 0, segmento nulo...)."""


class SkeletonError(SmapError, ValueError):
    """Esqueleto inválido ou estatísticas de osso sem amostras."""


class ConfigError(SmapError, ValueError):
    """Configuração inválida ou restrições de síntese impossíveis."""


class ShapeMismatchError(SmapError, ValueError):
    """Pilhas de representações com formatos incompatíveis."""


class TensorFormatError(SmapError):
    """Arquivo de tensor corrompido; `offset` aponta o byte do problema."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (offset={offset})")
        self.offset = offset


class SceneSchemaError(SmapError):
    """Documento de cena fora do esquema; `path` é o caminho JSON."""

    def __init__(self, message: str, path: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class UndefinedMetricError(SmapError):
    """Métrica sem definição para a entrada (casamento vazio, etc.)."""
