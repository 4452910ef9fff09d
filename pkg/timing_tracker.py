"""Registro de tempos de associação e estatísticas por número de pessoas."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import pandas as pd


@dataclass(frozen=True)
class TimingPoint:
    people: int
    method: str
    repeat: int
    extract_ms: float
    associate_ms: float

    @property
    def total_ms(self) -> float:
        return self.extract_ms + self.associate_ms


class TimingTracker:
    """Acumula medições do benchmark de associação."""

    def __init__(self) -> None:
        self.history: list[TimingPoint] = []

    def add(self, people: int, method: str, repeat: int, extract_ms: float, associate_ms: float) -> None:
        self.history.append(TimingPoint(people, method, repeat, extract_ms, associate_ms))

    def frame(self) -> pd.DataFrame:
        rows = [{**asdict(p), "total_ms": p.total_ms} for p in self.history]
        columns = ["people", "method", "repeat", "extract_ms", "associate_ms", "total_ms"]
        return pd.DataFrame(rows, columns=columns)

    def summary(self) -> pd.DataFrame:
        """Média, p95 e máximo do tempo total por (método, pessoas)."""
        df = self.frame()
        if df.empty:
            return pd.DataFrame(columns=["method", "people", "frames", "mean_ms", "p95_ms", "max_ms"])
        grouped = df.groupby(["method", "people"])["total_ms"]
        out = grouped.agg(frames="count", mean_ms="mean", max_ms="max")
        out["p95_ms"] = grouped.quantile(0.95)
        return out.reset_index()[["method", "people", "frames", "mean_ms", "p95_ms", "max_ms"]]

    def export_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False, float_format="%.4f")

    def export_summary(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.summary().to_csv(path, index=False, float_format="%.4f")
