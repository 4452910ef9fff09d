"""Geração dos relatórios de métricas: JSON, tabela de texto e CSV por quadro."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Sequence

import pandas as pd

from eval_metrics import MetricReport
from utils import canonical_json, sidecar_path

TABLE_COLUMNS = (
    ("Recall", "recall"),
    ("PCK_root", "pck_root"),
    ("PCK_abs", "pck_abs"),
    ("PCK_rel", "pck_rel"),
    ("PCOD", "pcod"),
)


class ReportGenerator:
    """Grava artefatos no caminho pedido; `base_dir` só vale para nomes padrão."""

    def __init__(self, base_dir: str | Path = "reports") -> None:
        self.base = Path(base_dir)

    def default_path(self, name: str) -> Path:
        return self.base / name

    @staticmethod
    def _prepare(path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_json(self, path: str | Path, payload: Mapping[str, Any]) -> Path:
        """Grava com chaves ordenadas e sem carimbo de tempo (saída reprodutível)."""
        target = self._prepare(path)
        target.write_text(canonical_json(dict(payload)), encoding="utf-8")
        return target

    def write_provenance(self, path: str | Path, provenance: Mapping[str, Any]) -> Path:
        """Sidecar `<arquivo>.json` para artefatos que não carregam a própria configuração."""
        return self.write_json(sidecar_path(Path(path)), {"provenance": dict(provenance)})

    def write_metric_report(self, path: str | Path, report: MetricReport, provenance: Mapping[str, Any]) -> Path:
        return self.write_json(path, {"metrics": report.to_dict(), "provenance": dict(provenance)})

    @staticmethod
    def format_table(reports: Mapping[str, MetricReport]) -> str:
        """Tabela alinhada com as colunas Recall, PCK_root, PCK_abs, PCK_rel e PCOD."""
        rows = []
        for label, report in reports.items():
            values = report.to_dict()
            rows.append({"": label, **{title: values[key] for title, key in TABLE_COLUMNS}})
        frame = pd.DataFrame(rows, columns=["", *(title for title, _ in TABLE_COLUMNS)])
        return frame.to_string(index=False, na_rep="n/d", float_format=lambda v: f"{v:.2f}") + "\n"

    def write_table(
        self, path: str | Path, reports: Mapping[str, MetricReport], provenance: Mapping[str, Any] | None = None
    ) -> Path:
        target = self._prepare(path)
        target.write_text(self.format_table(reports), encoding="utf-8")
        if provenance is not None:
            self.write_provenance(target, provenance)
        return target

    def write_frames_csv(
        self, path: str | Path, rows: Sequence[Mapping[str, Any]], provenance: Mapping[str, Any] | None = None
    ) -> Path:
        target = self._prepare(path)
        pd.DataFrame(list(rows)).to_csv(target, index=False, float_format="%.6f")
        if provenance is not None:
            self.write_provenance(target, provenance)
        return target

    def write_ablation(
        self, path: str | Path, rows: Sequence[Mapping[str, Any]], provenance: Mapping[str, Any] | None = None
    ) -> Path:
        target = self._prepare(path)
        pd.DataFrame(list(rows)).to_csv(target, index=False, float_format="%.4f")
        if provenance is not None:
            self.write_provenance(target, provenance)
        return target
