"""
Heralded Fock Tomography – Audit Module

Produces a structured JSON audit report for every CLI run, tracking the
status, duration, key figures, warnings and errors of each pipeline stage.
"""
import json
import logging
import threading
import time
from contextlib import contextmanager
from pathlib import Path

import config

logger = logging.getLogger(__name__)


class _WarningCollector(logging.Handler):
    """Captures WARNING records emitted while a stage runs."""

    def __init__(self) -> None:
        super().__init__(level=logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


class AuditLog:
    """
    Collects per-stage audit entries during a CLI run and writes a JSON
    report at the end. The report holds no wall-clock timestamps; stage
    durations are the only run-dependent values.
    """

    def __init__(self, command: str) -> None:
        self._command = command
        self._entries: list[dict] = []
        self._lock = threading.Lock()

    # ── Per-stage tracking ────────────────────────────────────────────────────

    def add_entry(
        self,
        stage: str,
        *,
        status: str = "success",
        duration_s: float = 0.0,
        figures: dict | None = None,
        warnings: list[str] | None = None,
        error: str | None = None,
    ) -> None:
        """
        Records the result of one pipeline stage.

        Args:
            stage:      Stage name, e.g. "herald" or "reconstruct".
            status:     "success" or "failed".
            duration_s: Wall time spent in the stage.
            figures:    Key numbers produced (rates, iterations, fidelity …).
            warnings:   Warning messages logged during the stage.
            error:      Fatal error message (if status == "failed").
        """
        entry = {
            "stage": stage,
            "status": status,
            "duration_s": round(duration_s, 3),
            "figures": figures or {},
            "warnings": warnings or [],
            "error": error,
        }
        with self._lock:
            self._entries.append(entry)

    @contextmanager
    def stage(self, name: str):
        """
        Context manager timing a stage and capturing its warnings. Yields a
        dict the caller fills with figures; failures are recorded and re-raised.
        """
        figures: dict = {}
        collector = _WarningCollector()
        root = logging.getLogger()
        root.addHandler(collector)
        started = time.perf_counter()
        try:
            yield figures
        except Exception as exc:
            self.add_entry(
                name,
                status="failed",
                duration_s=time.perf_counter() - started,
                figures=figures,
                warnings=collector.messages,
                error=f"{type(exc).__name__}: {exc}",
            )
            raise
        finally:
            root.removeHandler(collector)
        self.add_entry(
            name,
            duration_s=time.perf_counter() - started,
            figures=figures,
            warnings=collector.messages,
        )

    # ── Report generation ─────────────────────────────────────────────────────

    def write_report(self, output_dir: Path) -> Path:
        """
        Writes the full audit report as `audit_report.json` in output_dir.

        Returns:
            Path to the written report file.
        """
        output_dir.mkdir(parents=True, exist_ok=True)
        failures = [e for e in self._entries if e["status"] == "failed"]
        report = {
            "command": self._command,
            "summary": {
                "total_stages": len(self._entries),
                "successful": len(self._entries) - len(failures),
                "failed": len(failures),
                "total_warnings": sum(len(e["warnings"]) for e in self._entries),
            },
            "stages": self._entries,
        }
        report_path = output_dir / config.AUDIT_REPORT_NAME
        report_path.write_text(json.dumps(report, indent=2, ensure_ascii=False), encoding="utf-8")
        logger.info("Audit report written: %s", report_path)
        return report_path

    # ── Helpers ───────────────────────────────────────────────────────────────

    @property
    def entries(self) -> list[dict]:
        with self._lock:
            return list(self._entries)
