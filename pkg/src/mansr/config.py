"""Configuration settings."""

import os
from pathlib import Path
from dataclasses import dataclass, field
from dotenv import load_dotenv

project_root = Path(__file__).parent.parent.parent
env_path = project_root / ".env"
load_dotenv(env_path if env_path.exists() else None)


def _default_threads() -> int:
    requested = int(os.getenv("MAN_THREADS", "0") or 0)
    if requested > 0:
        return requested
    return min(8, os.cpu_count() or 1)


@dataclass
class RuntimeConfig:
    """Numerical runtime settings."""
    threads: int = field(default_factory=_default_threads)
    log_level: str = os.getenv("MAN_LOG_LEVEL", "INFO")

    @property
    def deterministic(self) -> bool:
        return self.threads == 1


@dataclass
class TelemetryConfig:
    """OpenTelemetry configuration. Empty endpoints disable export."""
    endpoint: str = os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT", "")
    logs_endpoint: str = os.getenv("OTEL_EXPORTER_OTLP_LOGS_ENDPOINT", "")
    service_name: str = os.getenv("OTEL_SERVICE_NAME", "mansr")


runtime = RuntimeConfig()
telemetry = TelemetryConfig()
