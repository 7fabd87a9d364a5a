"""Structured logging configuration with optional OpenTelemetry OTLP export."""

import logging
import sys

import structlog
from opentelemetry import _logs
from opentelemetry.sdk._logs import LoggerProvider, LoggingHandler
from opentelemetry.sdk._logs.export import BatchLogRecordProcessor
from opentelemetry.exporter.otlp.proto.http._log_exporter import OTLPLogExporter
from opentelemetry.sdk.resources import Resource, SERVICE_NAME
from opentelemetry.semconv.resource import ResourceAttributes

from . import __version__
from .config import runtime, telemetry

_configured = False


def setup_logging(level: str | None = None) -> None:
    """Configure structlog for console output and attach OTLP export when an endpoint is set."""
    global _configured
    level_name = (level or runtime.log_level).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)

    if telemetry.logs_endpoint and not _configured:
        resource = Resource(attributes={
            SERVICE_NAME: telemetry.service_name,
            ResourceAttributes.SERVICE_VERSION: __version__,
        })
        provider = LoggerProvider(resource=resource)
        exporter = OTLPLogExporter(endpoint=telemetry.logs_endpoint)
        provider.add_log_record_processor(BatchLogRecordProcessor(exporter))
        _logs.set_logger_provider(provider)
        logging.getLogger().addHandler(LoggingHandler())

    logging.getLogger().setLevel(numeric_level)

    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    _configured = True
