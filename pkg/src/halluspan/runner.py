"""Batch execution over a dataset with a bounded worker pool."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .model import Prediction, Sample, write_predictions

logger = logging.getLogger(__name__)

Detector = Callable[[Sample, list], Prediction]


@dataclass
class SampleOutcome:
    id: str
    prediction: Prediction | None = None
    error: str | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class RunResult:
    outcomes: list[SampleOutcome]

    @property
    def predictions(self) -> list[Prediction]:
        return [o.prediction for o in self.outcomes if o.prediction is not None]

    @property
    def failed(self) -> list[SampleOutcome]:
        return [o for o in self.outcomes if o.prediction is None]

    def manifest(self, config_digest: str, method: str) -> dict:
        return {
            "config_sha256": config_digest,
            "method": method,
            "counts": {
                "samples": len(self.outcomes),
                "succeeded": len(self.predictions),
                "failed": len(self.failed),
                "warnings": sum(len(o.warnings) for o in self.outcomes),
            },
            "failures": [{"id": o.id, "error": o.error} for o in self.failed],
            "warnings": [{"id": o.id, "message": w} for o in self.outcomes for w in o.warnings],
        }


def run_samples(samples: Sequence[Sample], detect: Detector, workers: int = 1) -> RunResult:
    """Apply ``detect`` to every sample; a failing sample never stops the run.

    Outcomes keep the input order regardless of completion order.
    """

    def one(sample: Sample) -> SampleOutcome:
        outcome = SampleOutcome(sample.id)
        try:
            outcome.prediction = detect(sample, outcome.warnings)
        except Exception as exc:  # noqa: BLE001 - recorded per sample
            outcome.error = f"{type(exc).__name__}: {exc}"
            logger.error("sample %s failed: %s", sample.id, outcome.error)
        return outcome

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return RunResult(list(pool.map(one, samples)))


def manifest_path(output: Path) -> Path:
    return output.with_name(output.stem + ".manifest.json")


def write_run(result: RunResult, output: Path, config_digest: str, method: str) -> Path:
    output.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(result.predictions, output)
    path = manifest_path(output)
    path.write_text(
        json.dumps(result.manifest(config_digest, method), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    return path
