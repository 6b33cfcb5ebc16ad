"""
Optional MLflow experiment tracking for training runs.

Training never depends on the tracker: without a tracking URI every call
is a no-op.
"""

import logging
import os
from typing import Dict, Optional

logger = logging.getLogger(__name__)


def _file_uri(path: str) -> str:
    # Windows paths need forward slashes in a file URI
    path = os.path.abspath(path).replace("\\", "/")
    return f"file:///{path.lstrip('/')}"


class RunTracker:
    """Thin wrapper over an MLflow run; disabled when `tracking_uri` is None."""

    def __init__(self, tracking_uri: Optional[str] = None, experiment: str = "gtp-offline-rl"):
        self.tracking_uri = tracking_uri
        self.experiment = experiment
        self._active = False

    @property
    def enabled(self) -> bool:
        return self.tracking_uri is not None

    def start(self, run_name: Optional[str] = None) -> "RunTracker":
        if not self.enabled:
            return self
        import mlflow

        uri = self.tracking_uri
        if "://" not in uri:
            uri = _file_uri(uri)
        mlflow.set_tracking_uri(uri)
        mlflow.set_experiment(self.experiment)  # creates the experiment if needed
        mlflow.start_run(run_name=run_name)
        self._active = True
        logger.info("mlflow tracking to %s (experiment %s)", uri, self.experiment)
        return self

    def log_params(self, params: Dict[str, object]) -> None:
        if self._active:
            import mlflow

            mlflow.log_params({k: str(v) for k, v in params.items()})

    def log_metrics(self, metrics: Dict[str, float], step: int) -> None:
        if self._active:
            import mlflow

            clean = {k: float(v) for k, v in metrics.items() if v is not None and v == v}
            mlflow.log_metrics(clean, step=step)

    def log_artifact(self, path: str) -> None:
        if self._active:
            import mlflow

            mlflow.log_artifact(path)

    def end(self, status: str = "FINISHED") -> None:
        if self._active:
            import mlflow

            mlflow.end_run(status=status)
            self._active = False

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        self.end("FAILED" if exc_type else "FINISHED")
        return False
