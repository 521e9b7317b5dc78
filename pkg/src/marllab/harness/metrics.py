"""Metrics CSV emission and parsing."""

from __future__ import annotations

import csv
from pathlib import Path

from ..algorithms import MetricsRow

HEADER = ("step,episode,eval_return_mean,eval_return_std,"
          "policy_loss,critic_loss,joint_entropy,wall_ms")


class MetricsWriter:
    """Appends one CSV row per evaluation; header written up front."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(HEADER + "\n")
        self._fh.flush()

    def write(self, row: MetricsRow) -> None:
        self._fh.write(
            f"{row.step},{row.episode},{row.eval_return_mean!r},"
            f"{row.eval_return_std!r},{row.policy_loss!r},"
            f"{row.critic_loss!r},{row.joint_entropy!r},{row.wall_ms}\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path: str | Path) -> list[dict[str, float]]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or ",".join(reader.fieldnames) != HEADER:
            raise ValueError(f"{path}: unexpected metrics header")
        rows = [{k: float(v) for k, v in row.items()} for row in reader]
    if not rows:
        raise ValueError(f"{path}: metrics file has no rows")
    return rows
