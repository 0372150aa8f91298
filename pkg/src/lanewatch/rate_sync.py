"""Match the processed frame rate to the machine's processing speed.

After every processed frame the measured processing time feeds an
exponential moving average ``dt``. When the machine is slower than the
stream (``1/dt < fps``) the controller skips ``K = ceil(fps - 1/dt)``
incoming frames per processed frame, otherwise none.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

from lanewatch.errors import ConfigError

logger = logging.getLogger(__name__)

# Absorbs float noise such as 1/0.1 landing a hair off 10 before the ceiling.
_CEIL_TOL = 1e-9


def skip_count(fps: float, dt: float) -> int:
    rate = 1.0 / dt
    if rate - fps < 0:
        return max(0, math.ceil(fps - rate - _CEIL_TOL))
    return 0


@dataclass
class RateState:
    fps: float
    ema_alpha: float = 0.2
    delta_t_ema: Optional[float] = None
    K: int = 0
    last_processed: Optional[int] = None

    def __post_init__(self):
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ConfigError(f"ema_alpha must be in (0, 1], got {self.ema_alpha}")

    def record_and_update(self, measured_dt: float) -> int:
        """Fold one processing-time sample into the average; return the new K.

        Non-positive samples are rejected and leave the state untouched.
        """
        if not measured_dt > 0 or not math.isfinite(measured_dt):
            logger.warning("ignoring invalid processing time %r", measured_dt)
            return self.K
        if self.delta_t_ema is None:
            self.delta_t_ema = float(measured_dt)
        else:
            a = self.ema_alpha
            self.delta_t_ema = a * measured_dt + (1.0 - a) * self.delta_t_ema
        self.K = skip_count(self.fps, self.delta_t_ema)
        return self.K

    def should_process(self, frame_index: int) -> bool:
        """Decide whether ``frame_index`` is processed; marks it if so."""
        if self.last_processed is None or frame_index - self.last_processed > self.K:
            self.last_processed = frame_index
            return True
        return False

    def snapshot(self) -> dict:
        return {"K": self.K, "delta_t_ema": self.delta_t_ema}
