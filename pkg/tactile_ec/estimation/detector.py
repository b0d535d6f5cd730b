import logging
from dataclasses import dataclass
from typing import List, Optional

from tactile_ec.core.config import settings
from tactile_ec.estimation.state import ContactFormation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitionEvent:
    timestep: int
    source: ContactFormation
    target: ContactFormation
    residual: float
    debounce_count: int


class TransitionDetector:
    """Debounced threshold on the whitened torque residual stream"""

    def __init__(self, threshold: Optional[float] = None, debounce: Optional[int] = None):
        self.threshold = settings.DETECTION_THRESHOLD if threshold is None else threshold
        self.debounce = settings.DEBOUNCE if debounce is None else debounce
        self.events: List[TransitionEvent] = []
        self._count = 0
        self._step = 0

    def reset(self):
        self.events = []
        self._count = 0
        self._step = 0

    def observe(self, residual: float, formation: ContactFormation,
                timestep: Optional[int] = None) -> Optional[TransitionEvent]:
        self._step += 1
        t = self._step if timestep is None else timestep
        if self.events and formation.rank < self.events[-1].target.rank:
            # formations never regress
            formation = self.events[-1].target
        target = formation.next()
        if target is None:
            self._count = 0
            return None

        if residual > self.threshold:
            self._count += 1
        else:
            self._count = 0
        if self._count < self.debounce:
            return None

        event = TransitionEvent(t, formation, target, float(residual), self._count)
        self._count = 0
        self.events.append(event)
        logger.info(f"Transition {formation.value} -> {target.value} detected at t={t} (residual {residual:.3f})")
        return event
