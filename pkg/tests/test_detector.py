from tactile_ec.estimation.detector import TransitionDetector
from tactile_ec.estimation.state import ContactFormation

POINT, LINE, PATCH = ContactFormation.POINT, ContactFormation.LINE, ContactFormation.PATCH


def test_fires_after_debounce_consecutive_exceedances():
    detector = TransitionDetector(threshold=0.1, debounce=3)
    assert detector.observe(0.2, POINT) is None
    assert detector.observe(0.3, POINT) is None
    event = detector.observe(0.25, POINT)
    assert event is not None
    assert (event.source, event.target) == (POINT, LINE)
    assert event.timestep == 3
    assert event.debounce_count == 3
    assert event.residual == 0.25


def test_dip_below_threshold_resets_count():
    detector = TransitionDetector(threshold=0.1, debounce=2)
    assert detector.observe(0.2, POINT, timestep=10) is None
    assert detector.observe(0.05, POINT, timestep=11) is None
    assert detector.observe(0.2, POINT, timestep=12) is None
    event = detector.observe(0.2, POINT, timestep=13)
    assert event.timestep == 13


def test_threshold_is_strict():
    detector = TransitionDetector(threshold=0.1, debounce=1)
    assert detector.observe(0.1, POINT) is None
    assert detector.observe(0.1000001, POINT) is not None


def test_never_fires_from_patch():
    detector = TransitionDetector(threshold=0.1, debounce=1)
    assert all(detector.observe(5.0, PATCH) is None for _ in range(10))
    assert detector.events == []


def test_formation_never_regresses():
    detector = TransitionDetector(threshold=0.1, debounce=1)
    assert detector.observe(1.0, POINT).target == LINE
    # a stale POINT label after the event is treated as LINE
    event = detector.observe(1.0, POINT)
    assert (event.source, event.target) == (LINE, PATCH)
    assert detector.observe(1.0, LINE) is None
    assert [e.target for e in detector.events] == [LINE, PATCH]


def test_reset_clears_history():
    detector = TransitionDetector(threshold=0.1, debounce=2)
    detector.observe(1.0, POINT)
    detector.reset()
    assert detector.events == []
    assert detector.observe(1.0, POINT) is None


def test_defaults_come_from_settings():
    from tactile_ec.core.config import settings

    detector = TransitionDetector()
    assert detector.threshold == settings.DETECTION_THRESHOLD
    assert detector.debounce == settings.DEBOUNCE
