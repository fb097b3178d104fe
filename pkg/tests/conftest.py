import numpy as np
import pytest

from geltouch.events import GestureType
from geltouch.simulator import GelScene, GestureScript, generate_labeled_recording


@pytest.fixture(scope="session")
def scene():
    return GelScene()


def push_script(peak_mm=4.0, center=(173.0, 130.0), t_start=500_000,
                attack=300_000, hold=600_000, release=300_000, direction=(1.0, 0.0)):
    return GestureScript(gesture_type=GestureType.PUSH, finger_centers=(center,),
                         peak_intensity_mm=peak_mm, t_start_us=t_start,
                         attack_us=attack, hold_us=hold, release_us=release,
                         push_direction=direction)


def two_finger_script(gesture_type, peak_mm=6.0, centers=((138.0, 130.0), (208.0, 130.0)),
                      t_start=500_000, attack=300_000, hold=600_000, release=300_000):
    return GestureScript(gesture_type=gesture_type, finger_centers=centers,
                         peak_intensity_mm=peak_mm, t_start_us=t_start,
                         attack_us=attack, hold_us=hold, release_us=release)


@pytest.fixture(scope="session")
def push_recording():
    """One 4 mm push with light background noise, 2 s."""
    scene = GelScene(noise_rate=0.05)
    return generate_labeled_recording(scene, [push_script()], duration_us=2_000_000)


@pytest.fixture(scope="session")
def single_marker_scene():
    return GelScene(marker_positions=np.array([[100.0, 130.0]]))
