"""Gesture detection for an event-camera soft-gel touch surface."""

from .engine import (ContactDetection, DegenerateFitError, GestureEngine,
                     GestureEstimate, TransformParams, compose_transform,
                     decompose_transform)
from .events import (EVENT_DTYPE, Frame, GestureLabel, GestureType, make_events)
from .geometry import (GeometryConfig, SENSOR_HEIGHT, SENSOR_WIDTH, marker_grid,
                       mm_to_px, px_to_mm)
from .pipeline import (BenchReport, GesturePipeline, PipelineOutput, bench,
                       read_outputs, write_outputs)
from .recording import (DecodeError, Recording, read_recording, write_recording)
from .resting import RestingDetector, chamfer
from .simulator import (EventSynthesizer, GelScene, GestureScript,
                        benchmark_scripts, generate_events,
                        generate_labeled_recording, render_frame,
                        true_displacement_field)
from .tracking import BlobTracker, InitializationError

__version__ = "0.1.0"

__all__ = [
    "BenchReport", "BlobTracker", "ContactDetection", "DecodeError",
    "DegenerateFitError", "EVENT_DTYPE", "EventSynthesizer", "Frame",
    "GelScene", "GeometryConfig", "GestureEngine", "GestureEstimate",
    "GestureLabel", "GesturePipeline", "GestureScript", "GestureType",
    "InitializationError", "PipelineOutput", "Recording", "RestingDetector",
    "SENSOR_HEIGHT", "SENSOR_WIDTH", "TransformParams", "bench",
    "benchmark_scripts", "chamfer", "compose_transform", "decompose_transform",
    "generate_events", "generate_labeled_recording", "make_events",
    "marker_grid", "mm_to_px", "px_to_mm", "read_outputs", "read_recording",
    "render_frame", "true_displacement_field", "write_outputs",
    "write_recording",
]
