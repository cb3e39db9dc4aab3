"""Adaptive frameless rendering: closed-loop spatio-temporal ray sampling,
space-time filtered reconstruction, and a gold-standard evaluation harness."""

__version__ = "0.1.0"

from .buffers import Crosshair, DeepBuffer, Sample, age_weight
from .clock import VirtualClock
from .harness import RunConfig, RunResult, rms, run
from .reconstructor import Reconstructor, filter_extents, sample_volume
from .sampler import RefreshPacket, Sampler, SamplerConfig
from .scene import Scene, evaluate_camera, load_scene
from .tracer import SceneWorld, Tracer, luminance

__all__ = [
    "Crosshair", "DeepBuffer", "Sample", "age_weight", "VirtualClock",
    "RunConfig", "RunResult", "rms", "run", "Reconstructor", "filter_extents",
    "sample_volume", "RefreshPacket", "Sampler", "SamplerConfig", "Scene",
    "evaluate_camera", "load_scene", "SceneWorld", "Tracer", "luminance",
    "__version__",
]
