"""Context-aware zero-shot anomaly detection on synthetic surveillance scenes.

A small numpy/scipy pipeline: dual-stream visual encoding (divided space-time
attention plus a clip block encoder), text alignment with a context gate, and
future prediction over block latents, scored by streaming sliding windows.
"""
from .config import Config, load_config
from .model import Model, init_params

__all__ = ["Config", "load_config", "Model", "init_params"]
__version__ = "0.1.0"
