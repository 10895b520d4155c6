"""Event-camera tactile sensing under vibration: reconstruction, quality
metrics, IMU-guided temporal gating, synthetic scenes and downstream tasks."""

__version__ = "0.1.0"
