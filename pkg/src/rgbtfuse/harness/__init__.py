"""Synthetic scenes, shift recovery, the end-to-end demo and the metric bench."""
from .bench import assign_bench
from .config import RunConfig, load_config
from .pipeline import Report, run_pipeline
from .recover import recover_shift
from .scene import Scene, SceneConfig, gen_scene
