"""Checkpoint persistence, configuration and the three-step pipeline."""

from .checkpoint import (CheckpointError, save_checkpoint, load_checkpoint, encode_checkpoint,
                         decode_checkpoint, MAGIC, VERSION)
from .config import PipelineConfig, load_config, config_hash, canonical_json, MODES
from .pipeline import (MissingStage, run_pipeline, run_ablation, run_rica_ablation, RICA_ARMS,
                       train_extractor, train_featuregan_stage, train_final, make_datasets,
                       segmenter_from_checkpoint, stage_dir)
