"""Data ingestion, training, checkpoints and the command line."""
from .checkpoint import checkpoint_load, checkpoint_save, decode_checkpoint, encode_checkpoint, read_checkpoint
from .data import Dataset, SplitConfig, load_idx, make_batches, split_dataset
from .idx import IMAGES_MAGIC, LABELS_MAGIC, encode_idx, idx_summary, parse_idx, read_idx, write_idx
from .train import (EpochRecord, TrainConfig, build_model, evaluate, loss_and_grads, predict_logits, record_loss,
                    train)
