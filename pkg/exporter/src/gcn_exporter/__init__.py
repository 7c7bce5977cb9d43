"""Synthetic-data GCN trainer exporting datasets, weights, and reference
activations in the consumer toolkit formats."""

from .generate import generate_ba2, write_dataset
from .train import train, train_and_export

__version__ = "0.1.0"
