"""Variable type recovery for decompiled C: corpus building, baselines, and a
small trainable retyping model, end to end from DWARF ground truth."""

__version__ = "0.1.0"
