"""Average-of-domain-experts toolkit: checkpoint merging, fine-tuning
schedules, WER scoring and a desk-scale forgetting lab."""

__version__ = "0.1.0"
