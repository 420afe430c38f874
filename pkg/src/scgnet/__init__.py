"""SCGNet: stacked 1-D convolution + GRU intrusion detection on NSL-KDD-format data."""

__version__ = "0.1.0"
