"""Shared numeric and format constants."""

# 0.975 standard-normal quantile, pinned so that confidence intervals are
# reproducible bit-for-bit across releases.
Z975 = 1.959963985

# Version tag of the aggregated per-trial result file.
FORMAT_VERSION = "1.0"
