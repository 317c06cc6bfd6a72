"""Decoder-side quality enhancement of non-reference views."""

from .qenet import QeNet, enhance_luma
from .rvs import (DEFAULT_POLICY, FALLBACK_POLICY, POLICIES, RvsPolicy, blockiness,
                  select_reference, sharpness_score)
from .training import (QeConfig, QeDataset, build_qe_dataset, enhance_decoded_lf, enhance_view,
                       pick_references, train_qenet, write_quality_report)

__all__ = [
    "DEFAULT_POLICY",
    "FALLBACK_POLICY",
    "POLICIES",
    "QeConfig",
    "QeDataset",
    "QeNet",
    "RvsPolicy",
    "blockiness",
    "build_qe_dataset",
    "enhance_decoded_lf",
    "enhance_luma",
    "enhance_view",
    "pick_references",
    "select_reference",
    "sharpness_score",
    "train_qenet",
    "write_quality_report",
]
