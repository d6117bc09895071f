"""Secure Schalkwijk-Kailath joint source-channel coding over the AWGN wiretap channel with feedback."""

from .bounds import BoundReport, TargetSpec, UpperMode, bracket
from .leakage import exact_leakage, f2_bound
from .schemes import REFERENCE_PARAMS, ChannelParams, Variant

__all__ = [
    "BoundReport",
    "ChannelParams",
    "REFERENCE_PARAMS",
    "TargetSpec",
    "UpperMode",
    "Variant",
    "bracket",
    "exact_leakage",
    "f2_bound",
]
