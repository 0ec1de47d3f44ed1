"""Streaming codes: prefix and universal block codes, FIFO smoothing, baselines."""

from .baseline import BlockCodebook, block_baseline, codebook_for
from .bitio import pack_bits, read_bitstream, unpack_bits, write_bitstream
from .otp import GroupAlphabet, otp_inverse, otp_transform
from .prefix import (MalformedCodeword, PrefixCode, TruncatedCodeword, is_prefix_free,
                     kraft_sum, ternary_prefix_code)
from .stream import BitQueue, StreamTrace, as_rate, fifo_block_schedule, stream_decode, stream_encode
from .universal import UniversalCode

__all__ = [
    "BitQueue", "BlockCodebook", "GroupAlphabet", "MalformedCodeword", "PrefixCode",
    "StreamTrace", "TruncatedCodeword", "UniversalCode", "as_rate", "block_baseline",
    "codebook_for", "fifo_block_schedule", "is_prefix_free", "kraft_sum", "otp_inverse",
    "otp_transform", "pack_bits", "read_bitstream", "ternary_prefix_code", "unpack_bits",
    "write_bitstream", "stream_decode", "stream_encode",
]
