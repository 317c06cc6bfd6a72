"""Video coding back end: built-in hybrid block coder, container and external adapter."""

from .bitstream import LfBitstream, StreamHeader
from .blockcodec import EncodedView, decode_view, encode_view, qstep
from .external import external_encode
from .sequence import CodecConfig, decode_sequence, encode_sequence

__all__ = [
    "CodecConfig",
    "EncodedView",
    "LfBitstream",
    "StreamHeader",
    "decode_sequence",
    "decode_view",
    "encode_sequence",
    "encode_view",
    "external_encode",
    "qstep",
]
