"""Bit-level I/O with Exp-Golomb codes."""

from functools import lru_cache

from ..errors import MalformedPayload


@lru_cache(maxsize=4096)
def ue_bits(k: int) -> str:
    if k < 0:
        raise ValueError("ue() takes a non-negative integer")
    b = bin(k + 1)[2:]
    return "0" * (len(b) - 1) + b


@lru_cache(maxsize=4096)
def se_bits(k: int) -> str:
    return ue_bits(2 * k - 1 if k > 0 else -2 * k)


class BitWriter:
    def __init__(self):
        self._parts = []
        self.nbits = 0

    def bits(self, s: str):
        self._parts.append(s)
        self.nbits += len(s)

    def ue(self, k: int):
        self.bits(ue_bits(k))

    def se(self, k: int):
        self.bits(se_bits(k))

    def uint(self, value: int, width: int):
        self.bits(format(value, f"0{width}b"))

    def getvalue(self) -> bytes:
        s = "".join(self._parts)
        s += "0" * (-len(s) % 8)
        if not s:
            return b""
        return int(s, 2).to_bytes(len(s) // 8, "big")


class BitReader:
    """Reads back what :class:`BitWriter` wrote; any overrun raises MalformedPayload."""

    def __init__(self, data: bytes, nbits: int = None):
        self._s = "".join(format(b, "08b") for b in data) if data else ""
        self._end = len(self._s) if nbits is None else nbits
        if self._end > len(self._s):
            raise MalformedPayload("payload shorter than its declared bit count")
        self.pos = 0

    def _need(self, n: int):
        if self.pos + n > self._end:
            raise MalformedPayload("unexpected end of payload")

    def uint(self, width: int) -> int:
        self._need(width)
        v = int(self._s[self.pos:self.pos + width], 2) if width else 0
        self.pos += width
        return v

    def ue(self) -> int:
        one = self._s.find("1", self.pos, self._end)
        if one < 0:
            raise MalformedPayload("unterminated Exp-Golomb prefix")
        zeros = one - self.pos
        if zeros > 32:
            raise MalformedPayload("Exp-Golomb code too long")
        self._need(2 * zeros + 1)
        v = int(self._s[one:one + zeros + 1], 2) - 1
        self.pos = one + zeros + 1
        return v

    def se(self) -> int:
        k = self.ue()
        return (k + 1) // 2 if k % 2 else -(k // 2)

    @property
    def remaining(self) -> int:
        return self._end - self.pos
