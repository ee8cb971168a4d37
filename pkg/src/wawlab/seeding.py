"""Independent, reproducible seed streams derived from one master seed."""
import zlib

from ._pycore import M64, splitmix64


def derive_seed(seed: int, label: str) -> int:
    x = (seed & M64) ^ (zlib.crc32(label.encode()) << 32)
    _, z = splitmix64(x)
    _, z = splitmix64(z)
    return z
