import hashlib
from collections.abc import Iterator, Sequence


def derive_seed(seed: int, *keys: object) -> int:
    """Derive a stable 63-bit seed from a base seed and any number of keys.

    Independent of PYTHONHASHSEED and of iteration order elsewhere in the run."""
    digest = hashlib.blake2b(repr((seed, *keys)).encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'big') >> 1


def chunked[T](items: Sequence[T], size: int) -> Iterator[Sequence[T]]:
    for start in range(0, len(items), size):
        yield items[start:start + size]
