"""Deterministic seed derivation. Every random draw in an experiment is keyed
through here, so results do not depend on execution order or worker count."""
from .kernels import MASK64, mix64

_TAGS = (0x243F6A8885A308D3, 0x13198A2E03707344, 0xA4093822299F31D0)


def derive_seed(*parts: int) -> int:
    """Chain-mix integer parts into one 64-bit seed."""
    h = 0x6A09E667F3BCC908
    for tag, part in zip(_TAGS * (len(parts) // len(_TAGS) + 1), parts):
        h = mix64(h ^ mix64((int(part) & MASK64) ^ tag))
        h = mix64(h + tag)
    return h


def mask_seed_for(master_seed: int, case_id: int, draw_index: int = 0) -> int:
    """Seed of the ``draw_index``-th mask drawn for ``case_id``."""
    return derive_seed(master_seed, case_id, draw_index)


def case_seed_for(master_seed: int, case_id: int) -> int:
    """Seed of the synthetic source (phantom) behind ``case_id``."""
    return derive_seed(master_seed, case_id, 0xCA5E)


def stream_seed_for(master_seed: int, *parts: int) -> int:
    """Seed for auxiliary streams (patch draws, statistics tables)."""
    return derive_seed(master_seed, 0x5EED, *parts)
