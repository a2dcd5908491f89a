import numpy as np

from modules.errors import DomainError


def child_seed(master: int, *keys: int) -> int:
    """
    Derives a 63-bit seed from a master seed and integer keys.

    The keys (for instance connectivity index, N and instance index) are mixed
    by numpy's SeedSequence, so the result depends only on the inputs and never
    on the order in which tasks are executed.

    Args:
        master (int): Master seed of the experiment.
        *keys (int): Position of the draw inside the experiment.

    Returns:
        int: A non-negative seed.
    """
    state = np.random.SeedSequence([int(master), *(int(k) for k in keys)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def unit_draws(rng: np.random.Generator, size: int, value_range: str = "half-open") -> np.ndarray:
    """Uniform draws in ]0, 1] ("half-open") or [0, 1] ("closed")."""
    if value_range == "half-open":
        return 1.0 - rng.random(size)
    if value_range == "closed":
        return rng.random(size)
    raise DomainError(f"Unknown range {value_range!r}; expected 'half-open' or 'closed'")
