"""Configuration settings for the rpositive library.

Holds numeric defaults, the worker cap used by data-parallel sweeps and the
frozen run configuration consumed by the command line.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Literal, Optional, Tuple

from .exceptions import ModelValidationError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_M_MAX = 64
DEFAULT_DEPTH = 10**6
DEFAULT_K_MAX = 400
DEFAULT_SEED = 0
DEFAULT_SAMPLES = 1_000_000

GAP_RELATIVE_THRESHOLD = 1e-9
LOG_SPACE_K_THRESHOLD = 300
MAX_ENUMERATION_WIDTH = 22

THREADS_ENV_VAR = "RPOS_THREADS"

Command = Literal['analyze', 'radius', 'chain', 'gibbs', 'verify']
COMMANDS: Tuple[str, ...] = ('analyze', 'radius', 'chain', 'gibbs', 'verify')

# Global configuration state
_max_workers: Optional[int] = None


def set_max_workers(n: int) -> None:
    """Set the worker cap for data-parallel sweeps.

    Args:
        n: Number of worker threads, at least 1

    Example:
        >>> from rpositive.config import set_max_workers, get_max_workers
        >>> set_max_workers(4)
        >>> get_max_workers()
        4
    """
    global _max_workers
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError(f"Invalid worker count: {n!r}. Must be a positive integer")
    _max_workers = n


def get_max_workers() -> int:
    """Get the worker cap.

    An explicit setting wins; otherwise RPOS_THREADS is read, and the
    fallback is a single worker.
    """
    if _max_workers is not None:
        return _max_workers
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
            return 1
        if value >= 1:
            return value
        logger.warning(f"Ignoring non-positive {THREADS_ENV_VAR}={raw!r}")
    return 1


def reset_max_workers() -> None:
    """Reset the worker cap so that RPOS_THREADS applies again."""
    global _max_workers
    _max_workers = None


@dataclass(frozen=True)
class RunConfig:
    """Settings for one command-line run."""
    command: str = 'analyze'
    model_path: Optional[str] = None
    tol: float = DEFAULT_TOL
    m_max: int = DEFAULT_M_MAX
    depth: int = DEFAULT_DEPTH
    k_max: int = DEFAULT_K_MAX
    seed: int = DEFAULT_SEED
    output_path: Optional[str] = None
    window: Optional[Tuple[int, int]] = None
    boundary: Optional[Tuple[int, int]] = None
    block: Optional[Tuple[int, int]] = None
    samples: int = DEFAULT_SAMPLES
    quick: bool = False
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ModelValidationError("config", f"unknown command {self.command!r}")
        for name in ('tol', 'm_max', 'depth', 'k_max', 'samples'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ModelValidationError("config", f"{name} must be positive, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ModelValidationError("config", f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.quick, bool):
            raise ModelValidationError("config", f"quick must be a boolean, got {self.quick!r}")
        for name in ('window', 'boundary', 'block'):
            pair = getattr(self, name)
            if pair is None:
                continue
            if len(pair) != 2 or not all(isinstance(v, int) for v in pair):
                raise ModelValidationError("config", f"{name} must be a pair of integers, got {pair!r}")
            object.__setattr__(self, name, tuple(pair))

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        """Build a config from a JSON object, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ModelValidationError("config", f"expected an object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ModelValidationError("config", f"unknown keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        result = asdict(self)
        for name in ('window', 'boundary', 'block'):
            if result[name] is not None:
                result[name] = list(result[name])
        return result

    def config_hash(self, model_bytes: bytes = b"") -> str:
        """SHA-256 over the canonical config JSON and the model file bytes.

        The output path and verbosity do not change results and are excluded.
        """
        payload = self.to_dict()
        payload.pop('output_path', None)
        payload.pop('verbose', None)
        digest = hashlib.sha256()
        digest.update(json.dumps(payload, sort_keys=True).encode('utf-8'))
        digest.update(model_bytes)
        return digest.hexdigest()
