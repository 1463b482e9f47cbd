"""Model file ingestion, validation and integrity checking.

A model file is a JSON object with a ``matrix`` entry and an optional
``hamiltonian`` entry::

    {"name": "gap",
     "matrix": {"a": {"prefix": [2.0], "tail": 0.25}},
     "hamiltonian": {"alpha": {"prefix": [], "tail": 0.0}}}

The matrix is given either by the product sequence a_x = q_{x,x+1} q_{x+1,x}
(split symmetrically, up = down = sqrt(a)) or by the edge rewards
b_x = log q_{x,x+1} and c_x = log q_{x+1,x}. The Hamiltonian is either site
rewards ``alpha`` or edge rewards ``b``/``c``; without one, the edge rewards
whose transfer matrix is the matrix itself are used. Every sequence is
``{"prefix": [...], "tail": number or null}``; a null tail means the sequence
ends with its prefix.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .exceptions import ModelValidationError
from .seqmodel import (
    ConstantTail,
    EdgeRewards,
    HamiltonianSpec,
    NearestNeighborMatrix,
    PositiveSequence,
    SiteRewards,
    edge_rewards_from_matrix,
    make_real_sequence,
    make_sequence,
    matrix_from_edge_rewards,
    matrix_from_product,
)

logger = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"
ALLOWED_KEYS = frozenset({'name', 'description', 'matrix', 'hamiltonian'})
MATRIX_KEYS = frozenset({'a', 'b', 'c'})
HAMILTONIAN_KEYS = frozenset({'alpha', 'b', 'c'})


@dataclass(frozen=True, eq=False)
class Model:
    """A loaded model.

    Attributes:
        name: Model name
        matrix: The nearest-neighbor matrix
        hamiltonian: Site or edge rewards for the Gibbs measures
        split: "symmetric" for the product form, "edge" for the edge form
        hamiltonian_form: "site", "edge", or "matrix" when derived from the matrix
        checksum: MD5 of the file bytes
        description: Free text from the file
    """
    name: str
    matrix: NearestNeighborMatrix
    hamiltonian: HamiltonianSpec
    split: str
    checksum: str
    description: str = ""
    hamiltonian_form: str = "matrix"

    @property
    def product_sequence(self) -> PositiveSequence:
        return self.matrix.product_sequence()

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        a = self.product_sequence
        return {
            'name': self.name,
            'split': self.split,
            'hamiltonian_form': self.hamiltonian_form,
            'checksum': self.checksum,
            'a_prefix': list(a.prefix),
            'a_tail': a.tail.value if isinstance(a.tail, ConstantTail) else None,
        }


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _validate_sequence(key: str, entry: Any, positive: bool) -> List[str]:
    """Issues with one {"prefix": [...], "tail": ...} object."""
    if not isinstance(entry, dict):
        return [f"'{key}' must be an object, got {type(entry).__name__}"]
    issues = []
    unknown = sorted(set(entry) - {'prefix', 'tail'})
    if unknown:
        issues.append(f"'{key}' has unknown keys: {', '.join(unknown)}")
    prefix = entry.get('prefix')
    if not isinstance(prefix, list):
        return issues + [f"'{key}.prefix' must be an array"]
    for index, value in enumerate(prefix):
        if not _is_number(value):
            issues.append(f"'{key}.prefix[{index}]' is not a finite number: {value!r}")
        elif positive and not value > 0:
            issues.append(f"'{key}.prefix[{index}]' must be > 0, got {value!r}")
    if 'tail' not in entry:
        issues.append(f"'{key}.tail' is required (use null for no tail)")
        return issues
    tail = entry['tail']
    if tail is None:
        if not prefix:
            issues.append(f"'{key}' has neither a prefix nor a tail")
    elif not _is_number(tail):
        issues.append(f"'{key}.tail' is not a finite number: {tail!r}")
    elif positive and not tail > 0:
        issues.append(f"'{key}.tail' must be > 0, got {tail!r}")
    return issues


def _validate_edges(section: str, data: dict) -> List[str]:
    issues = []
    for key in ('b', 'c'):
        if key not in data:
            issues.append(f"Edge form needs both '{section}.b' and '{section}.c'; '{key}' is missing")
        else:
            issues.extend(_validate_sequence(f"{section}.{key}", data[key], positive=False))
    return issues


def _validate_matrix(entry: Any) -> List[str]:
    if not isinstance(entry, dict):
        return [f"'matrix' must be an object, got {type(entry).__name__}"]
    issues = []
    unknown = sorted(set(entry) - MATRIX_KEYS)
    if unknown:
        issues.append(f"'matrix' has unknown keys: {', '.join(unknown)}")
    has_product = 'a' in entry
    has_edges = 'b' in entry or 'c' in entry
    if has_product and has_edges:
        issues.append("Give either 'matrix.a' or 'matrix.b' and 'matrix.c', not both")
    elif has_product:
        issues.extend(_validate_sequence('matrix.a', entry['a'], positive=True))
    elif has_edges:
        issues.extend(_validate_edges('matrix', entry))
    else:
        issues.append("'matrix' needs 'a' or 'b' and 'c'")
    return issues


def _validate_hamiltonian(entry: Any) -> List[str]:
    if not isinstance(entry, dict):
        return [f"'hamiltonian' must be an object, got {type(entry).__name__}"]
    issues = []
    unknown = sorted(set(entry) - HAMILTONIAN_KEYS)
    if unknown:
        issues.append(f"'hamiltonian' has unknown keys: {', '.join(unknown)}")
    has_sites = 'alpha' in entry
    has_edges = 'b' in entry or 'c' in entry
    if has_sites and has_edges:
        issues.append("Give either 'hamiltonian.alpha' or 'hamiltonian.b' and 'hamiltonian.c', not both")
    elif has_sites:
        issues.extend(_validate_sequence('hamiltonian.alpha', entry['alpha'], positive=False))
    elif has_edges:
        issues.extend(_validate_edges('hamiltonian', entry))
    else:
        issues.append("'hamiltonian' needs 'alpha' or 'b' and 'c'")
    return issues


def validate_model_data(data: Any) -> List[str]:
    """Validate a parsed model object.

    Returns:
        List of issue messages. Empty list if the model is valid.
    """
    if not isinstance(data, dict):
        return [f"Expected an object, got {type(data).__name__}"]
    issues = []
    unknown = sorted(set(data) - ALLOWED_KEYS)
    if unknown:
        issues.append(f"Unknown keys: {', '.join(unknown)}")
    if 'name' in data and not isinstance(data['name'], str):
        issues.append("'name' must be a string")
    if 'description' in data and not isinstance(data['description'], str):
        issues.append("'description' must be a string")
    if 'matrix' in data:
        issues.extend(_validate_matrix(data['matrix']))
    else:
        issues.append("Model needs a 'matrix' object")
    if data.get('hamiltonian') is not None:
        issues.extend(_validate_hamiltonian(data['hamiltonian']))
    return issues


def _real(entry: dict):
    return make_real_sequence(entry['prefix'], entry['tail'])


def _build_model(data: dict, name: str, checksum: str) -> Model:
    entry = data['matrix']
    if 'a' in entry:
        matrix = matrix_from_product(make_sequence(entry['a']['prefix'], entry['a']['tail']))
        split = "symmetric"
    else:
        matrix = matrix_from_edge_rewards(_real(entry['b']), _real(entry['c']))
        split = "edge"

    rewards = data.get('hamiltonian')
    if rewards is None:
        hamiltonian: HamiltonianSpec = edge_rewards_from_matrix(matrix)
        form = "matrix"
    elif 'alpha' in rewards:
        hamiltonian = SiteRewards(_real(rewards['alpha']))
        form = "site"
    else:
        hamiltonian = EdgeRewards(_real(rewards['b']), _real(rewards['c']))
        form = "edge"
    return Model(
        name=data.get('name', name),
        matrix=matrix,
        hamiltonian=hamiltonian,
        split=split,
        checksum=checksum,
        description=data.get('description', ""),
        hamiltonian_form=form,
    )


class ModelLoader:
    """Loads, validates and caches model files.

    Bundled models live in the package's ``data/models`` directory and are
    addressed as ``builtin:<name>``; anything else is a filesystem path.
    """

    def __init__(self, models_dir: Optional[Path] = None):
        self._models_dir = models_dir or Path(__file__).parent.joinpath('data', 'models')
        self._validation_cache: Optional[List[str]] = None
        self._checksum_cache: Dict[str, str] = {}
        self._model_cache: Dict[str, Model] = {}

    @property
    def models_dir(self) -> Path:
        return self._models_dir

    def get_file_checksum(self, filepath: Path) -> str:
        """MD5 checksum of a file, cached by path; "" if it does not exist."""
        key = str(filepath)
        if key in self._checksum_cache:
            return self._checksum_cache[key]
        if not filepath.exists():
            return ""
        md5_hash = hashlib.md5()
        with open(filepath, 'rb') as f:
            for chunk in iter(lambda: f.read(4096), b""):
                md5_hash.update(chunk)
        checksum = md5_hash.hexdigest()
        self._checksum_cache[key] = checksum
        return checksum

    def verify_model_integrity(self, filepath: Path) -> Tuple[bool, Optional[str]]:
        """Check that a file exists, parses and passes validation.

        Returns:
            Tuple of (is_valid, error_message). error_message is None if valid.
        """
        filepath = Path(filepath)
        if not filepath.exists():
            return False, f"File does not exist: {filepath.name}"
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            return False, f"Invalid JSON in {filepath.name}: {e}"
        except OSError as e:
            return False, f"Error reading {filepath.name}: {e}"
        issues = validate_model_data(data)
        if issues:
            return False, f"{filepath.name}: {'; '.join(issues)}"
        return True, None

    def list_builtin_models(self) -> List[str]:
        """Names of the bundled models, sorted."""
        if not self._models_dir.exists():
            return []
        return sorted(p.stem for p in self._models_dir.glob('*.json'))

    def validate_builtin_models(self) -> List[str]:
        """Validate every bundled model once.

        Returns:
            List of issue messages. Empty list if all models are valid.
        """
        if self._validation_cache is not None:
            logger.debug("Using cached model validation results")
            return self._validation_cache
        issues = []
        names = self.list_builtin_models()
        if not names:
            issues.append(f"No bundled models found in {self._models_dir}")
        for name in names:
            ok, message = self.verify_model_integrity(self._models_dir.joinpath(f"{name}.json"))
            if not ok:
                logger.warning(f"Validation failed for model {name}: {message}")
                issues.append(message)
        self._validation_cache = issues
        if issues:
            logger.warning(f"Model validation found {len(issues)} issue(s)")
        else:
            logger.debug(f"All {len(names)} bundled models validated successfully")
        return issues

    def read_bytes(self, filepath: Path) -> bytes:
        filepath = Path(filepath)
        try:
            return filepath.read_bytes()
        except OSError as e:
            logger.error(f"Error reading model file {filepath}: {e}")
            raise ModelValidationError(filepath.name, f"cannot read file: {e}") from e

    def load_model(self, filepath: Union[str, Path]) -> Model:
        """Parse and validate a model file.

        Raises:
            ModelValidationError: If the file is missing, malformed or invalid
        """
        filepath = Path(filepath)
        raw = self.read_bytes(filepath)
        try:
            data = json.loads(raw.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ModelValidationError(filepath.name, f"invalid JSON: {e}") from e
        issues = validate_model_data(data)
        if issues:
            raise ModelValidationError(filepath.name, "; ".join(issues))
        checksum = hashlib.md5(raw).hexdigest()
        model = _build_model(data, filepath.stem, checksum)
        logger.debug(f"Loaded model {model.name!r} ({model.split}) from {filepath}")
        return model

    def load_builtin_model(self, name: str) -> Model:
        """Load a bundled model by name, cached.

        Raises:
            ModelValidationError: If no bundled model has that name
        """
        if name in self._model_cache:
            return self._model_cache[name]
        available = self.list_builtin_models()
        if name not in available:
            raise ModelValidationError(
                f"{BUILTIN_PREFIX}{name}",
                f"unknown bundled model; available: {', '.join(available)}",
            )
        model = self.load_model(self._models_dir.joinpath(f"{name}.json"))
        self._model_cache[name] = model
        return model

    def model_path(self, ref: str) -> Path:
        """Filesystem path behind a model reference."""
        if ref.startswith(BUILTIN_PREFIX):
            return self._models_dir.joinpath(f"{ref[len(BUILTIN_PREFIX):]}.json")
        return Path(ref)

    def resolve_model(self, ref: str) -> Model:
        """Load ``builtin:<name>`` or a file path."""
        if ref.startswith(BUILTIN_PREFIX):
            return self.load_builtin_model(ref[len(BUILTIN_PREFIX):])
        return self.load_model(ref)


# Module-level singleton instance
_model_loader_instance: Optional[ModelLoader] = None


def get_model_loader() -> ModelLoader:
    """Get the singleton ModelLoader instance."""
    global _model_loader_instance
    if _model_loader_instance is None:
        _model_loader_instance = ModelLoader()
    return _model_loader_instance


def load_model(filepath: Union[str, Path]) -> Model:
    """Load a model file.

    Example:
        >>> model = load_model("rpositive/data/models/gap.json")
        >>> model.product_sequence.value_at(0)
        2.0
    """
    return get_model_loader().load_model(filepath)


def load_builtin_model(name: str) -> Model:
    """Load a bundled model by name ("gap", "unit", ...)."""
    return get_model_loader().load_builtin_model(name)


def list_builtin_models() -> List[str]:
    return get_model_loader().list_builtin_models()


def resolve_model(ref: str) -> Model:
    return get_model_loader().resolve_model(ref)


def validate_builtin_models() -> List[str]:
    return get_model_loader().validate_builtin_models()
