"""Experiment configuration read from config.json."""
import dataclasses
import hashlib
import json
import os

from hypertree.errors import ConfigError
from hypertree.geodetic import TIE_BREAKS

FAMILIES = ("tree", "example1", "example2", "cycle", "path")
CHAINS = ("sphere", "representatives")
THRESHOLDS = ("auto", "adjacent")
DEFAULT_CAPS = {
    "triple": 600,
    "transfer": 600,
    "thin": 60,
    "thin_sample": 2000,
    "triple_sample": 64,
    "packing_exact": 64,
    "setcover_exact": 24,
    "geodesics": 4096,
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one experiment.

    ``threads`` only changes how fast reports are produced, never their
    content, so it is left out of the config hash.
    """

    family: str
    depth: int
    branching: int = 2
    base: int = None
    epsilon: object = "auto"
    threshold: object = "auto"
    epsilon0: object = "auto"
    seeds: tuple = (1,)
    tie_break: str = "least-id"
    stage_cap: int = 8
    chains: str = "sphere"
    caps: dict = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_CAPS))
    threads: int = 1
    audit: dict = None

    def cap(self, name):
        """Return one scan cap."""
        return self.caps[name]

    @property
    def seed(self):
        """Return the first seed; single-run stages use it."""
        return self.seeds[0]

    def to_dict(self):
        """Return the canonical dict, threads excluded."""
        data = dataclasses.asdict(self)
        data.pop("threads")
        data["seeds"] = list(self.seeds)
        return data


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _positive_int(data, key, minimum=1):
    value = data[key]
    if not _is_int(value) or value < minimum:
        raise ConfigError(f"'{key}' must be an integer >= {minimum}")
    return value


def _auto_or_positive(data, key):
    value = data.get(key, "auto")
    if value == "auto":
        return value
    if not _is_number(value) or value <= 0:
        raise ConfigError(f"'{key}' must be \"auto\" or a positive number")
    return float(value)


def _threshold(data):
    value = data.get("threshold", "auto")
    if value in THRESHOLDS:
        return value
    if not _is_number(value) or value < 0 or (2 * value) % 1:
        raise ConfigError(
            "'threshold' must be \"auto\", \"adjacent\" or a "
            "non-negative half-integer")
    return value


def _caps(data):
    caps = dict(DEFAULT_CAPS)
    given = data.get("caps", {})
    if not isinstance(given, dict):
        raise ConfigError("'caps' must be an object")
    for key, value in given.items():
        if key not in DEFAULT_CAPS:
            raise ConfigError(f"unknown cap '{key}'")
        if not _is_int(value) or value < 1:
            raise ConfigError(f"cap '{key}' must be a positive integer")
        caps[key] = value
    return caps


def check_cover_spec(spec):
    """Validate an audit cover spec and return it."""
    if not isinstance(spec, dict) or spec.get("version") != 1:
        raise ConfigError("cover spec must be an object with \"version\": 1")
    if "halves" in spec:
        if not _is_int(spec["halves"]) or spec["halves"] < 0:
            raise ConfigError("'halves' must be a non-negative integer")
    elif "sets" in spec:
        sets = spec["sets"]
        if not isinstance(sets, list) or not sets or not all(
                isinstance(s, list) and all(_is_int(c) for c in s)
                for s in sets):
            raise ConfigError("'sets' must be a list of lists of cell ids")
    else:
        raise ConfigError("cover spec needs 'sets' or 'halves'")
    if "dim" in spec and (not _is_int(spec["dim"]) or spec["dim"] < 0):
        raise ConfigError("'dim' must be a non-negative integer")
    if "separator" in spec and not all(_is_int(v)
                                       for v in spec["separator"]):
        raise ConfigError("'separator' must be a list of vertex ids")
    return spec


def default_threads():
    """Return HYPERTREE_THREADS as an int, or 1."""
    raw = os.environ.get("HYPERTREE_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"HYPERTREE_THREADS={raw!r} is not an integer") \
            from None
    if threads < 1:
        raise ConfigError("HYPERTREE_THREADS must be at least 1")
    return threads


def config_from_dict(data, threads=None):
    """Validate a parsed config object and build an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")
    for key in ("family", "depth"):
        if key not in data:
            raise ConfigError(f"missing key '{key}'")
    if data["family"] not in FAMILIES:
        raise ConfigError(f"family must be one of {list(FAMILIES)}")
    depth = _positive_int(data, "depth", minimum=0)
    data = {"branching": 2, "stage_cap": 8, **data}
    base = data.get("base")
    if base is not None and (not _is_int(base) or base < 0):
        raise ConfigError("'base' must be a vertex id")
    seeds = data.get("seeds", [1])
    if not isinstance(seeds, list) or not seeds or \
            not all(_is_int(s) for s in seeds):
        raise ConfigError("'seeds' must be a non-empty list of integers")
    tie_break = data.get("tie_break", "least-id")
    if tie_break not in TIE_BREAKS:
        raise ConfigError(f"tie_break must be one of {list(TIE_BREAKS)}")
    chains = data.get("chains", "sphere")
    if chains not in CHAINS:
        raise ConfigError(f"chains must be one of {list(CHAINS)}")
    audit = data.get("audit")
    if audit is not None:
        check_cover_spec(audit)
    if threads is None:
        threads = data.get("threads", default_threads())
    if not _is_int(threads) or threads < 1:
        raise ConfigError("'threads' must be a positive integer")
    return ExperimentConfig(
        family=data["family"],
        depth=depth,
        branching=_positive_int(data, "branching", minimum=2),
        base=base,
        epsilon=_auto_or_positive(data, "epsilon"),
        threshold=_threshold(data),
        epsilon0=_auto_or_positive(data, "epsilon0"),
        seeds=tuple(seeds),
        tie_break=tie_break,
        stage_cap=_positive_int(data, "stage_cap"),
        chains=chains,
        caps=_caps(data),
        threads=threads,
        audit=audit,
    )


def read_json(config_path):
    """Parse a JSON file, naming the file, line and column on syntax errors."""
    try:
        with config_path.open(encoding="utf-8") as json_file:
            return json.load(json_file)
    except json.JSONDecodeError as e:
        raise json.JSONDecodeError(
            (
                f"'{config_path}'\n"
                f"{e.msg} (line {e.lineno} column {e.colno})"
            ),
            e.doc,
            e.pos
        ) from e


def load_config(config_path, threads=None, overrides=None):
    """Load and validate a config file, command-line overrides applied."""
    data = read_json(config_path)
    if isinstance(data, dict) and overrides:
        data = {**data, **overrides}
    return config_from_dict(data, threads)


def load_cover_spec(path):
    """Load and validate an audit cover spec."""
    return check_cover_spec(read_json(path))


def canonical_json(data):
    """Return compact JSON with sorted keys."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    """Return the SHA-256 hex digest of the canonical config."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()
