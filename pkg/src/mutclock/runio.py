"""Run configuration and file formats.

One JSON document configures a run; samples and law grids are CSV; reports
are JSON.  Every emitted artifact embeds the tool version and a hash of the
generating configuration, and contains nothing non-deterministic (no
timestamps, no environment echoes), so a rerun with the same config is
byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

from . import __version__
from .sim import DEFAULT_CANDIDATE_CAP, ModelParams
from .stats import EmpiricalSample

_CONFIG_KEYS = {
    "model",
    "replicates",
    "seed",
    "t_max",
    "t_max_multiplier",
    "candidate_cap",
    "grid",
    "confidence",
    "threshold",
    "use_grid",
    "grid_hint",
    "z_samples",
    "hit_samples",
}


@dataclass
class RunConfig:
    """Validated run configuration (see load_config for the JSON schema)."""

    model: ModelParams
    replicates: int | None = None
    seed: int | None = None
    t_max: float | None = None
    t_max_multiplier: float = 20.0
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    grid: list[float] = field(default_factory=list)
    confidence: float = 0.01
    threshold: float = 10.0
    use_grid: bool = False
    grid_hint: float = 0.0
    z_samples: int | None = None
    hit_samples: int = 10_000
    raw: dict = field(default_factory=dict)

    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(doc: dict) -> str:
    """Short stable digest of a configuration document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "model" not in doc:
        raise ValueError("config needs a 'model' section")
    m = doc["model"]
    extra = set(m) - {"dimension", "sites", "speed", "rates"}
    if extra:
        raise ValueError(f"unknown model keys: {sorted(extra)}")
    try:
        model = ModelParams(
            dimension=int(m["dimension"]),
            sites=float(m["sites"]),
            speed=float(m["speed"]),
            rates=tuple(float(r) for r in m["rates"]),
        )
    except KeyError as e:
        raise ValueError(f"model section missing {e.args[0]!r}") from None
    cfg = RunConfig(model=model, raw=doc)

    if "replicates" in doc:
        cfg.replicates = int(doc["replicates"])
        if cfg.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {cfg.replicates}")
    if "seed" in doc:
        cfg.seed = int(doc["seed"])
        if not 0 <= cfg.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
    if "t_max" in doc:
        cfg.t_max = float(doc["t_max"])
        if not cfg.t_max > 0:
            raise ValueError("t_max must be positive")
    if "t_max_multiplier" in doc:
        cfg.t_max_multiplier = float(doc["t_max_multiplier"])
        if not cfg.t_max_multiplier > 0:
            raise ValueError("t_max_multiplier must be positive")
    if "candidate_cap" in doc:
        cfg.candidate_cap = int(doc["candidate_cap"])
        if cfg.candidate_cap < 1:
            raise ValueError("candidate_cap must be >= 1")
    if "grid" in doc:
        g = doc["grid"]
        if isinstance(g, dict):
            extra = set(g) - {"start", "stop", "points"}
            if extra:
                raise ValueError(f"unknown grid keys: {sorted(extra)}")
            n = int(g["points"])
            if n < 0:
                raise ValueError("grid points must be >= 0")
            start, stop = float(g["start"]), float(g["stop"])
            if n == 1:
                cfg.grid = [start]
            else:
                step = (stop - start) / (n - 1) if n > 1 else 0.0
                cfg.grid = [start + i * step for i in range(n)]
        else:
            cfg.grid = [float(t) for t in g]
    if "confidence" in doc:
        cfg.confidence = float(doc["confidence"])
        if not 0.0 < cfg.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
    if "threshold" in doc:
        cfg.threshold = float(doc["threshold"])
        if not cfg.threshold > 1.0:
            raise ValueError("threshold must be > 1")
    if "use_grid" in doc:
        cfg.use_grid = bool(doc["use_grid"])
    if "grid_hint" in doc:
        cfg.grid_hint = float(doc["grid_hint"])
        if cfg.grid_hint < 0:
            raise ValueError("grid_hint must be >= 0")
    if "z_samples" in doc:
        cfg.z_samples = int(doc["z_samples"])
        if cfg.z_samples < 1:
            raise ValueError("z_samples must be >= 1")
    if "hit_samples" in doc:
        cfg.hit_samples = int(doc["hit_samples"])
        if cfg.hit_samples < 1:
            raise ValueError("hit_samples must be >= 1")
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not valid JSON ({e})") from None
    return parse_config(doc)


def _fmt(x) -> str:
    """Shortest round-trip text for a float (repr), plain text otherwise."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sample_csv(fh, sample: EmpiricalSample, metadata: dict) -> None:
    """Sample file: '# key: value' comment header, then a single value column."""
    fh.write(f"# mutclock-sample {__version__}\n")
    for key in sorted(metadata):
        fh.write(f"# {key}: {_fmt(metadata[key])}\n")
    fh.write(f"# timeouts: {sample.timeouts}\n")
    fh.write(f"# base_seed: {sample.base_seed}\n")
    fh.write(f"# scale_applied: {_fmt(sample.scale_applied)}\n")
    fh.write("value\n")
    for v in sample.values:
        fh.write(f"{v!r}\n")


def read_sample_csv(fh) -> tuple[EmpiricalSample, dict]:
    meta = {}
    values = []
    saw_header = False
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                meta[key.strip()] = val.strip()
            continue
        if not saw_header:
            if line != "value":
                raise ValueError(f"expected 'value' column header, got {line!r}")
            saw_header = True
            continue
        values.append(float(line))
    sample = EmpiricalSample(
        values=values,
        timeouts=int(meta.get("timeouts", 0)),
        base_seed=int(meta.get("base_seed", 0)),
        scale_applied=float(meta.get("scale_applied", 1.0)),
    )
    return sample, meta


def write_law_csv(fh, ts, cdfs, metadata: dict) -> None:
    """Law grid: '# key: value' header then t,cdf rows at 12 significant digits."""
    fh.write(f"# mutclock-law {__version__}\n")
    for key in sorted(metadata):
        fh.write(f"# {key}: {_fmt(metadata[key])}\n")
    fh.write("t,cdf\n")
    for t, c in zip(ts, cdfs):
        fh.write(f"{t:.12g},{c:.12g}\n")


def dump_report(doc: dict) -> str:
    """Canonical JSON text for a report (stable key order, trailing newline)."""
    return json.dumps(_sanitize(doc), sort_keys=True, indent=2) + "\n"


def _sanitize(x):
    """Make a report JSON-serializable; NaN/inf become strings."""
    if isinstance(x, dict):
        return {str(k): _sanitize(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sanitize(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return repr(float(x))  # float() strips numpy subclasses from the repr
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):  # numpy scalars
        return _sanitize(x.item())
    return x


def sample_to_text(sample: EmpiricalSample, metadata: dict) -> str:
    buf = io.StringIO()
    write_sample_csv(buf, sample, metadata)
    return buf.getvalue()
