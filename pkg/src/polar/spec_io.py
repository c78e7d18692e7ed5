"""Versioned plain-text serialization of ``PolarSpec``.

One ``key = value`` line per field in declaration order. Values are JSON literals, so
index sets are sorted integer lists and floats use their shortest round-trip repr.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from src.errors import ConfigError
from src.polar.construction import ConstructionMode, PolarSpec
from src.source.model import ForwardChannel, JointSource

logger = logging.getLogger(__name__)

FORMAT_NAME = "privpolar-spec"
FORMAT_VERSION = 1

_FIELDS = (
    "format",
    "version",
    "n",
    "k",
    "q",
    "beta",
    "mode",
    "num_samples",
    "seed",
    "info",
    "frozen",
    "computable",
    "frozen_values",
    "z_cond",
    "z_marg",
    "source_shape",
    "source",
    "channel",
)


def dumps(spec: PolarSpec) -> str:
    """Serialize a spec to text."""
    values: dict[str, Any] = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": spec.n,
        "k": spec.k,
        "q": spec.q,
        "beta": spec.beta,
        "mode": spec.mode.value,
        "num_samples": spec.num_samples,
        "seed": spec.seed,
        "info": list(spec.info),
        "frozen": list(spec.frozen),
        "computable": list(spec.computable),
        "frozen_values": list(spec.frozen_values),
        "z_cond": [float(z) for z in spec.z_cond],
        "z_marg": [float(z) for z in spec.z_marg],
        "source_shape": [spec.source.nx, spec.source.ny],
        "source": spec.source.pmf.ravel().tolist(),
        "channel": spec.channel.conditional.ravel().tolist(),
    }
    lines = [f"# {FORMAT_NAME} v{FORMAT_VERSION}"]
    lines.extend(f"{key} = {json.dumps(values[key])}" for key in _FIELDS)
    return "\n".join(lines) + "\n"


def loads(text: str) -> PolarSpec:
    """Parse a spec serialized by ``dumps``.

    Raises:
        ConfigError: On a malformed line, unknown or missing key, or unsupported version
    """
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _FIELDS:
            raise ConfigError(f"Line {lineno}: expected '<field> = <value>', got {raw!r}")
        if key in values:
            raise ConfigError(f"Line {lineno}: duplicate field '{key}'")
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Line {lineno}: invalid value for '{key}': {e}") from e

    missing = [key for key in _FIELDS if key not in values]
    if missing:
        raise ConfigError(f"Spec file is missing fields: {', '.join(missing)}")
    if values["format"] != FORMAT_NAME or values["version"] != FORMAT_VERSION:
        raise ConfigError(
            f"Unsupported spec format {values['format']!r} v{values['version']}, "
            + f"expected {FORMAT_NAME} v{FORMAT_VERSION}"
        )

    n, q = int(values["n"]), int(values["q"])
    nx, ny = (int(v) for v in values["source_shape"])
    src = JointSource(np.array(values["source"], dtype=np.float64).reshape(nx, ny))
    ch = ForwardChannel(np.array(values["channel"], dtype=np.float64).reshape(nx, ny, q))
    spec = PolarSpec(
        n=n,
        q=q,
        frozen=tuple(values["frozen"]),
        computable=tuple(values["computable"]),
        z_cond=np.array(values["z_cond"], dtype=np.float64),
        z_marg=np.array(values["z_marg"], dtype=np.float64),
        beta=float(values["beta"]),
        source=src,
        channel=ch,
        frozen_values=tuple(values["frozen_values"]),
        mode=ConstructionMode(values["mode"]),
        num_samples=int(values["num_samples"]),
        seed=int(values["seed"]),
    )
    if spec.k != values["k"] or list(spec.info) != values["info"]:
        raise ConfigError("Stored k or information set disagrees with n and the F/D sets")
    return spec


def save_spec(spec: PolarSpec, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    _ = path.write_text(dumps(spec))
    logger.info("Wrote spec to %s", path)


def load_spec(path: Path) -> PolarSpec:
    if not path.exists():
        raise ConfigError(f"Spec file not found: {path}")
    return loads(path.read_text())
