"""Service configuration from a TOML or JSON file."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaViolation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "deterministic"  # deterministic | remote
    url: str = ""
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    timeout_s: float = 10.0


@dataclass(frozen=True)
class ServiceConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    profile: str = "study"  # study | refined
    cases_dir: str = "fixtures"
    data_dir: str = "var"  # correction logs, effect logs, uploaded cases
    host: str = "127.0.0.1"
    port: int = 8787

    @property
    def cases_path(self) -> Path:
        return Path(self.cases_dir)

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".toml":
        doc = tomllib.loads(raw.decode())
    elif path.suffix == ".json":
        doc = json.loads(raw)
    else:
        raise SchemaViolation(f"{path.name}: config must be .toml or .json")
    backend_doc = doc.get("backend", {})
    if not isinstance(backend_doc, dict):
        raise SchemaViolation("config: backend must be a table/object")
    backend = BackendConfig(
        kind=backend_doc.get("kind", "deterministic"),
        url=backend_doc.get("url", ""),
        model=backend_doc.get("model", "gpt-3.5-turbo"),
        temperature=float(backend_doc.get("temperature", 0.0)),
        timeout_s=float(backend_doc.get("timeout_s", 10.0)),
    )
    if backend.kind not in ("deterministic", "remote"):
        raise SchemaViolation(f"config: unknown backend kind '{backend.kind}'")
    if backend.kind == "remote" and not backend.url:
        raise SchemaViolation("config: remote backend needs a url")
    profile = doc.get("profile", "study")
    if profile not in ("study", "refined"):
        raise SchemaViolation(f"config: unknown listening profile '{profile}'")
    return ServiceConfig(
        backend=backend,
        profile=profile,
        cases_dir=doc.get("cases_dir", "fixtures"),
        data_dir=doc.get("data_dir", "var"),
        host=doc.get("host", "127.0.0.1"),
        port=int(doc.get("port", 8787)),
    )
