"""Project configuration: ``.reversa/config.toml`` overlaid by ``config.user.toml``."""

from __future__ import annotations

import fnmatch
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ._fs import STATE_DIR

CONFIG_PATH = f"{STATE_DIR}/config.toml"
USER_CONFIG_PATH = f"{STATE_DIR}/config.user.toml"

DEFAULT_OUTPUT_ROOT = "_reversa_sdd"
DEFAULT_INCLUDE = (
    "*.cbl", "*.cob", "*.cpy", "*.c", "*.h", "*.cpp", "*.py", "*.js", "*.ts",
    "*.java", "*.go", "*.rb", "*.php", "*.cs", "*.sql", "*.pas", "*.bas", "*.vb",
)  # fmt: skip
DEFAULT_EXCLUDE = (".reversa/*", ".git/*", "node_modules/*")
DEFAULT_TIMEOUT = 600.0
DEFAULT_BYTE_BUDGET = 1 << 20


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    output_root: str = DEFAULT_OUTPUT_ROOT
    include: tuple[str, ...] = DEFAULT_INCLUDE
    exclude: tuple[str, ...] = DEFAULT_EXCLUDE
    units: dict[str, tuple[str, ...]] = field(default_factory=dict)
    timeout_seconds: float = DEFAULT_TIMEOUT
    byte_budget: int = DEFAULT_BYTE_BUDGET
    weights: tuple[Fraction, Fraction, Fraction] = (Fraction(1), Fraction(1, 2), Fraction(0))
    escalate_unevidenced: bool = False
    intent: str = ""
    raw: dict = field(default_factory=dict)

    def is_relevant(self, path: str) -> bool:
        if any(_match(path, p) for p in self.exclude):
            return False
        if _match(path, f"{self.output_root}/*"):
            return False
        return any(_match(path, p) for p in self.include)

    def relevant_files(self, files: list[str]) -> list[str]:
        return sorted(f for f in files if self.is_relevant(f))

    def unit_of(self, path: str) -> str | None:
        for unit, patterns in self.units.items():
            if any(_match(path, p) for p in patterns):
                return unit
        return None

    def resolve_units(self, relevant: list[str]) -> dict[str, list[str]]:
        """Map each unit to its files. Without a ``[units]`` table every relevant
        file is its own unit, named by its lower-cased stem."""
        if self.units:
            out: dict[str, list[str]] = {u: [] for u in self.units}
            for f in relevant:
                unit = self.unit_of(f)
                if unit is not None:
                    out[unit].append(f)
            return out
        out = {}
        for f in relevant:
            stem = f.rsplit("/", 1)[-1].rsplit(".", 1)[0].lower()
            out.setdefault(stem, []).append(f)
        return dict(sorted(out.items()))


def _match(path: str, pattern: str) -> bool:
    # '*' crosses directory separators; '**/' may also match nothing
    if fnmatch.fnmatchcase(path, pattern):
        return True
    return pattern.startswith("**/") and fnmatch.fnmatchcase(path, pattern[3:])


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _read_toml(path: Path) -> dict:
    if not path.is_file():
        return {}
    try:
        return tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path.name}: {exc}") from None


def load_config(root: Path) -> Config:
    root = Path(root)
    raw = _merge(_read_toml(root / CONFIG_PATH), _read_toml(root / USER_CONFIG_PATH))
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> Config:
    cfg = Config(raw=raw)
    out = raw.get("output", {})
    given = str(out.get("root", cfg.output_root))
    cfg.output_root = given.rstrip("/")
    if not cfg.output_root or Path(cfg.output_root).is_absolute() or ".." in cfg.output_root.split("/"):
        raise ConfigError(f"output.root must be a relative path: {given!r}")
    inv = raw.get("inventory", {})
    cfg.include = tuple(inv.get("include", cfg.include))
    cfg.exclude = tuple(inv.get("exclude", cfg.exclude))
    units = raw.get("units", {})
    if not isinstance(units, dict):
        raise ConfigError("[units] must be a table of unit = [globs]")
    cfg.units = {str(k): tuple(v) if isinstance(v, list) else (str(v),) for k, v in units.items()}
    pipe = raw.get("pipeline", {})
    cfg.timeout_seconds = float(pipe.get("timeout_seconds", cfg.timeout_seconds))
    cfg.byte_budget = int(pipe.get("byte_budget", cfg.byte_budget))
    cfg.intent = str(pipe.get("intent", cfg.intent))
    claims = raw.get("claims", {})
    w = claims.get("weights")
    if w is not None:
        if len(w) != 3:
            raise ConfigError("claims.weights needs three numbers: confirmed, inferred, gap")
        cfg.weights = tuple(Fraction(str(x)) for x in w)
    cfg.escalate_unevidenced = bool(raw.get("audit", {}).get("escalate_unevidenced", False))
    return cfg


def render_default_config(output_root: str = DEFAULT_OUTPUT_ROOT, project: str = "", analyzed_version: str = "") -> str:
    include = ", ".join(f'"{p}"' for p in DEFAULT_INCLUDE)
    exclude = ", ".join(f'"{p}"' for p in DEFAULT_EXCLUDE)
    return f"""# Tool defaults. Put overrides in config.user.toml; update never touches that file.

[project]
name = "{project}"
analyzed_version = "{analyzed_version}"

[output]
root = "{output_root}"

[inventory]
# '*' matches across directories
include = [{include}]
exclude = [{exclude}]

[units]
# unit = ["glob", ...]; when empty, every relevant file is its own unit

[pipeline]
timeout_seconds = {int(DEFAULT_TIMEOUT)}
byte_budget = {DEFAULT_BYTE_BUDGET}

[claims]
# study-calibrated defaults: confirmed, inferred, gap
weights = [1.0, 0.5, 0.0]

[audit]
escalate_unevidenced = false
"""


USER_CONFIG_TEMPLATE = """# Local overrides for .reversa/config.toml. This file is never rewritten by update.
#
# [units]
# conta = ["src/CONTA*"]
#
# [engines.my-editor]
# marker = ".my-editor"
# skills_dir = ".my-editor/skills"
# entry_file = "AGENTS.md"
"""
