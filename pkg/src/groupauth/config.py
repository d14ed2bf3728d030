"""Run configuration: a flat ``key = value`` text file.

Lines are ``key = value`` with ``#`` comments; the divisor list is
comma-separated.  Flags win over the environment, which wins over the
file (handled by the CLI layer).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .protocol import PAPER, UPDATE_MODES


@dataclass
class RunConfig:
    # protocol deployment
    n: int = 1024
    word_bits: int = 32
    divisors: list[int] = field(default_factory=lambda: [16, 8, 4])
    seed: int = 1
    mode: str = PAPER
    # privacy simulation
    sim_tags: int = 1024
    sim_groups: int = 32
    c_max: int = 600
    c_step: int = 60
    runs: int = 100
    baseline: bool = True
    # outputs
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.mode not in UPDATE_MODES:
            raise ValueError(f"mode must be one of {UPDATE_MODES}, got {self.mode!r}")
        if self.c_step < 1 or self.c_max < 0:
            raise ValueError("c_max and c_step must be positive")
        if self.sim_groups < 1 or self.sim_tags < 1:
            raise ValueError("sim_tags and sim_groups must be positive")

    def c_values(self) -> list[int]:
        return list(range(0, self.c_max + 1, self.c_step))

    def group_sizes(self) -> list[int]:
        """Simulation groups, as equal as integer division allows."""
        base, extra = divmod(self.sim_tags, self.sim_groups)
        return [base + (1 if g < extra else 0) for g in range(self.sim_groups)]

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "divisors":
                value = ",".join(str(k) for k in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dump())

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            if key == "divisors":
                values[key] = [int(k) for k in value.split(",") if k]
            elif key in ("mode", "out_dir"):
                values[key] = value
            elif key == "baseline":
                if value.lower() not in ("true", "false"):
                    raise ValueError(f"line {lineno}: baseline must be true or false")
                values[key] = value.lower() == "true"
            else:
                values[key] = int(value)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.parse(Path(path).read_text())
