"""Maven-style artifact identity (group, artifact, version)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Coordinate:
    group: str
    artifact: str
    version: str

    def __post_init__(self) -> None:
        for label, value in (("group", self.group), ("artifact", self.artifact),
                             ("version", self.version)):
            if not value:
                raise ValueError(f"coordinate {label} must be non-empty")
            if ":" in value:
                raise ValueError(f"coordinate {label} {value!r} must not contain ':'")

    def __str__(self) -> str:
        return f"{self.group}:{self.artifact}:{self.version}"

    @classmethod
    def parse(cls, text: str) -> "Coordinate":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected group:artifact:version, got {text!r}")
        return cls(*parts)
