"""FigureSpec handling and deterministic SVG + PNG emission."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import matplotlib.pyplot as plt

from .panels import PANELS
from .schemas import SchemaError, verify_against_manifest


@dataclass
class FigureSpec:
    panel: str
    inputs: list[str]
    output: str
    scales: dict = field(default_factory=dict)   # {"x": ..., "y": ...}
    title: str | None = None

    def validate(self) -> None:
        if self.panel not in PANELS:
            raise SchemaError(f"unknown panel kind {self.panel!r}; "
                              f"expected one of {sorted(PANELS)}")
        if not self.inputs:
            raise SchemaError("figure spec lists no inputs")
        for path in self.inputs:
            if not os.path.exists(path):
                raise SchemaError(f"input does not exist: {path}")
        for axis, scale in self.scales.items():
            if axis not in ("x", "y") or scale not in ("linear", "log"):
                raise SchemaError(f"bad scale entry {axis!r}: {scale!r}")
        out_dir = os.path.dirname(os.path.abspath(self.output))
        for path in self.inputs:
            if os.path.dirname(os.path.abspath(path)) == out_dir:
                raise SchemaError(
                    "output directory must be distinct from the data "
                    f"directory holding {path}")

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"panel", "inputs", "output", "scales", "title"}
        if unknown:
            raise SchemaError(f"unknown figure spec fields: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise SchemaError(f"incomplete figure spec: {exc}")


def render(spec: FigureSpec) -> list[str]:
    """Draw the panel and write <output>.svg and <output>.png.

    Inputs are hash-checked against any manifest.json beside them before
    anything is read; outputs are deterministic for identical inputs.
    """
    spec.validate()
    for path in spec.inputs:
        verify_against_manifest(path)
    fig, ax = plt.subplots()
    try:
        PANELS[spec.panel](ax, spec.inputs)
        if spec.title:
            ax.set_title(spec.title)
        for axis, scale in spec.scales.items():
            (ax.set_xscale if axis == "x" else ax.set_yscale)(scale)
        base, ext = os.path.splitext(spec.output)
        if ext.lower() in (".svg", ".png"):
            spec = FigureSpec(spec.panel, spec.inputs, base, spec.scales,
                              spec.title)
        os.makedirs(os.path.dirname(os.path.abspath(base)) or ".",
                    exist_ok=True)
        written = []
        fig.tight_layout()
        for suffix in (".svg", ".png"):
            target = base + suffix
            fig.savefig(target, metadata={"Date": None}
                        if suffix == ".svg" else None, dpi=150)
            written.append(target)
        return written
    finally:
        plt.close(fig)
