"""Result records shared by the solvers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..grid import GridFunction, write_csv


def _clean(x):
    if isinstance(x, float):
        return x
    if hasattr(x, "item"):
        return x.item()
    return x


@dataclass
class SolveReport:
    """Outcome of one solver call.

    ``grad_norm`` is the sup norm of the residual density ``g_i / w_i`` of
    the integrated nodal gradient.
    """

    solution: GridFunction
    iterations: int
    grad_norm: float
    energy: float
    converged: bool
    tag: str = ""
    status: str = ""
    tol: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "converged" if self.converged else "not-converged"

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "status": self.status,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "grad_norm": float(self.grad_norm),
            "tol": float(self.tol),
            "energy": float(self.energy),
            "diagnostics": {k: _clean(v) for k, v in sorted(self.diagnostics.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, outdir, stem: str) -> None:
        """Write ``<stem>.report.json`` and the solution as ``<stem>.csv``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"{stem}.report.json").write_text(self.to_json() + "\n")
        write_csv(self.solution, outdir / f"{stem}.csv")
