"""Deflation: project converged eigenfunctions out of the current candidate.

The candidate u~ is replaced by

    u_perp = u~ - sum_j  <u~, u_j>_w / <u_j, u_j>_w  u_j

using the weighted grid inner product of the values (gradients are combined
with the same coefficients).  The stored family is orthogonalized against
itself under the same inner product before the subtraction, so u_perp is
exactly orthogonal to every stored entry even when the entries have drifted
slightly off orthogonality (snapshots re-evaluated on a fresh sample batch);
for an already-orthogonal family the orthogonalization is a no-op and the
formula above applies verbatim.  The coefficients depend on the current
network parameters, so the pullback of a projected bundle routes extra
cotangent mass back through the candidate values; the stored basis entries
are constants.

Two storage modes exist: deterministic grids keep normalized samples of each
converged eigenfunction, Monte Carlo runs keep parameter snapshots that are
re-evaluated on every fresh batch.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .ansatz import NeuralAnsatz, builtin_levelset
from .mlp import EvalBundle, MlpSpec
from .quadrature import QuadratureGrid

__all__ = [
    "GridEntry",
    "SnapshotEntry",
    "EigenBasis",
    "project_out",
    "project_out_mc",
    "projection_operator",
    "orthogonality_report",
    "export_basis_csv",
    "import_basis_csv",
    "export_snapshots_json",
    "import_snapshots_json",
]


@dataclass
class GridEntry:
    """Converged eigenfunction stored as samples on the training grid."""

    eigenvalue: float
    values: np.ndarray  # (n, out)
    grads: np.ndarray  # (n, out, d)


@dataclass
class SnapshotEntry:
    """Converged eigenfunction stored as a parameter snapshot."""

    eigenvalue: float
    params: np.ndarray
    ansatz: NeuralAnsatz


@dataclass
class EigenBasis:
    """Ordered list of converged entries plus the grid they live on (grid mode)."""

    mode: str = "grid"  # "grid" | "snapshot"
    entries: List = field(default_factory=list)
    grid: Optional[QuadratureGrid] = None
    _ortho_cache: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("grid", "snapshot"):
            raise ValueError(f"unknown basis mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def eigenvalues(self) -> np.ndarray:
        return np.array([e.eigenvalue for e in self.entries])

    def append(self, entry) -> None:
        if self.mode == "grid" and not isinstance(entry, GridEntry):
            raise TypeError("grid-mode basis takes GridEntry")
        if self.mode == "snapshot" and not isinstance(entry, SnapshotEntry):
            raise TypeError("snapshot-mode basis takes SnapshotEntry")
        if self.entries and entry.eigenvalue < self.entries[-1].eigenvalue - 1e-9:
            import warnings

            warnings.warn(
                f"appended eigenvalue {entry.eigenvalue:.6g} breaks ascending order "
                f"(previous {self.entries[-1].eigenvalue:.6g})",
                stacklevel=2,
            )
        self.entries.append(entry)
        self._ortho_cache = None

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """Grid-mode entry samples stacked to (J, n, out) and (J, n, out, d)."""
        if self.mode != "grid":
            raise ValueError("stacked samples exist only in grid mode")
        vals = np.stack([e.values for e in self.entries])
        grads = np.stack([e.grads for e in self.entries])
        return vals, grads


def _orthogonalized_family(weights, basis_vals, basis_grads):
    """Modified Gram-Schmidt sweep over the stored family itself.

    Returns value/gradient stacks spanning the same space but mutually
    orthogonal under the weighted inner product, plus their squared norms.
    """
    bv = basis_vals.copy()
    bg = basis_grads.copy()
    norms = np.empty(bv.shape[0])
    for j in range(bv.shape[0]):
        nj = float(np.einsum("n,no,no->", weights, bv[j], bv[j]))
        if not nj > 1e-30:
            raise ValueError("basis entry with numerically zero norm (dependent or collapsed family)")
        norms[j] = nj
        if j + 1 < bv.shape[0]:
            c = np.einsum("n,kno,no->k", weights, bv[j + 1 :], bv[j]) / nj
            bv[j + 1 :] -= c[:, None, None] * bv[j]
            bg[j + 1 :] -= c[:, None, None, None] * bg[j]
    return bv, bg, norms


def _project_arrays(values, grads, weights, basis_vals, basis_grads):
    """Array core of the projection against an already-orthogonal family.

    basis_vals: (J, n, out); basis_grads: (J, n, out, d).
    """
    norms = np.einsum("n,jno,jno->j", weights, basis_vals, basis_vals)
    coeffs = np.einsum("n,no,jno->j", weights, values, basis_vals) / norms
    pvals = values - np.einsum("j,jno->no", coeffs, basis_vals)
    pgrads = grads - np.einsum("j,jnoc->noc", coeffs, basis_grads)
    return pvals, pgrads, coeffs, norms


def _projection_cotangents(cot_values, cot_spatial, weights, basis_vals, basis_grads, norms):
    """Map cotangents of the projected pair back to cotangents of the candidate.

    The gradient channel passes through untouched; the value channel picks up
    the sensitivity of each projection coefficient.
    """
    sens = np.einsum("no,jno->j", cot_values, basis_vals)
    sens += np.einsum("noc,jnoc->j", cot_spatial, basis_grads)
    adj = np.einsum("j,jno->no", sens / norms, basis_vals) * weights[:, None]
    return cot_values - adj, cot_spatial


def project_out(candidate: EvalBundle, basis: EigenBasis, grid: QuadratureGrid) -> EvalBundle:
    """Deflate a candidate bundle against a grid-mode basis."""
    if basis.mode != "grid":
        raise ValueError("project_out needs a grid-mode basis; use project_out_mc for snapshots")
    if len(basis) == 0:
        return candidate
    if basis.grid is not None and basis.grid.size != grid.size:
        raise ValueError("basis was stored on a different grid")
    if basis._ortho_cache is None or basis._ortho_cache[0].shape[0] != len(basis):
        raw_v, raw_g = basis.stacked()
        basis._ortho_cache = _orthogonalized_family(grid.weights, raw_v, raw_g)
    bv, bg, norms = basis._ortho_cache
    if bv.shape[1] != candidate.values.shape[0]:
        raise ValueError("candidate and basis disagree on node count")
    pvals, pgrads, _, _ = _project_arrays(candidate.values, candidate.spatial_grads, grid.weights, bv, bg)

    inner_pullback = candidate.pullback

    def pullback(cot_values, cot_spatial):
        cv, cg = _projection_cotangents(cot_values, cot_spatial, grid.weights, bv, bg, norms)
        return inner_pullback(cv, cg)

    return EvalBundle(values=pvals, spatial_grads=pgrads, pullback=pullback if inner_pullback else None)


def project_out_mc(
    candidate: EvalBundle,
    basis: EigenBasis,
    batch: QuadratureGrid,
    cache=None,
) -> EvalBundle:
    """Deflate against snapshot entries re-evaluated on the current batch.

    The snapshots share the candidate's boundary factor, so a prepared cache
    for the batch can be passed in to skip recomputing it per entry.
    """
    if basis.mode != "snapshot":
        raise ValueError("project_out_mc needs a snapshot-mode basis")
    if len(basis) == 0:
        return candidate
    bv = []
    bg = []
    for entry in basis.entries:
        b = entry.ansatz.eval(entry.params, batch.points, cache=cache)
        bv.append(b.values)
        bg.append(b.spatial_grads)
    bv, bg, norms = _orthogonalized_family(batch.weights, np.stack(bv), np.stack(bg))
    pvals, pgrads, _, _ = _project_arrays(candidate.values, candidate.spatial_grads, batch.weights, bv, bg)

    inner_pullback = candidate.pullback

    def pullback(cot_values, cot_spatial):
        cv, cg = _projection_cotangents(cot_values, cot_spatial, batch.weights, bv, bg, norms)
        return inner_pullback(cv, cg)

    return EvalBundle(values=pvals, spatial_grads=pgrads, pullback=pullback if inner_pullback else None)


def projection_operator(basis: EigenBasis, grid: QuadratureGrid):
    """Array-level deflation pair for a grid-mode basis.

    Returns ``(apply, cotangent)``: ``apply(values, grads)`` deflates sample
    arrays, ``cotangent(cv, cg)`` maps cotangents of the deflated pair back to
    the raw pair.  Both are identities for an empty basis.
    """
    if basis.mode != "grid":
        raise ValueError("projection_operator needs a grid-mode basis")
    if len(basis) == 0:
        return (lambda v, g: (v, g)), (lambda cv, cg: (cv, cg))
    if basis._ortho_cache is None or basis._ortho_cache[0].shape[0] != len(basis):
        raw_v, raw_g = basis.stacked()
        basis._ortho_cache = _orthogonalized_family(grid.weights, raw_v, raw_g)
    bv, bg, norms = basis._ortho_cache

    def apply(values, grads):
        pv, pg, _, _ = _project_arrays(values, grads, grid.weights, bv, bg)
        return pv, pg

    def cotangent(cv, cg):
        return _projection_cotangents(cv, cg, grid.weights, bv, bg, norms)

    return apply, cotangent


def orthogonality_report(basis: EigenBasis, grid: QuadratureGrid) -> np.ndarray:
    """Normalized Gram matrix of the stored entries under the grid inner product."""
    if basis.mode != "grid":
        raise ValueError("orthogonality report needs grid samples")
    if len(basis) == 0:
        return np.zeros((0, 0))
    bv, _ = basis.stacked()
    gram = np.einsum("n,ino,jno->ij", grid.weights, bv, bv)
    d = np.sqrt(np.diag(gram))
    return gram / np.outer(d, d)


def export_basis_csv(basis: EigenBasis, grid: QuadratureGrid, path) -> None:
    """Grid samples as CSV: coordinates, weight, then one value column per entry/channel."""
    if basis.mode != "grid":
        raise ValueError("CSV export covers grid-mode bases")
    path = Path(path)
    bv, _ = basis.stacked()
    n, out = bv.shape[1], bv.shape[2]
    dim = grid.dim
    header = [f"x{i + 1}" for i in range(dim)] + ["weight"]
    for j in range(len(basis)):
        for o in range(out):
            header.append(f"u{j + 1}" if out == 1 else f"u{j + 1}_{o + 1}")
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [f"{grid.points[i, c]:.17g}" for c in range(dim)] + [f"{grid.weights[i]:.17g}"]
            row += [f"{bv[j, i, o]:.17g}" for j in range(len(basis)) for o in range(out)]
            writer.writerow(row)
    meta = {
        "eigenvalues": [float(e.eigenvalue) for e in basis.entries],
        "output_dim": out,
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")


def import_basis_csv(path, grads: Optional[Sequence[np.ndarray]] = None) -> Tuple[EigenBasis, QuadratureGrid]:
    """Inverse of ``export_basis_csv``; gradients are not round-tripped.

    Entries come back with zero gradient samples unless ``grads`` supplies
    them, which is enough for value-only uses (reports, plotting, moments).
    """
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    out = int(meta["output_dim"])
    eigenvalues = meta["eigenvalues"]
    with path.open() as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    dim = sum(1 for h in header if h.startswith("x"))
    pts = data[:, :dim]
    wts = data[:, dim]
    grid = QuadratureGrid(points=pts, weights=wts)
    basis = EigenBasis(mode="grid", grid=grid)
    n = data.shape[0]
    col = dim + 1
    for j, lam in enumerate(eigenvalues):
        vals = data[:, col : col + out].reshape(n, out)
        col += out
        g = grads[j] if grads is not None else np.zeros((n, out, dim))
        basis.entries.append(GridEntry(eigenvalue=float(lam), values=vals, grads=g))
    return basis, grid


def export_snapshots_json(basis: EigenBasis, path) -> None:
    """Snapshot entries as JSON: network shape, boundary factor, flat parameters."""
    if basis.mode != "snapshot":
        raise ValueError("JSON export covers snapshot-mode bases")
    payload = []
    for e in basis.entries:
        spec = e.ansatz.spec
        payload.append(
            {
                "eigenvalue": float(e.eigenvalue),
                "input_dim": spec.input_dim,
                "hidden_widths": list(spec.hidden_widths),
                "output_dim": spec.output_dim,
                "activation": spec.activation,
                "levelset": e.ansatz.levelset.name,
                "levelset_dim": e.ansatz.levelset.spatial_dim,
                "params": [float(v) for v in e.params],
            }
        )
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def import_snapshots_json(path) -> EigenBasis:
    payload = json.loads(Path(path).read_text())
    basis = EigenBasis(mode="snapshot")
    for item in payload:
        spec = MlpSpec(
            input_dim=item["input_dim"],
            hidden_widths=tuple(item["hidden_widths"]),
            output_dim=item["output_dim"],
            activation=item["activation"],
        )
        ls = builtin_levelset(item["levelset"], dim=item["levelset_dim"])
        ans = NeuralAnsatz(spec=spec, levelset=ls)
        basis.entries.append(
            SnapshotEntry(eigenvalue=float(item["eigenvalue"]), params=np.array(item["params"]), ansatz=ans)
        )
    return basis
