"""Field snapshots of spinor grids.

Binary layout, all little-endian: magic ``G2LS``, uint32 version, uint32 M,
N2, N3, float64 epsilon, alpha, beta, warp bound K, N2*N3 float64 warp samples, then
(M+1)*N2*N3 records of (u.real, u.imag, v.real, v.imag) in row-major
(x1, x2, x3) order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from g2lab.exceptions import G2LabError, SnapshotFormatError
from g2lab.thin_dirac import SpinorGrid, ThinCylinderGrid, TwistedBundle, WarpProfile
from g2lab_cli.models import ReportModel

logger = logging.getLogger(__name__)

MAGIC = b"G2LS"
VERSION = 2

HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("m", "<u4"),
        ("n2", "<u4"),
        ("n3", "<u4"),
        ("epsilon", "<f8"),
        ("alpha", "<f8"),
        ("beta", "<f8"),
        ("k", "<f8"),
    ]
)
RECORD = np.dtype("<f8")


@dataclass(frozen=True)
class Snapshot:
    values: SpinorGrid
    twist: TwistedBundle
    warp: WarpProfile


class SnapshotRecord(ReportModel):
    version: int
    m: int
    n2: int
    n3: int
    epsilon: float
    alpha: float
    beta: float
    k: float
    h: list[list[float]]
    u_real: list[float]
    u_imag: list[float]
    v_real: list[float]
    v_imag: list[float]

    @classmethod
    def from_snapshot(cls, snapshot: Snapshot) -> SnapshotRecord:
        values = snapshot.values
        grid = values.grid
        return cls(
            version=VERSION,
            m=grid.M,
            n2=grid.N2,
            n3=grid.N3,
            epsilon=grid.epsilon,
            alpha=snapshot.twist.alpha,
            beta=snapshot.twist.beta,
            k=snapshot.warp.K,
            h=snapshot.warp.h.tolist(),
            u_real=values.u.real.ravel().tolist(),
            u_imag=values.u.imag.ravel().tolist(),
            v_real=values.v.real.ravel().tolist(),
            v_imag=values.v.imag.ravel().tolist(),
        )

    def to_snapshot(self) -> Snapshot:
        if self.version != VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {self.version}")
        try:
            grid = ThinCylinderGrid(self.epsilon, self.m, self.n2, self.n3)
            u = np.asarray(self.u_real) + 1j * np.asarray(self.u_imag)
            v = np.asarray(self.v_real) + 1j * np.asarray(self.v_imag)
            if u.size != grid.node_count or v.size != grid.node_count:
                raise SnapshotFormatError(
                    f"expected {grid.node_count} samples per component, got {u.size} and {v.size}"
                )
            values = SpinorGrid(grid, u.reshape(grid.shape), v.reshape(grid.shape))
            return Snapshot(
                values,
                TwistedBundle(self.alpha, self.beta),
                WarpProfile.from_samples(self.h, self.k),
            )
        except SnapshotFormatError:
            raise
        except G2LabError as error:
            raise SnapshotFormatError(f"snapshot describes an invalid field: {error}") from error


def _check_matches(snapshot: Snapshot) -> None:
    if not snapshot.warp.matches(snapshot.values.grid):
        raise SnapshotFormatError("warp samples do not match the field grid")


def encode(snapshot: Snapshot) -> bytes:
    _check_matches(snapshot)
    values = snapshot.values
    grid = values.grid
    header = np.array(
        [
            (
                MAGIC,
                VERSION,
                grid.M,
                grid.N2,
                grid.N3,
                grid.epsilon,
                snapshot.twist.alpha,
                snapshot.twist.beta,
                snapshot.warp.K,
            )
        ],
        dtype=HEADER,
    )
    records = np.stack([values.u.real, values.u.imag, values.v.real, values.v.imag], axis=-1)
    return (
        header.tobytes()
        + snapshot.warp.h.astype(RECORD).tobytes()
        + records.astype(RECORD).tobytes()
    )


def decode(payload: bytes) -> Snapshot:
    if len(payload) < HEADER.itemsize:
        raise SnapshotFormatError(f"snapshot is {len(payload)} bytes, shorter than its header")
    header = np.frombuffer(payload, dtype=HEADER, count=1)[0]
    if bytes(header["magic"]) != MAGIC:
        raise SnapshotFormatError(f"bad magic {bytes(header['magic'])!r}")
    if int(header["version"]) != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {int(header['version'])}")
    m, n2, n3 = int(header["m"]), int(header["n2"]), int(header["n3"])
    surface = n2 * n3
    nodes = (m + 1) * surface
    expected = HEADER.itemsize + RECORD.itemsize * (surface + 4 * nodes)
    if len(payload) != expected:
        raise SnapshotFormatError(f"snapshot holds {len(payload)} bytes, layout needs {expected}")

    body = np.frombuffer(payload, dtype=RECORD, offset=HEADER.itemsize)
    h = body[:surface].reshape(n2, n3)
    records = body[surface:].reshape(m + 1, n2, n3, 4)
    try:
        grid = ThinCylinderGrid(float(header["epsilon"]), m, n2, n3)
        values = SpinorGrid(
            grid,
            records[..., 0] + 1j * records[..., 1],
            records[..., 2] + 1j * records[..., 3],
        )
        twist = TwistedBundle(float(header["alpha"]), float(header["beta"]))
        warp = WarpProfile.from_samples(h.copy(), float(header["k"]))
    except G2LabError as error:
        raise SnapshotFormatError(f"snapshot describes an invalid field: {error}") from error
    return Snapshot(values, twist, warp)


def write_snapshot(path: Path, snapshot: Snapshot) -> None:
    if path.suffix == ".json":
        _check_matches(snapshot)
        record = SnapshotRecord.from_snapshot(snapshot)
        path.write_text(record.model_dump_json(by_alias=True, indent=2))
    else:
        path.write_bytes(encode(snapshot))
    logger.info("wrote snapshot %s", path)


def read_snapshot(path: Path) -> Snapshot:
    if path.suffix == ".json":
        try:
            record = SnapshotRecord.model_validate_json(path.read_text())
        except ValidationError as error:
            raise SnapshotFormatError(f"malformed snapshot record: {error}") from error
        return record.to_snapshot()
    return decode(path.read_bytes())
