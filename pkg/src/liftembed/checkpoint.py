"""Binary checkpoints: network parameters, optimizer state and shock speeds.

Layout (little-endian)::

    magic  b"LEMB"
    u8     format version
    u32 x3 depth, width, input_dim
    u32    number of sections
    per section: 4-byte tag, u64 element count, float64 payload
    u32    CRC-32 of everything above

Every array is stored as raw float64 so a reload is bit-exact.
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .exceptions import CheckpointError
from .network import Network
from .optim import OptimState
from .shock_infer import SpeedGrid

MAGIC = b"LEMB"
VERSION = 1


@dataclass
class Checkpoint:
    network: Network
    opt_state: OptimState = None
    speed_grid: SpeedGrid = None


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8")


def _opt_sections(state):
    scalars = [state.size, state.lr, state.gamma, state.betas[0], state.betas[1], state.eps,
               state.weight_decay, state.step_count]
    return [(b"OPTS", _f64(scalars)), (b"MILE", _f64(state.milestones)), (b"MOM1", _f64(state.m)),
            (b"MOM2", _f64(state.v)), (b"DMSK", _f64(state.decay_mask))]


def _grid_sections(grid):
    hyp = np.nan if grid.hypothesis is None else grid.hypothesis
    meta = [grid.T, grid.h, grid.x0, hyp, 1.0 if grid.mode == "constant" else 0.0]
    return [(b"SGRD", _f64(meta)), (b"SPED", _f64(grid.values))]


def save_checkpoint(path, net, opt_state=None, speed_grid=None):
    sections = [(b"PARM", _f64(net.params))]
    if opt_state is not None:
        sections += _opt_sections(opt_state)
    if speed_grid is not None:
        sections += _grid_sections(speed_grid)
    body = bytearray(MAGIC)
    body += struct.pack("<B3II", VERSION, net.depth, net.width, net.input_dim, len(sections))
    for tag, arr in sections:
        body += tag + struct.pack("<Q", arr.size) + arr.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    with open(path, "wb") as fh:
        fh.write(body)


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    if len(raw) < 25 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) != crc:
        raise CheckpointError(f"{path}: checksum mismatch (file is corrupt or truncated)")
    version, depth, width, input_dim, count = struct.unpack("<B3II", raw[4:21])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos, end = 21, len(raw) - 4
    sections = {}
    for _ in range(count):
        if pos + 12 > end:
            raise CheckpointError(f"{path}: truncated section header")
        tag = raw[pos:pos + 4]
        (n,) = struct.unpack("<Q", raw[pos + 4:pos + 12])
        pos += 12
        if pos + 8 * n > end:
            raise CheckpointError(f"{path}: truncated section {tag!r}")
        sections[tag] = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).astype(np.float64)
        pos += 8 * n
    if b"PARM" not in sections:
        raise CheckpointError(f"{path}: missing network parameters")
    try:
        net = Network(depth, width, input_dim, sections[b"PARM"])
    except ValueError as err:
        raise CheckpointError(f"{path}: {err}") from err

    state = None
    if b"OPTS" in sections:
        size, lr, gamma, b1, b2, eps, wd, steps = sections[b"OPTS"]
        state = OptimState(int(size), lr=lr, milestones=tuple(int(m) for m in sections[b"MILE"]),
                           gamma=gamma, betas=(b1, b2), eps=eps, weight_decay=wd,
                           decay_mask=sections[b"DMSK"].astype(bool), m=sections[b"MOM1"],
                           v=sections[b"MOM2"], step_count=int(steps))
    grid = None
    if b"SGRD" in sections:
        T, h, x0, hyp, const = sections[b"SGRD"]
        grid = SpeedGrid(T, h, x0, sections[b"SPED"], "constant" if const else "grid",
                         None if np.isnan(hyp) else float(hyp))
    return Checkpoint(net, state, grid)
