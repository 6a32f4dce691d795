"""DSLB batch-exchange format and the stdin/stdout loss evaluator.

An external trainer serializes a waypoint batch, pipes it to the
``drivesafer-core`` executable and reads back loss values plus gradients.
Everything is little-endian. Request layout:

    magic   4 bytes  b"DSLB"
    version u32      (currently 1)
    B       u32      scenes in the batch
    T       u32      waypoints per scene
    dt      f64
    then per scene:
      waypoints        T*2 f64            (x, y per step)
      agent_count      u32                (N)
      agent_positions  T*N*2 f64          (step-major, then agent)
      n_outers         u32
      n_holes          u32
      per ring, outers first: count u32, then count*2 f64 vertices

Response layout:

    l_dac, l_col, l_comf   3 f64   (unweighted values)
    grad                   B*T*2 f64   (lambda-weighted total gradient)

The LossConfig travels out-of-band as command-line flags of the evaluator,
so a request's bytes depend only on the batch itself.
"""

import struct
import sys

import numpy as np

from .errors import ProtocolError
from .geometry import Polygon, PolygonSet
from .losses import DacMode, LossBatch, LossConfig, LossResult, loss_total

MAGIC = b"DSLB"
VERSION = 1


def _f64_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def write_request(batch: LossBatch) -> bytes:
    out = [MAGIC, struct.pack("<III", VERSION, batch.batch_size, batch.horizon)]
    out.append(struct.pack("<d", batch.dt))
    for i in range(batch.batch_size):
        out.append(_f64_bytes(batch.waypoints[i]))
        agents = batch.agent_positions[i]
        out.append(struct.pack("<I", agents.shape[1]))
        out.append(_f64_bytes(agents))
        area = batch.areas[i]
        out.append(struct.pack("<II", len(area.outers), len(area.holes)))
        for ring in area.outers + area.holes:
            out.append(struct.pack("<I", ring.vertices.shape[0]))
            out.append(_f64_bytes(ring.vertices))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ProtocolError(
                f"truncated request: wanted {n} bytes at offset {self.offset}, "
                f"have {len(self.data) - self.offset}"
            )
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f64_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * 8)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def read_request(data: bytes) -> LossBatch:
    r = _Reader(data)
    magic = r.take(4)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32()
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}, expected {VERSION}")
    b = r.u32()
    t = r.u32()
    dt = r.f64()
    waypoints = np.zeros((b, t, 2))
    areas = []
    agent_positions = []
    for i in range(b):
        waypoints[i] = r.f64_array((t, 2))
        n = r.u32()
        agent_positions.append(r.f64_array((t, n, 2)))
        n_outers = r.u32()
        n_holes = r.u32()
        rings = []
        for _ in range(n_outers + n_holes):
            count = r.u32()
            rings.append(Polygon(r.f64_array((count, 2))))
        areas.append(PolygonSet(outers=tuple(rings[:n_outers]), holes=tuple(rings[n_outers:])))
    if r.offset != len(data):
        raise ProtocolError(f"{len(data) - r.offset} trailing bytes after request")
    return LossBatch(waypoints, dt, areas, agent_positions)


def write_response(result: LossResult) -> bytes:
    header = struct.pack("<3d", result.l_dac, result.l_col, result.l_comf)
    return header + _f64_bytes(result.grad)


def read_response(data: bytes, batch_size: int, horizon: int):
    """Decode a response into ((l_dac, l_col, l_comf), grad)."""
    r = _Reader(data)
    values = struct.unpack("<3d", r.take(24))
    grad = r.f64_array((batch_size, horizon, 2))
    if r.offset != len(data):
        raise ProtocolError(f"{len(data) - r.offset} trailing bytes after response")
    return values, grad


def evaluate_request(data: bytes, cfg: LossConfig = None) -> bytes:
    return write_response(loss_total(read_request(data), cfg or LossConfig()))


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        prog="drivesafer-core",
        description="Evaluate safety losses on a DSLB batch from stdin.",
    )
    parser.add_argument("--lambda-dac", type=float, default=1.0)
    parser.add_argument("--lambda-col", type=float, default=1.0)
    parser.add_argument("--lambda-comf", type=float, default=1.0)
    parser.add_argument("--d-col", type=float, default=2.0)
    parser.add_argument("--j-th", type=float, default=10.0)
    parser.add_argument(
        "--dac-mode", choices=[m.value for m in DacMode], default=DacMode.SIGNED_DISTANCE_SURROGATE.value
    )
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 1
    cfg = LossConfig(
        lambda_dac=args.lambda_dac, lambda_col=args.lambda_col,
        lambda_comf=args.lambda_comf, d_col=args.d_col, j_th=args.j_th,
        dac_mode=DacMode(args.dac_mode),
    )
    data = sys.stdin.buffer.read()
    try:
        response = evaluate_request(data, cfg)
    except (ProtocolError, ValueError) as e:
        print(f"drivesafer-core: {e}", file=sys.stderr)
        return 2
    sys.stdout.buffer.write(response)
    sys.stdout.buffer.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
