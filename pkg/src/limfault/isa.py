"""Binary instruction stream shared by the mapper and the controller.

Little-endian, versioned, tag-length-value records behind a fixed header:

    magic "XFLT" | version u16 | family u8 | rows u16 | cols u16 | xbars u16

Record opcodes: WRITE(1), COMPUTE(2), READ(3), END(255).  Every payload
record carries (layer, unit, chunk) tags so the controller can associate
records with model kernels without re-running the mapper.  Kernel bits are
packed LSB-first per byte in row order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .gates import Family, Gate

MAGIC = b"XFLT"
VERSION = 1

OP_WRITE, OP_COMPUTE, OP_READ, OP_END = 1, 2, 3, 255

_FAMILY_CODE = {Family.IMPLY: 0, Family.MAGIC: 1}
_CODE_FAMILY = {v: k for k, v in _FAMILY_CODE.items()}
_GATE_CODE = {g: i for i, g in enumerate(Gate)}
_CODE_GATE = {i: g for g, i in _GATE_CODE.items()}


class ParseError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"parse error at byte {offset}: {message}")
        self.offset = offset


@dataclass(frozen=True)
class Write:
    xb: int
    col: int
    row_off: int
    layer: int
    unit: int
    chunk: int
    bits: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class Compute:
    xb: int
    gate: Gate
    a_col: int
    b_col: int
    out_col: int
    work_cols: tuple[int, ...]
    row_off: int
    length: int
    layer: int
    unit: int
    chunk: int


@dataclass(frozen=True)
class Read:
    xb: int
    col: int
    row_off: int
    length: int
    layer: int
    unit: int
    chunk: int


@dataclass(frozen=True)
class End:
    pass


Record = Write | Compute | Read | End


@dataclass
class InstructionStream:
    family: Family
    rows: int
    cols: int
    crossbar_count: int
    records: list[Record] = field(default_factory=list)


def _pack_bits(bits) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b:
            out[i >> 3] |= 1 << (i & 7)
    return bytes(out)


def _unpack_bits(data: bytes, n: int) -> tuple[int, ...]:
    return tuple((data[i >> 3] >> (i & 7)) & 1 for i in range(n))


def serialize(stream: InstructionStream) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack(
        "<HBHHH",
        VERSION,
        _FAMILY_CODE[Family(stream.family)],
        stream.rows,
        stream.cols,
        stream.crossbar_count,
    )
    for rec in stream.records:
        if isinstance(rec, Write):
            out += struct.pack("<B", OP_WRITE)
            out += struct.pack(
                "<HHHHIHH", rec.xb, rec.col, rec.row_off, rec.layer, rec.unit, rec.chunk, len(rec.bits)
            )
            out += _pack_bits(rec.bits)
        elif isinstance(rec, Compute):
            out += struct.pack("<B", OP_COMPUTE)
            out += struct.pack(
                "<HBHHHB",
                rec.xb,
                _GATE_CODE[Gate(rec.gate)],
                rec.a_col,
                rec.b_col,
                rec.out_col,
                len(rec.work_cols),
            )
            out += struct.pack(f"<{len(rec.work_cols)}H", *rec.work_cols)
            out += struct.pack("<HHHIH", rec.row_off, rec.length, rec.layer, rec.unit, rec.chunk)
        elif isinstance(rec, Read):
            out += struct.pack("<B", OP_READ)
            out += struct.pack(
                "<HHHHHIH", rec.xb, rec.col, rec.row_off, rec.length, rec.layer, rec.unit, rec.chunk
            )
        elif isinstance(rec, End):
            out += struct.pack("<B", OP_END)
        else:
            raise TypeError(f"unknown record {rec!r}")
    return bytes(out)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ParseError(self.pos, f"truncated record (needed {size} bytes)")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def take_raw(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ParseError(self.pos, f"truncated payload (needed {size} bytes)")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk


def parse(data: bytes) -> InstructionStream:
    if data[:4] != MAGIC:
        raise ParseError(0, f"bad magic {data[:4]!r}")
    cur = _Cursor(data)
    cur.pos = 4
    version, fam_code, rows, cols, xbars = cur.take("<HBHHH")
    if version != VERSION:
        raise ParseError(4, f"unsupported version {version}")
    if fam_code not in _CODE_FAMILY:
        raise ParseError(6, f"unknown family code {fam_code}")
    stream = InstructionStream(_CODE_FAMILY[fam_code], rows, cols, xbars)
    ended = False
    while cur.pos < len(data):
        at = cur.pos
        (op,) = cur.take("<B")
        if ended:
            raise ParseError(at, "data after END record")
        if op == OP_WRITE:
            xb, col, row_off, layer, unit, chunk, nbits = cur.take("<HHHHIHH")
            payload = cur.take_raw((nbits + 7) // 8)
            stream.records.append(Write(xb, col, row_off, layer, unit, chunk, _unpack_bits(payload, nbits)))
        elif op == OP_COMPUTE:
            xb, gate_code, a_col, b_col, out_col, n_work = cur.take("<HBHHHB")
            if gate_code not in _CODE_GATE:
                raise ParseError(at, f"unknown gate opcode {gate_code}")
            work = cur.take(f"<{n_work}H") if n_work else ()
            row_off, length, layer, unit, chunk = cur.take("<HHHIH")
            stream.records.append(
                Compute(xb, _CODE_GATE[gate_code], a_col, b_col, out_col, tuple(work), row_off, length, layer, unit, chunk)
            )
        elif op == OP_READ:
            stream.records.append(Read(*cur.take("<HHHHHIH")))
        elif op == OP_END:
            stream.records.append(End())
            ended = True
        else:
            raise ParseError(at, f"unknown opcode {op}")
    if not ended:
        raise ParseError(len(data), "stream missing END record")
    return stream


def disassemble(stream: InstructionStream) -> str:
    lines = [
        f"HEADER family={stream.family.value} rows={stream.rows} cols={stream.cols} "
        f"xbars={stream.crossbar_count} version={VERSION}"
    ]
    for rec in stream.records:
        if isinstance(rec, Write):
            bits = "".join(str(b) for b in rec.bits)
            lines.append(
                f"WRITE xb{rec.xb} col{rec.col} rows{rec.row_off}..{rec.row_off + rec.length - 1} "
                f"{bits} (L{rec.layer} u{rec.unit} c{rec.chunk})"
            )
        elif isinstance(rec, Compute):
            work = ",".join(str(c) for c in rec.work_cols)
            lines.append(
                f"COMPUTE xb{rec.xb} {rec.gate.value} a=col{rec.a_col} b=col{rec.b_col} "
                f"out=col{rec.out_col} work=[{work}] rows{rec.row_off}..{rec.row_off + rec.length - 1} "
                f"(L{rec.layer} u{rec.unit} c{rec.chunk})"
            )
        elif isinstance(rec, Read):
            lines.append(
                f"READ xb{rec.xb} col{rec.col} rows{rec.row_off}..{rec.row_off + rec.length - 1} "
                f"(L{rec.layer} u{rec.unit} c{rec.chunk})"
            )
        else:
            lines.append("END")
    return "\n".join(lines) + "\n"


class StreamValidationError(ValueError):
    pass


def validate(stream: InstructionStream) -> None:
    """Reject overlapping kernel placements and dangling compute operands."""
    written: dict[int, dict[int, list[tuple[int, int]]]] = {}
    for rec in stream.records:
        if isinstance(rec, (Write, Compute, Read)):
            if rec.xb >= stream.crossbar_count:
                raise StreamValidationError(f"record targets crossbar {rec.xb} of {stream.crossbar_count}")
        if isinstance(rec, Write):
            if rec.row_off + rec.length > stream.rows or rec.col >= stream.cols:
                raise StreamValidationError(f"WRITE outside array: {rec}")
            spans = written.setdefault(rec.xb, {}).setdefault(rec.col, [])
            for lo, hi in spans:
                if rec.row_off < hi and lo < rec.row_off + rec.length:
                    raise StreamValidationError(
                        f"overlapping placement on xb{rec.xb} col{rec.col} rows {rec.row_off}..{rec.row_off + rec.length - 1}"
                    )
            spans.append((rec.row_off, rec.row_off + rec.length))
        elif isinstance(rec, Compute):
            cols = {rec.a_col, rec.b_col, rec.out_col, *rec.work_cols}
            if len(cols) != 3 + len(rec.work_cols):
                raise StreamValidationError(f"COMPUTE reuses a column: {rec}")
            if max(cols) >= stream.cols or rec.row_off + rec.length > stream.rows:
                raise StreamValidationError(f"COMPUTE outside array: {rec}")
            spans = written.get(rec.xb, {}).get(rec.b_col, [])
            covered = any(lo <= rec.row_off and rec.row_off + rec.length <= hi for lo, hi in spans)
            if not covered:
                raise StreamValidationError(
                    f"COMPUTE operand col{rec.b_col} rows {rec.row_off}.. not populated by a WRITE"
                )
