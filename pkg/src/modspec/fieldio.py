"""Interchange formats: operator-field files and Fourier coefficient files.

Operator-field file (text, line oriented)::

    # modspec operator-field v1
    grid_size 2
    truncation 3
    hermitian yes
    encoding decimal            # or base64
    weights 0.5 0.5
    fiber_dims 1 1
    fiber 0
    <one line per matrix row>
    fiber 1
    ...

A decimal row lists ``re im`` pairs with 17 significant digits; a base64
row is the little-endian complex128 bytes of the row.  Both round-trip
bit-exactly.  Every error carries the byte offset of the offending line.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass

import numpy as np

from .algebra import ParameterGrid
from .diagonalizer import ModuleOperator
from .errors import FormatError

MAGIC = "# modspec operator-field v1"
HERMITIAN_TOL = 1e-10
WEIGHT_TOL = 1e-9


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class OperatorFieldFile:
    grid: ParameterGrid
    length: int
    fibers: list
    hermitian: bool = True

    @classmethod
    def from_operator(cls, K: ModuleOperator, hermitian: bool = True):
        return cls(K.grid, K.length, [np.array(f) for f in K.fibers], hermitian)

    def to_operator(self) -> ModuleOperator:
        return ModuleOperator(self.grid, self.length, self.fibers)

    # -- writing --------------------------------------------------------------
    def dumps(self, encoding: str = "decimal") -> str:
        if encoding not in ("decimal", "base64"):
            raise ValueError(f"unknown encoding {encoding!r}")
        out = [
            MAGIC,
            f"grid_size {len(self.grid)}",
            f"truncation {self.length}",
            f"hermitian {'yes' if self.hermitian else 'no'}",
            f"encoding {encoding}",
            "weights " + " ".join(_fmt(w) for w in self.grid.weights),
            "fiber_dims " + " ".join(str(n) for n in self.grid.fiber_dims),
        ]
        for g, f in enumerate(self.fibers):
            out.append(f"fiber {g}")
            for row in np.asarray(f, dtype=complex):
                if encoding == "decimal":
                    out.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row))
                else:
                    out.append(base64.b64encode(row.astype("<c16").tobytes()).decode("ascii"))
        return "\n".join(out) + "\n"

    def write(self, path, encoding: str = "decimal"):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.dumps(encoding))

    # -- reading --------------------------------------------------------------
    @classmethod
    def loads(cls, text: str | bytes) -> "OperatorFieldFile":
        if isinstance(text, str):
            text = text.encode("utf-8")
        lines = _Lines(text)
        first, off = lines.next_raw()
        if first.strip() != MAGIC:
            raise FormatError("missing operator-field header line", off)
        size = lines.keyed_int("grid_size")
        length = lines.keyed_int("truncation")
        herm = lines.keyed("hermitian")
        if herm not in ("yes", "no"):
            raise FormatError("hermitian must be yes or no", lines.last_offset)
        encoding = lines.keyed("encoding")
        if encoding not in ("decimal", "base64"):
            raise FormatError(f"unknown encoding {encoding!r}", lines.last_offset)
        weights = lines.keyed_floats("weights", size)
        woff = lines.last_offset
        dims = [int(x) for x in lines.keyed_floats("fiber_dims", size)]
        if abs(sum(weights) - 1.0) > WEIGHT_TOL:
            raise FormatError(f"weights sum to {sum(weights)!r}, expected 1", woff)
        try:
            grid = ParameterGrid(weights, dims)
        except ValueError as exc:
            raise FormatError(str(exc), woff) from None
        fibers = []
        for g, n in enumerate(dims):
            tag = lines.keyed("fiber")
            hoff = lines.last_offset
            if tag != str(g):
                raise FormatError(f"expected fiber {g}, found fiber {tag}", hoff)
            d = length * n
            rows = [lines.row(d, encoding) for _ in range(d)]
            f = np.array(rows, dtype=complex).reshape(d, d)
            if herm == "yes":
                defect = np.abs(f - f.conj().T).max() if f.size else 0.0
                if defect > HERMITIAN_TOL * max(1.0, np.abs(f).max()):
                    raise FormatError(f"fiber {g} declared Hermitian but defect is {defect:.3e}", hoff)
            fibers.append(f)
        lines.expect_end()
        return cls(grid, length, fibers, herm == "yes")

    @classmethod
    def read(cls, path) -> "OperatorFieldFile":
        with open(path, "rb") as fh:
            return cls.loads(fh.read())


class _Lines:
    """Line cursor over raw bytes that remembers byte offsets; skips blanks and comments."""

    def __init__(self, data: bytes):
        self.items = []
        pos = 0
        for raw in data.splitlines(keepends=True):
            self.items.append((raw.decode("utf-8", errors="replace").rstrip("\r\n"), pos))
            pos += len(raw)
        self.end = pos
        self.i = 0
        self.last_offset = 0

    def next_raw(self):
        if self.i >= len(self.items):
            raise FormatError("unexpected end of file", self.end)
        line, off = self.items[self.i]
        self.i += 1
        self.last_offset = off
        return line, off

    def next(self):
        while True:
            line, off = self.next_raw()
            s = line.strip()
            if s and not s.startswith("#"):
                return s, off

    def keyed(self, key):
        s, off = self.next()
        parts = s.split(None, 1)
        if parts[0] != key or len(parts) < 2:
            raise FormatError(f"expected '{key} <value>'", off)
        return parts[1].strip()

    def keyed_int(self, key):
        v = self.keyed(key)
        try:
            n = int(v)
        except ValueError:
            raise FormatError(f"{key} must be an integer", self.last_offset) from None
        if n < 1:
            raise FormatError(f"{key} must be positive", self.last_offset)
        return n

    def keyed_floats(self, key, count):
        v = self.keyed(key).split()
        if len(v) != count:
            raise FormatError(f"{key} needs {count} entries, found {len(v)}", self.last_offset)
        try:
            return [float(x) for x in v]
        except ValueError:
            raise FormatError(f"non-numeric entry in {key}", self.last_offset) from None

    def row(self, d, encoding):
        s, off = self.next()
        if encoding == "decimal":
            parts = s.split()
            if len(parts) != 2 * d:
                raise FormatError(f"row needs {2 * d} numbers, found {len(parts)}", off)
            try:
                vals = np.array([float(x) for x in parts])
            except ValueError:
                raise FormatError("non-numeric matrix entry", off) from None
            return vals[0::2] + 1j * vals[1::2]
        try:
            raw = base64.b64decode(s.encode("ascii"), validate=True)
        except (binascii.Error, UnicodeEncodeError):
            raise FormatError("corrupted base64 payload", off) from None
        if len(raw) != 16 * d:
            raise FormatError(f"base64 row holds {len(raw)} bytes, expected {16 * d}", off)
        return np.frombuffer(raw, dtype="<c16").astype(complex)

    def expect_end(self):
        while self.i < len(self.items):
            line, off = self.items[self.i]
            self.i += 1
            s = line.strip()
            if s and not s.startswith("#"):
                raise FormatError("trailing data after last fiber", off)


def read_coefficients(path) -> dict:
    """Parse ``k,l,re,im`` lines into ``{(k, l): complex}``.

    Blank lines and ``#`` comments are ignored; a repeated ``(k, l)`` is an
    error.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_coefficients(data)


def parse_coefficients(data: bytes | str) -> dict:
    if isinstance(data, str):
        data = data.encode("utf-8")
    coeffs = {}
    pos = 0
    for raw in data.splitlines(keepends=True):
        off = pos
        pos += len(raw)
        s = raw.decode("utf-8", errors="replace").split("#", 1)[0].strip()
        if not s:
            continue
        parts = [p.strip() for p in s.split(",")]
        if len(parts) != 4:
            raise FormatError("coefficient lines must read k,l,re,im", off)
        try:
            k, l = int(parts[0]), int(parts[1])
            w = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise FormatError("malformed coefficient line", off) from None
        if not np.isfinite(w):
            raise FormatError("non-finite coefficient", off)
        if (k, l) in coeffs:
            raise FormatError(f"duplicate coefficient ({k},{l})", off)
        coeffs[(k, l)] = w
    return coeffs


def write_coefficients(path, coeffs: dict):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("# k,l,re,im\n")
        for (k, l), w in sorted(coeffs.items()):
            fh.write(f"{k},{l},{_fmt(w.real)},{_fmt(w.imag)}\n")
