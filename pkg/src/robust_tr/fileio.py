"""File formats, run configuration and metrics output.

``.dten`` layout (little endian)::

    b"DTEN" | version u16 | N u16 | N x dim u64 | prod(dims) x float64

The payload is in mode-1-fastest order. ``.dmask`` files use the same
header followed by one byte (0 or 1) per entry.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .hq import KernelPolicy
from .tr import validate_cores

MAGIC = b"DTEN"
VERSION = 1
#: Refuse headers that claim more entries than this.
MAX_ENTRIES = 2**40


class TensorFormatError(ValueError):
    """Malformed ``.dten``/``.dmask`` file or core directory."""


def _atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _header(shape: Sequence[int]) -> bytes:
    if len(shape) == 0 or int(np.prod(shape)) == 0:
        raise TensorFormatError(f"cannot store a tensor with no entries (shape {tuple(shape)})")
    return MAGIC + struct.pack(f"<HH{len(shape)}Q", VERSION, len(shape), *shape)


def _parse(raw: bytes, itemsize: int, path) -> tuple[tuple, memoryview]:
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic, not a DTEN file")
    version, N = struct.unpack_from("<HH", raw, 4)
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    if N == 0:
        raise TensorFormatError(f"{path}: zero modes")
    end = 8 + 8 * N
    if len(raw) < end:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{N}Q", raw, 8)
    count = 1
    for d in dims:
        count *= d
        if count > MAX_ENTRIES:
            raise TensorFormatError(f"{path}: dimensions {dims} overflow the entry limit")
    if count == 0:
        raise TensorFormatError(f"{path}: tensor has no entries (dims {dims})")
    if len(raw) != end + count * itemsize:
        raise TensorFormatError(
            f"{path}: payload has {len(raw) - end} bytes, expected {count * itemsize}"
        )
    return tuple(int(d) for d in dims), memoryview(raw)[end:]


def write_tensor(X, path) -> None:
    X = np.asarray(X, dtype=np.float64)
    payload = X.ravel(order="F").astype("<f8").tobytes()
    _atomic_write_bytes(path, _header(X.shape) + payload)


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    dims, payload = _parse(raw, 8, path)
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims, order="F")


def write_mask(P, path) -> None:
    P = np.asarray(P, dtype=bool)
    payload = P.ravel(order="F").astype(np.uint8).tobytes()
    _atomic_write_bytes(path, _header(P.shape) + payload)


def read_mask(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    dims, payload = _parse(raw, 1, path)
    bits = np.frombuffer(payload, dtype=np.uint8)
    if np.any(bits > 1):
        raise TensorFormatError(f"{path}: mask payload must be 0/1 bytes")
    return bits.astype(bool).reshape(dims, order="F")


def save_cores(cores, directory, *, seed=None, solver: str | None = None, extra: dict | None = None) -> None:
    """Write ``manifest.json`` plus ``core_<k>.dten`` files into ``directory``."""
    cores = validate_cores(cores)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for k, Z in enumerate(cores, start=1):
        name = f"core_{k}.dten"
        write_tensor(Z, directory / name)
        files.append(name)
    manifest = {
        "N": len(cores),
        "dims": [Z.shape[1] for Z in cores],
        "ranks": [Z.shape[0] for Z in cores],
        "seed": seed,
        "solver": solver,
        "files": files,
    }
    if extra:
        manifest.update(extra)
    _atomic_write_text(directory / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def load_cores(directory) -> list[np.ndarray]:
    """Read a core directory, checking it against its manifest and the ring."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise TensorFormatError(f"{directory}: missing manifest.json") from exc
    N = manifest["N"]
    files = manifest.get("files") or [f"core_{k}.dten" for k in range(1, N + 1)]
    if len(files) != N or len(manifest["dims"]) != N or len(manifest["ranks"]) != N:
        raise TensorFormatError(f"{directory}: manifest lists inconsistent core counts")
    cores = [read_tensor(directory / f) for f in files]
    for k, Z in enumerate(cores):
        if Z.ndim != 3:
            raise TensorFormatError(f"{directory}/{files[k]}: core is not 3-way")
        r_next = manifest["ranks"][(k + 1) % N]
        if Z.shape != (manifest["ranks"][k], manifest["dims"][k], r_next):
            raise TensorFormatError(
                f"{directory}/{files[k]}: shape {Z.shape} disagrees with manifest"
            )
    try:
        return validate_cores(cores)
    except ValueError as exc:
        raise TensorFormatError(f"{directory}: {exc}") from exc


def ingest_image_stack(paths: Sequence) -> np.ndarray:
    """Load 8-bit PNG/PPM images as ``H x W x 3`` (one) or ``H x W x 3 x F``.

    Values are divided by 255.
    """
    from PIL import Image

    if not paths:
        raise ValueError("no image paths given")
    frames = []
    for p in paths:
        try:
            with Image.open(p) as im:
                if im.format not in ("PNG", "PPM"):
                    raise ValueError(f"{p}: only PNG/PPM images are supported, got {im.format}")
                if im.mode not in ("RGB", "RGBA", "L", "P"):
                    raise ValueError(f"{p}: not an 8-bit image (mode {im.mode})")
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        except OSError as exc:
            raise ValueError(f"{p}: unreadable image ({exc})") from exc
        if frames and arr.shape != frames[0].shape:
            raise ValueError(f"{p}: size {arr.shape[:2]} differs from {frames[0].shape[:2]}")
        frames.append(arr)
    if len(frames) == 1:
        return frames[0]
    return np.stack(frames, axis=3)


@dataclass
class RunConfig:
    """Everything needed to repeat one CLI run."""

    command: str
    input: str | None = None
    images: list = field(default_factory=list)
    mask: str | None = None
    truth: str | None = None
    out: str | None = None
    shape: list | None = None
    ranks: list | None = None
    rate: float | None = None
    noise: str | None = None
    sample_param: int | None = None
    variant: str = "sawrtrd"
    kernel: dict = field(default_factory=lambda: _kernel_dict(KernelPolicy()))
    lam: float = 1e-10
    max_iter: int = 30
    tol: float = 1e-3
    seed: int = 0
    init_scale: float = 1.0
    sweep: str | None = None
    values: list | None = None
    repeats: int = 1
    run_id: str = "run"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        kernel = dict(raw.pop("kernel", {}) or {})
        for key in [k for k in raw if k.startswith("kernel.")]:
            kernel[key.split(".", 1)[1]] = raw.pop(key)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in fields(cls)} - {"kernel"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        bad = sorted(set(kernel) - set(_kernel_dict(KernelPolicy())))
        if bad:
            raise ValueError(f"unknown kernel keys: {bad}")
        policy = KernelPolicy(**kernel)
        return cls(kernel=_kernel_dict(policy), **raw)

    @property
    def kernel_policy(self) -> KernelPolicy:
        return KernelPolicy(**self.kernel)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        _atomic_write_text(path, self.dumps())

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _kernel_dict(policy: KernelPolicy) -> dict:
    return asdict(policy)


METRIC_COLUMNS = ("run_id", "iteration", "objective", "residual", "sigma", "e", "ms", "psnr", "sample_sizes")


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def emit_metrics(trace, path, run_id: str = "run") -> None:
    """Write one CSV row per iteration of ``trace``.

    Rows of other run ids already in the file are kept; rows with the same
    run id are replaced, so re-running a command is idempotent.
    """
    path = Path(path)
    kept = []
    if path.exists():
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and tuple(header) != METRIC_COLUMNS:
                raise ValueError(f"{path}: existing metrics file has a different header")
            kept = [row for row in reader if row and row[0] != run_id]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    writer.writerows(kept)
    for r in trace.records:
        sizes = ";".join("x".join(str(s) for s in blk) for blk in r.sample_sizes)
        writer.writerow([
            run_id, r.iteration, _fmt(r.objective), _fmt(r.residual), _fmt(r.sigma),
            _fmt(r.e), f"{r.ms:.3f}", _fmt(r.psnr), sizes,
        ])
    _atomic_write_text(path, buf.getvalue())


def write_rows(path, header: Sequence[str], rows) -> None:
    """Atomically write a plain CSV table."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(v) for v in row] for row in rows])
    _atomic_write_text(path, buf.getvalue())
