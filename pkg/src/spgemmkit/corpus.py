"""Reference-matrix corpus: download, cache, and verify the twelve
SuiteSparse matrices whose self-product statistics anchor the test suite.

Each entry records the published row/nonzero counts plus the expected
intermediate-product count and nnz of A*A. For two road/p2p graphs the
published nnz(A*A) equals nnz(A), which does not match what the product
actually produces; those two expectations are flagged informational and
verification reports them without failing.

Files land under SPGEMM_CORPUS_DIR (default ~/.cache/spgemmkit/corpus) as
extracted .mtx files next to a checksum manifest. Checksums are recorded on
first successful download and enforced afterwards.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tarfile
from dataclasses import dataclass
from pathlib import Path

from .core import CsrMatrix
from .engine import SpgemmConfig, allocation_phase, count_intermediate_products, group_rows
from .errors import DownloadError, MismatchError
from .mmio import load_csr_cache, load_matrix_market, save_csr_cache

__all__ = [
    "CorpusEntry",
    "CORPUS",
    "corpus_dir",
    "matrix_path",
    "fetch",
    "load",
    "verify",
    "available_entries",
]

ENV_CORPUS_DIR = "SPGEMM_CORPUS_DIR"
ENV_BIG_MATRICES = "SPGEMMKIT_BIG_MATRICES"
MANIFEST_NAME = "checksums.json"
_MIRROR = "https://sparse.tamu.edu/MM"


@dataclass(frozen=True)
class CorpusEntry:
    """One reference matrix and its published self-product statistics."""

    name: str
    group: str
    rows: int
    nnz: int
    total_ip: int
    nnz_a2: int
    nnz_a2_informational: bool = False
    large_memory: bool = False

    @property
    def url(self) -> str:
        return f"{_MIRROR}/{self.group}/{self.name}.tar.gz"

    @property
    def filename(self) -> str:
        return f"{self.name}.mtx"


CORPUS: tuple[CorpusEntry, ...] = (
    CorpusEntry("roadNet-TX", "SNAP", 1_393_383, 3_843_320,
                12_099_370, 3_843_320, nnz_a2_informational=True),
    CorpusEntry("p2p-Gnutella04", "SNAP", 10_879, 39_994,
                180_230, 39_994, nnz_a2_informational=True),
    CorpusEntry("amazon0601", "SNAP", 403_394, 3_387_388,
                32_373_599, 16_258_436),
    CorpusEntry("web-Google", "SNAP", 916_428, 5_105_039,
                60_687_836, 29_710_164),
    CorpusEntry("scircuit", "Hamm", 170_998, 958_936,
                8_676_313, 5_222_525),
    CorpusEntry("cit-Patents", "SNAP", 3_774_768, 16_518_948,
                82_152_992, 68_848_721),
    CorpusEntry("mac_econ_fwd500", "Williams", 206_500, 1_273_389,
                7_556_897, 6_704_899),
    CorpusEntry("webbase-1M", "Williams", 1_000_005, 3_105_536,
                69_524_195, 51_111_996),
    CorpusEntry("wb-edu", "Gleich", 9_845_725, 57_156_537,
                1_559_579_990, 630_077_764, large_memory=True),
    CorpusEntry("cage15", "vanHeukelum", 5_154_859, 99_199_551,
                2_078_631_615, 929_023_247, large_memory=True),
    CorpusEntry("pwtk", "Boeing", 217_918, 11_634_424,
                626_054_402, 32_772_236),
    CorpusEntry("pdb1HYS", "Williams", 36_417, 4_344_765,
                555_322_659, 19_594_581),
)

_ALIASES = {
    "roadtx": "roadNet-TX",
    "economics": "mac_econ_fwd500",
    "wind tunnel": "pwtk",
    "wind-tunnel": "pwtk",
    "windtunnel": "pwtk",
    "protein": "pdb1HYS",
}


def entry_for(name: str) -> CorpusEntry:
    wanted = _ALIASES.get(name.lower(), name)
    for entry in CORPUS:
        if entry.name.lower() == wanted.lower():
            return entry
    known = ", ".join(e.name for e in CORPUS)
    raise DownloadError(f"unknown corpus matrix {name!r}; known: {known}")


def corpus_dir() -> Path:
    override = os.environ.get(ENV_CORPUS_DIR)
    if override:
        return Path(override)
    return Path.home() / ".cache" / "spgemmkit" / "corpus"


def matrix_path(entry: CorpusEntry) -> Path:
    return corpus_dir() / entry.filename


def _load_manifest(root: Path) -> dict:
    path = root / MANIFEST_NAME
    if path.exists():
        return json.loads(path.read_text())
    return {}


def _store_manifest(root: Path, manifest: dict) -> None:
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def fetch(name: str, force: bool = False) -> Path:
    """Download and extract one corpus matrix; returns the .mtx path.

    The archive's checksum is recorded on first download and verified on
    later fetches. Already-present files are kept unless force is set.
    """
    entry = entry_for(name)
    root = corpus_dir()
    root.mkdir(parents=True, exist_ok=True)
    target = matrix_path(entry)
    if target.exists() and not force:
        return target

    import requests

    try:
        response = requests.get(entry.url, timeout=300)
        response.raise_for_status()
    except Exception as exc:
        raise DownloadError(f"could not download {entry.url}: {exc}") from exc

    payload = response.content
    digest = hashlib.sha256(payload).hexdigest()
    manifest = _load_manifest(root)
    recorded = manifest.get(entry.name)
    if recorded is not None and recorded != digest:
        raise DownloadError(
            f"checksum mismatch for {entry.name}: manifest has {recorded}, "
            f"downloaded {digest}")

    try:
        with tarfile.open(fileobj=io.BytesIO(payload), mode="r:gz") as tar:
            member = next(
                (m for m in tar.getmembers()
                 if m.name.endswith(f"/{entry.filename}") or m.name == entry.filename),
                None)
            if member is None:
                raise DownloadError(
                    f"archive for {entry.name} does not contain {entry.filename}")
            extracted = tar.extractfile(member)
            if extracted is None:
                raise DownloadError(f"could not read {member.name} from the archive")
            target.write_bytes(extracted.read())
    except tarfile.TarError as exc:
        raise DownloadError(f"bad archive for {entry.name}: {exc}") from exc

    manifest[entry.name] = digest
    _store_manifest(root, manifest)
    return target


def load(name: str) -> CsrMatrix:
    """Load a corpus matrix from the local cache (binary CSR sidecar when
    present, otherwise parsed from Matrix Market and cached)."""
    entry = entry_for(name)
    mtx = matrix_path(entry)
    cache = mtx.with_suffix(".csr")
    if cache.exists():
        return load_csr_cache(cache)
    if not mtx.exists():
        raise DownloadError(
            f"{entry.name} is not in the corpus directory {corpus_dir()}; "
            f"run fetch first")
    matrix = load_matrix_market(mtx)
    save_csr_cache(cache, matrix)
    return matrix


def available_entries(include_large: bool | None = None) -> list[CorpusEntry]:
    """Entries whose .mtx files are present locally. Large-memory matrices
    are included only when requested (default: SPGEMMKIT_BIG_MATRICES=1)."""
    if include_large is None:
        include_large = os.environ.get(ENV_BIG_MATRICES, "") not in ("", "0")
    out = []
    for entry in CORPUS:
        if entry.large_memory and not include_large:
            continue
        if matrix_path(entry).exists():
            out.append(entry)
    return out


def verify(name: str, config: SpgemmConfig | None = None) -> dict:
    """Check a local corpus matrix against its published statistics.

    Row and nonzero counts must match exactly. The self-product's
    intermediate-product total must match exactly, as must nnz(A*A) computed
    by the allocation pass - except for the two entries whose published
    nnz(A*A) is flagged informational, where the comparison is reported but
    not enforced. Raises MismatchError on any enforced mismatch.
    """
    entry = entry_for(name)
    matrix = load(name)
    report = {
        "name": entry.name,
        "rows": matrix.n_rows,
        "nnz": matrix.nnz,
        "expected_rows": entry.rows,
        "expected_nnz": entry.nnz,
    }
    if matrix.n_rows != entry.rows:
        raise MismatchError(f"{entry.name}: row count mismatch",
                            expected=entry.rows, actual=matrix.n_rows)
    if matrix.nnz != entry.nnz:
        raise MismatchError(f"{entry.name}: nonzero count mismatch",
                            expected=entry.nnz, actual=matrix.nnz)

    ip = count_intermediate_products(matrix, matrix)
    total_ip = int(ip.sum())
    report["total_ip"] = total_ip
    report["expected_total_ip"] = entry.total_ip
    if total_ip != entry.total_ip:
        raise MismatchError(f"{entry.name}: intermediate-product total mismatch",
                            expected=entry.total_ip, actual=total_ip)

    plan = group_rows(ip, config)
    row_ptr = allocation_phase(matrix, matrix, plan, config)
    nnz_a2 = int(row_ptr[-1])
    report["nnz_a2"] = nnz_a2
    report["expected_nnz_a2"] = entry.nnz_a2
    report["nnz_a2_informational"] = entry.nnz_a2_informational
    report["nnz_a2_matches"] = nnz_a2 == entry.nnz_a2
    if not entry.nnz_a2_informational and nnz_a2 != entry.nnz_a2:
        raise MismatchError(f"{entry.name}: nnz(A*A) mismatch",
                            expected=entry.nnz_a2, actual=nnz_a2)
    return report
