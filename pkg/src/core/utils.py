"""
Degenerate Dirichlet Toolkit - Utility Functions
Helpers for hashing instances, convergence rates and CSV formatting
"""

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


def instance_hash(payload: Dict[str, Any]) -> str:
    """Deterministic 16-hex-digit hash of a JSON-serialisable instance description"""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def observed_rates(hs: Sequence[float], errors: Sequence[float]) -> List[Optional[float]]:
    """log(e_k / e_{k+1}) / log(h_k / h_{k+1}); first entry None"""
    rates: List[Optional[float]] = [None]
    for k in range(1, len(hs)):
        e0, e1 = errors[k - 1], errors[k]
        if e0 <= 0 or e1 <= 0:
            rates.append(None)
            continue
        rates.append(math.log(e0 / e1) / math.log(hs[k - 1] / hs[k]))
    return rates


def relative_change(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|), zero when both vanish"""
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def format_float(value: Any, spec: str = ".17g") -> str:
    if value is None:
        return ""
    return format(float(value), spec)


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], spec: str = ".17g"
) -> Path:
    """Write a CSV with every float formatted round-trip exactly"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v, spec) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path
