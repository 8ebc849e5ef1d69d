"""Regenerate the selftest goldens: match counts come from the naive full scan."""
import json
from pathlib import Path

from leakmatch.matcher import estimate_rho
from leakmatch.selftest import SELFTEST_LEAKS, selftest_corpus

ds = selftest_corpus()
report = estimate_rho(ds, method="naive", **SELFTEST_LEAKS)
golden = {"checksum": ds.checksum(), "nu": [r.nu for r in report.records]}
out = Path(__file__).resolve().parents[1] / "src" / "leakmatch" / "data" / "selftest_golden.json"
out.write_text(json.dumps(golden) + "\n")
print(out, len(golden["nu"]), golden["checksum"])
