"""Independent stdlib-only recomputation of the demo corpus statistics.

Shares no code with the package: own CSV parsing, projection, union-find
site merging and floor discretization. Run it to refresh the golden file.
"""
import csv
import json
import math
from pathlib import Path

R = 6371000.0
DELTA_XY, DELTA_T, MERGE = 200.0, 300, 150.0
DATA = Path(__file__).resolve().parents[2] / "src" / "leakmatch" / "data"


def compute(path):
    rows, rejected = [], 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            try:
                u, ts, lat, lon = row[0], int(row[1]), float(row[2]), float(row[3])
            except (ValueError, IndexError):
                rejected += 1
                continue
            if abs(lat) > 90 or abs(lon) > 180 or not (0 <= ts < 86400):
                rejected += 1
                continue
            rows.append((u, ts, lat, lon))
    lat0 = min(r[2] for r in rows)
    lon0 = min(r[3] for r in rows)
    k = math.cos(math.radians(lat0))

    def proj(lat, lon):
        return (R * k * math.radians(lon - lon0), R * math.radians(lat - lat0))

    pts = sorted({proj(r[2], r[3]) for r in rows})
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if math.dist(pts[i], pts[j]) < MERGE:
                parent[find(i)] = find(j)
    groups = {}
    for i, p in enumerate(pts):
        groups.setdefault(find(i), []).append(p)
    rep = {}
    for members in groups.values():
        c = (sum(m[0] for m in members) / len(members), sum(m[1] for m in members) / len(members))
        for m in members:
            rep[m] = c
    reps = [rep[proj(r[2], r[3])] for r in rows]
    ox = math.floor(min(p[0] for p in reps))
    oy = math.floor(min(p[1] for p in reps))
    traces = {}
    for r, p in zip(rows, reps):
        cell = (math.floor((p[0] - ox) / DELTA_XY), math.floor((p[1] - oy) / DELTA_XY))
        traces.setdefault(r[0], set()).add((cell[0], cell[1], r[1] // DELTA_T))
    events = {}
    for r in rows:
        events[r[0]] = events.get(r[0], 0) + 1
    return {
        "num_users": len(traces),
        "num_events": len(rows),
        "num_raw_sites": len(pts),
        "num_sites": len(groups),
        "rejected_records": rejected,
        "num_tuples": sum(len(t) for t in traces.values()),
        "events_per_user_mean": len(rows) / len(traces),
        "unique_cells_per_user_mean": sum(len({(x, y) for x, y, _ in t}) for t in traces.values()) / len(traces),
        "grid_origin": [float(ox), float(oy)],
        "projection_origin": [lat0, lon0],
    }


if __name__ == "__main__":
    golden = compute(DATA / "demo_events.csv")
    (DATA / "demo_events.golden.json").write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(json.dumps(golden, indent=2))
