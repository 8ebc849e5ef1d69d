"""Write the bundled demo event file (stdlib only, fixed seed)."""
import csv
import random
from pathlib import Path

rng = random.Random(1234)
# Sites around two towns; pairs of antennas 60-120 m apart get merged at ingest.
base = [(46.20, 6.14), (46.21, 6.16), (46.52, 6.63)]
sites = []
for lat0, lon0 in base:
    for _ in range(6):
        lat, lon = lat0 + rng.uniform(-0.02, 0.02), lon0 + rng.uniform(-0.03, 0.03)
        sites.append((lat, lon))
        if rng.random() < 0.4:
            sites.append((lat + rng.uniform(0.0005, 0.001), lon))

rows = []
for u in range(40):
    home = rng.randrange(len(sites))
    others = rng.sample(range(len(sites)), rng.randint(0, 5))
    for _ in range(rng.randint(1, 30)):
        ts = rng.randrange(0, 86400)
        s = home if ts < 25200 or ts > 68400 or not others else rng.choice(others)
        lat, lon = sites[s]
        rows.append([f"user{u:02d}", ts, f"{lat:.6f}", f"{lon:.6f}"])
rows.sort(key=lambda r: (r[1], r[0]))
rows.insert(17, ["user03", "not-a-time", "46.2", "6.1"])
rows.insert(50, ["user05", "1000", "95.0", "6.1"])
rows.insert(90, ["user07", "90000", "46.2", "6.1"])

out = Path(__file__).resolve().parents[1] / "src" / "leakmatch" / "data" / "demo_events.csv"
with open(out, "w", newline="", encoding="utf-8") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["user_id", "timestamp", "lat", "lon"])
    w.writerows(rows)
print(out, len(rows))
