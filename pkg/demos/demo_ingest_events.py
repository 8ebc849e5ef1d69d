"""
From raw events to a corpus
===========================

Raw records are (user, timestamp, lat, lon). Sites closer than 150 m are
merged into one, positions are projected to a local plane, and events are
discretized into (cell, bin) tuples. The bundled CSV has a few malformed
rows on purpose.
"""

from importlib import resources

from leakmatch import DiscretizationConfig
from leakmatch.analysis import mobility_stats
from leakmatch.ingest import build_traces, read_events_csv

path = resources.files("leakmatch").joinpath("data/demo_events.csv")
table, rejected = read_events_csv(path)
print("rows kept:", len(table.user), " rejected:", rejected)

ds = build_traces(table, DiscretizationConfig(delta_xy=100.0, delta_t=900), rejected=rejected)
for k, v in ds.stats().items():
    print("  %-24s %s" % (k, v))

user = ds.users[0]
print("\n", user, mobility_stats(ds[user], ds.cfg))
