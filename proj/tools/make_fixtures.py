#!/usr/bin/env python3
"""Regenerate the synthetic fixtures under tests/data.

nba_synthetic.csv   30-team season in the match-file format; outcomes revert
                    against the previous month's win share, so the win rate
                    falls as win_share_diff grows.
nba_projections.csv synthetic preseason win shares (not real projections).
monotone_up.csv     records file whose win rate rises with x0.
monotone_down.csv   records file whose win rate falls with x0.
"""
import datetime as dt
import math
import random
import sys
from pathlib import Path

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "data"

TEAMS = [
    "ATL", "BKN", "BOS", "CHA", "CHI", "CLE", "DAL", "DEN", "DET", "GSW",
    "HOU", "IND", "LAC", "LAL", "MEM", "MIA", "MIL", "MIN", "NOP", "NYK",
    "OKC", "ORL", "PHI", "PHX", "POR", "SAC", "SAS", "TOR", "UTA", "WAS",
]


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def schedule(rng):
    pairs = [(h, a) for h in TEAMS for a in TEAMS if h != a]
    extra = [tuple(rng.sample(TEAMS, 2)) for _ in range(360)]
    games = pairs + extra
    rng.shuffle(games)
    start = dt.date(2018, 10, 16)
    days = [start + dt.timedelta(days=k) for k in range(176)]
    busy = {d: set() for d in days}
    out = []
    for h, a in games:
        for _ in range(1000):
            d = rng.choice(days)
            if h not in busy[d] and a not in busy[d] and len(busy[d]) < 16:
                busy[d].update((h, a))
                out.append((d, h, a))
                break
    out.sort()
    return out


def nba(rng):
    theta = {t: rng.gauss(0.0, 0.25) for t in TEAMS}
    proj = {t: min(0.85, max(0.15, 0.5 + 0.4 * theta[t] + rng.gauss(0.0, 0.05))) for t in TEAMS}
    games = schedule(rng)
    tallies = {}
    last = {}
    rows = []

    def share(team, month):
        months = sorted(m for m in tallies.get(team, {}) if m < month)
        if not months:
            return proj[team]
        w, g = tallies[team][months[-1]]
        return w / g

    for d, h, a in games:
        month = d.strftime("%Y-%m")
        x0 = share(h, month) - share(a, month)
        prev = last.get(a)
        b2b = -1.0 if prev and prev[1] and prev[0] + dt.timedelta(days=1) == d else 0.0
        index = theta[h] - theta[a] + 0.25 + 0.3 * b2b - 3.2 * x0
        won = 1 if rng.random() < logistic(index) else 0
        rows.append((d.isoformat(), h, a, won))
        for team, w in ((h, won), (a, 1 - won)):
            tw, tg = tallies.setdefault(team, {}).get(month, (0, 0))
            tallies[team][month] = (tw + w, tg + 1)
        last[h] = (d, False)
        last[a] = (d, True)

    with open(OUT / "nba_synthetic.csv", "w") as f:
        f.write("# synthetic season; not real game results\n")
        f.write("date,home,away,home_won\n")
        for r in rows:
            f.write("%s,%s,%s,%d\n" % r)
    with open(OUT / "nba_projections.csv", "w") as f:
        f.write("# synthetic preseason projections; not published values\n")
        f.write("item,win_share\n")
        for t in TEAMS:
            f.write("%s,%.3f\n" % (t, proj[t]))


def monotone(rng, name, slope):
    n = 12
    with open(OUT / name, "w") as f:
        f.write("head,tail,occasion,outcome,x0,z1\n")
        for i in range(n):
            for j in range(i + 1, n):
                for t in range(1, 6):
                    x0 = rng.uniform(-2.0, 2.0)
                    z1 = rng.gauss(0.0, 1.0)
                    won = 1 if rng.random() < logistic(slope * x0 + 0.2 * z1) else 0
                    f.write("%d,%d,%d,%d,%.6f,%.6f\n" % (i, j, t, won, x0, z1))


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    nba(random.Random(2018))
    monotone(random.Random(7), "monotone_up.csv", 2.0)
    monotone(random.Random(8), "monotone_down.csv", -2.0)
