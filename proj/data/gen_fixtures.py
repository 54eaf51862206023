#!/usr/bin/env python3
"""Regenerates the calibrated parts of the bundled datasets.

table1.csv: the monthly caller counts and percentages are transcribed; the
`registrations` column is not published and is calibrated here as the
integer nearest to callers * 100 / percent (halves round up).

weekly_k.csv: synthetic weekly windows from 2014-05-05 to 2014-08-25.
Twelve weeks precede the 2014-07-28 cutoff and five follow it. Active users
alternate 1000/1500 per week, invitations sent are a quarter of the active
users, and invited registrations are k * active users for a per-week k drawn
from a fixed list whose mean is 2.2% before and 3.8% after the cutoff. Every
k is a multiple of 0.2% so k * users is an integer for both user sizes.

Run from this directory: python3 gen_fixtures.py
"""
import csv
import datetime
from fractions import Fraction

TABLE1 = [
    ("2013-12-01", "2013-12-31", 93, 7),
    ("2014-01-01", "2014-01-31", 734, 16),
    ("2014-02-01", "2014-02-28", 61, 22),
    ("2014-03-01", "2014-03-31", 15, 12),
    ("2014-04-01", "2014-04-30", 251, 22),
    ("2014-05-01", "2014-05-31", 1026, 26),
    ("2014-06-01", "2014-06-30", 2037, 25),
    ("2014-07-01", "2014-07-31", 2072, 18),
    ("2014-08-01", "2014-08-31", 722, 15),
]

BEFORE_K = ["1.0", "1.2", "1.4", "1.8", "2.0", "2.2", "2.2", "2.4", "2.6", "3.0", "3.2", "3.4"]
AFTER_K = ["3.0", "3.4", "3.8", "4.2", "4.6"]


def round_half_up(x: Fraction) -> int:
    return int(x + Fraction(1, 2))


def write_table1():
    with open("table1.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["month_start", "month_end", "new_users_calling", "percent_calling", "registrations"])
        for start, end, callers, pct in TABLE1:
            w.writerow([start, end, callers, pct, round_half_up(Fraction(callers * 100, pct))])


def write_weekly():
    start = datetime.date(2014, 5, 5)
    ks = BEFORE_K + AFTER_K
    assert sum(Fraction(k) for k in BEFORE_K) / len(BEFORE_K) == Fraction("2.2")
    assert sum(Fraction(k) for k in AFTER_K) / len(AFTER_K) == Fraction("3.8")
    with open("weekly_k.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["week_start", "active_users", "invites_sent", "invited_registrations"])
        for n, k in enumerate(ks):
            users = 1000 if n % 2 == 0 else 1500
            invited = Fraction(k) / 100 * users
            assert invited.denominator == 1
            w.writerow([(start + datetime.timedelta(weeks=n)).isoformat(), users, users // 4, int(invited)])


if __name__ == "__main__":
    write_table1()
    write_weekly()
