import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from paidposter.corpus import CommentRecord, UserProfile  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rec(user="u1", t=0, report="R1", seq=None, content="hello world", reply=False, loc=""):
    rec.counter += 1
    return CommentRecord(report, rec.counter if seq is None else seq, t, loc, user, content, reply)


rec.counter = 0


def profile_from(times, user="u1", replies=None, reports=None, contents=None):
    n = len(times)
    replies = replies or [False] * n
    reports = reports or ["R1"] * n
    contents = contents or [f"comment {k}" for k in range(n)]
    return UserProfile(user, tuple(
        rec(user, t, r, content=c, reply=rp) for t, r, c, rp in zip(times, reports, contents, replies)
    ))


@pytest.fixture
def make_profile():
    return profile_from
