"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'} {number}: {detail}"
    LINES[:] = [s for s in LINES if not s.split()[1].startswith(f"{number}:")]
    LINES.append(line)
    print(line)
    return line
