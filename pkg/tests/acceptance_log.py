"""Collects one summary line per acceptance criterion."""

LINES: list[str] = []


def record(number: int, title: str, passed: bool, elapsed: float, limit: float, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[{status}] criterion {number:>2}: {title} ({elapsed:.2f}s / {limit:g}s)"
    if detail:
        line += f" {detail}"
    LINES.append(line)
    print(line)
