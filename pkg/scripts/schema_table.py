"""Print the configuration schema as a Markdown table (pasted into README.md)."""
from superradiance.config import SCHEMA


def table() -> str:
    lines = ["| key | unit | default | meaning |", "|---|---|---|---|"]
    lines += [f"| `{k}` | {u} | `{d}` | {m} |" for k, u, d, m in SCHEMA]
    return "\n".join(lines)


if __name__ == "__main__":
    print(table())
