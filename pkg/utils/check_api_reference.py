import sys

import rarevent

ret = 0

PAGES = (
    "docs/api-reference/rarevent.md",
    "docs/api-reference/settings.md",
    "docs/api-reference/strategies.md",
    "docs/api-reference/models.md",
)

public = {i for i in rarevent.__all__ if i[0] != "_"}
documented: list[str] = []
for page in PAGES:
    with open(page) as fd:
        content = fd.read()
    documented.extend(
        i.removeprefix("        - ")
        for i in content.splitlines()
        if i.startswith("        - ")
    )

if missing := public.difference(documented):
    print("rarevent: not documented")  # noqa: T201
    print(missing)  # noqa: T201
    ret = 1
if extra := set(documented).difference(public):
    print("rarevent: outdated")  # noqa: T201
    print(extra)  # noqa: T201
    ret = 1
if duplicated := {i for i in documented if documented.count(i) > 1}:
    print("rarevent: documented twice")  # noqa: T201
    print(duplicated)  # noqa: T201
    ret = 1

sys.exit(ret)
