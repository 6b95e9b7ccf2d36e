"""
Regenerate ``movietweetings_train.dat`` (1,000 lines) and
``movietweetings_test.dat`` in the ``user::item::rating::timestamp`` layout.

IDs mimic the real files (numeric users, 7-digit IMDB item ids); every test
line uses a user and an item that also occur in the training file.
"""

from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def main(seed=20141107, n_train=1000, n_test=150):
    rng = np.random.default_rng(seed)
    users = rng.choice(np.arange(1, 60000), size=120, replace=False)
    items = rng.choice(np.arange(100000, 3000000), size=200, replace=False)
    cells = rng.choice(len(users) * len(items), size=n_train + n_test, replace=False)
    u_idx, i_idx = np.divmod(cells, len(items))
    ratings = np.clip(np.round(rng.normal(7.3, 1.8, len(cells))), 0, 10).astype(int)
    stamps = 1362062307 + np.sort(rng.integers(0, 50_000_000, len(cells)))

    lines = [
        f"{users[u]}::{items[i]:07d}::{r}::{t}"
        for u, i, r, t in zip(u_idx, i_idx, ratings, stamps)
    ]
    train, test = lines[:n_train], lines[n_train:]
    seen_u = {ln.split("::")[0] for ln in train}
    seen_i = {ln.split("::")[1] for ln in train}
    test = [ln for ln in test if ln.split("::")[0] in seen_u and ln.split("::")[1] in seen_i]
    (HERE / "movietweetings_train.dat").write_text("\n".join(train) + "\n", encoding="utf-8")
    (HERE / "movietweetings_test.dat").write_text("\n".join(test) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
