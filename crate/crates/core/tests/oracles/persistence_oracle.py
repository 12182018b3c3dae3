"""Persistence-forecast metrics for a bar CSV, computed independently with numpy.

Usage: python persistence_oracle.py BARS.csv [SEQ_LEN LABEL_LEN PRED_LEN]
Prints normalized and raw MAE, RMSE, MAPE over all test windows at stride 1.
"""
import sys

import numpy as np


def main():
    path = sys.argv[1]
    seq_len, _label_len, pred_len = (int(x) for x in (sys.argv[2:5] or (96, 48, 24)))
    close = np.genfromtxt(path, delimiter=",", skip_header=1, usecols=4)
    n = len(close)
    n_train = int(np.floor(0.7 * n + 0.5))
    n_val = int(np.floor(0.1 * n + 0.5))
    mean = close[:n_train].mean()
    std = close[:n_train].std()
    test = close[n_train + n_val:]
    starts = range(len(test) - seq_len - pred_len + 1)
    truth = np.array([test[s + seq_len:s + seq_len + pred_len] for s in starts])
    last = np.array([[test[s + seq_len - 1]] * pred_len for s in starts])
    for name, p, t in (("normalized", (last - mean) / std, (truth - mean) / std), ("raw", last, truth)):
        err = p - t
        mae = np.abs(err).mean()
        rmse = np.sqrt((err ** 2).mean())
        mape = 100.0 * np.abs(err / t).mean()
        print(f"{name} n={err.size} mae={float(mae)!r} rmse={float(rmse)!r} mape={float(mape)!r}")


if __name__ == "__main__":
    main()
