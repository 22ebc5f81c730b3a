# coding: utf-8
import csv
import json
import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# Stable element identifiers, so that identical runs produce identical files
matplotlib.rcParams["svg.hashsalt"] = "dissipationlab"


def format_value(value):
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.12g}"
    return value


def write_csv(path, fieldnames, rows):
    """
    Write rows (dictionaries) with a header naming the columns
    :param path: Path to file
    :param fieldnames: Column names
    :param rows: Iterable of dictionaries
    :return: Number of rows
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", newline="") as file:
        writer = csv.DictWriter(file, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(value) for key, value in row.items()})
            count += 1
    logger.debug(f"{count} row(s) written to {path}")
    return count


def write_json(path, data):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as file:
        json.dump(data, file, indent=4, sort_keys=True, default=float)


def write_text(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as file:
        file.write(text)


def plot(path, series, xlabel, ylabel, title=None, logx=False, logy=True, markers=()):
    """
    Write a self-contained SVG plot
    :param path: Path to file
    :param series: Iterable of (x, y, label)
    :param xlabel: Label of the x axis
    :param ylabel: Label of the y axis
    :param title: Title
    :param logx: Logarithmic x axis
    :param logy: Logarithmic y axis
    :param markers: Iterable of (x, y, label) drawn as points
    """
    figure, axis = plt.subplots(figsize=(7, 4.5))
    try:
        for x, y, label in series:
            axis.plot(x, y, label=label, linewidth=1.2)
        for x, y, label in markers:
            axis.plot(x, y, "o", label=label)
        axis.set_xscale("log" if logx else "linear")
        axis.set_yscale("log" if logy else "linear")
        axis.set_xlabel(xlabel)
        axis.set_ylabel(ylabel)
        if title:
            axis.set_title(title)
        axis.grid(True, which="both", alpha=0.3)
        axis.legend(fontsize="small")
        figure.tight_layout()
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        figure.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(figure)
    logger.debug(f"Plot written to {path}")
