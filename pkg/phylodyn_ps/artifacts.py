import os
import json
import math
import datetime
import logging

import numpy as np
import pandas as pd

from typing import Any

from auto_create_directories import AutoCreateDirectories

from phylodyn_ps import __version__

logger = logging.getLogger(__name__)

# Define constants
SIGNIFICANT_DIGITS: int = 9
FLOAT_FORMAT: str = f"%.{SIGNIFICANT_DIGITS}g"
MANIFEST_NAME: str = "manifest.json"

def round_significant(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    if not math.isfinite(value) or value == 0:
        return value
    return float(f"{value:.{digits}g}")

def to_serializable(value: Any) -> Any:
    """Converts numpy scalars, arrays, tuples and enums to JSON types, rounding floats to 9 significant digits."""
    if isinstance(value, dict):
        return {str(key): to_serializable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_serializable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return round_significant(float(value))
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    return value

def create_directory(path: str) -> str:
    """Creates `path` and any missing parents, returning its absolute path.

    Raises:
        OSError: If the directory does not exist afterwards.
    """
    path = os.path.abspath(path)
    missing = []
    current = path
    while not os.path.isdir(current):
        missing.append(current)
        parent = os.path.dirname(current)
        if parent == current:
            break
        current = parent

    dir_manager = AutoCreateDirectories(base_dir = __file__)
    for directory in reversed(missing):
        dir_manager.create(directory)
    if not os.path.isdir(path):
        raise OSError(f"Could not create output directory {path}.")
    return path

class ArtifactFrame:
    """
    A data frame backed by a CSV file: load and save, with numbers written at 9 significant digits.

    Args:
        path (str): The CSV file.
        columns (list[str], optional): Column order of the saved file. Defaults to None.
        init_with (pd.DataFrame, optional): Initial frame. Defaults to None.
    """

    frame: pd.DataFrame = None

    def __init__(self, path: str, columns: list[str] = None, init_with: pd.DataFrame = None) -> None:
        self.path = path
        self.columns = None if columns is None else list(columns)
        if init_with is not None:
            self.set_frame(init_with)

    def set_frame(self, df: pd.DataFrame|None) -> None:
        """Sets the frame.

        Raises:
            TypeError: If df is neither a data frame nor None.
            ValueError: If df lacks a required column.
        """
        if df is None:
            self.frame = None
        elif isinstance(df, pd.DataFrame):
            if self.columns is not None:
                missing = [column for column in self.columns if column not in df.columns]
                if missing:
                    raise ValueError(f"Frame for {self.path} lacks column(s) {missing}.")
                df = df[self.columns]
            self.frame = df.reset_index(drop = True).copy()
        else:
            raise TypeError(f"Cannot set ArtifactFrame.frame because invalid type {type(df)} has been given.")

    def load(self, force: bool = False) -> pd.DataFrame:
        """Reads the CSV file unless a frame is held already (or `force`); None if the file does not exist."""
        if self.frame is None or force:
            try:
                df = pd.read_csv(self.path)
            except FileNotFoundError:
                df = None
            self.set_frame(df)
        return self.frame

    def save(self) -> str:
        if not isinstance(self.frame, pd.DataFrame):
            raise ValueError(f"Nothing to save to {self.path}.")
        self.frame.to_csv(self.path, index = False, float_format = FLOAT_FORMAT)
        logger.info(f"Saved {len(self.frame)} rows to {self.path}")
        return self.path

class ArtifactWriter:
    """
    Writes the files of one run into an output directory, created on first use.

    Args:
        out_dir (str): The output directory.
    """

    def __init__(self, out_dir: str) -> None:
        self.out_dir = create_directory(out_dir)
        self.written: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_frame(self, name: str, df: pd.DataFrame, columns: list[str] = None) -> str:
        path = ArtifactFrame(self.path(name), columns = columns, init_with = df).save()
        self.written.append(name)
        return path

    def write_json(self, name: str, payload: dict) -> str:
        path = self.path(name)
        with open(path, "w") as fp:
            json.dump(to_serializable(payload), fp, indent = 2, sort_keys = True)
            fp.write("\n")
        self.written.append(name)
        logger.info(f"Saved {path}")
        return path

    def write_text(self, name: str, text: str) -> str:
        path = self.path(name)
        with open(path, "w") as fp:
            fp.write(text)
        self.written.append(name)
        return path

    def write_manifest(self, command: str, parameters: dict, seed: int = None) -> str:
        """Records the command, its parameters, the seed, the package version and the files written."""
        manifest = {
            "command": command,
            "parameters": parameters,
            "seed": seed,
            "version": __version__,
            "outputs": sorted(set(self.written)),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec = "seconds"),
        }
        return self.write_json(MANIFEST_NAME, manifest)
