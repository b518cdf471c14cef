import json

from typing import Any

from phylodyn_ps.exceptions import PhylodynError

# Define constants
DEFAULT_SEED: int = 7
DEFAULT_N: int = 200
DEFAULT_WINDOW: str = "0:48"
DEFAULT_GRID: int = 100
DEFAULT_EVAL_POINTS: int = 300
DEFAULT_REPLICATES: int = 50
DEFAULT_INTERVALS: str = "0:6,6:48"
DEFAULT_SCHEDULES: str = "uniform,proportional"
DEFAULT_CONTROLS: str = "piecewise,bm"
DEFAULT_MODELS: str = "bnpr,bnpr-ps"
DEFAULT_SEASON_A: float = 2.0
DEFAULT_SEASON_O: float = 0.0
DEFAULT_BETA1: float = 2.0
DEFAULT_OUT: str = "out"

class ConfigError(PhylodynError):
    pass

def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")

def _flag_value(value: Any, keep_list: bool = False) -> Any:
    """Renders JSON lists the way the corresponding flag is written: [0, 48] as "0:48", lists as comma separated.

    Options taking several values (``nargs="+"``) keep their list, one string per item.
    """
    if isinstance(value, list):
        if keep_list:
            return [str(item) for item in value]
        if len(value) == 2 and all(isinstance(item, (int, float)) for item in value):
            return f"{value[0]}:{value[1]}"
        return ",".join(str(_flag_value(item)) for item in value)
    if keep_list:
        return [str(value)]
    return value

def load_config(path: str, allowed: set[str] = None, multi_valued: set[str] = None) -> dict[str, Any]:
    """Reads a JSON object whose keys are long flag names, with dashes or underscores.

    Args:
        path (str): The JSON file.
        allowed (set[str], optional): Accepted keys (underscored). Defaults to None, accepting any.
        multi_valued (set[str], optional): Keys of options taking several values, which stay lists. Defaults to None.

    Raises:
        ConfigError: If the file is not a JSON object or names an unknown option.
        OSError: If the file cannot be read.

    Returns:
        dict[str, Any]: Values keyed by argument destination.
    """
    multi_valued = multi_valued or set()
    with open(path) as fp:
        try:
            content = json.load(fp)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}", error = {"path": path})
    if not isinstance(content, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object.", error = {"path": path})

    values = {}
    for key, value in content.items():
        key = normalize_key(key)
        values[key] = _flag_value(value, keep_list = key in multi_valued)
    if allowed is not None:
        unknown = sorted(set(values) - set(allowed))
        if unknown:
            raise ConfigError(f"Unknown option(s) in {path}: {unknown}.", error = {"path": path, "unknown": unknown})
    return values
