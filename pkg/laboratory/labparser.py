# coding: utf-8
import ast
import datetime
import logging
import os
import re

from laboratory.exceptions import ConfigError

# Try to import chardet for encoding detection
try:
    from chardet import detect
except ImportError:
    detect = None


logger = logging.getLogger(__name__)


# Boolean transformation
booleans = {"yes": True, "no": False}

# Regex to remove comments in files
regex_comment = re.compile(r"(?P<space>\s*)#+(?P<comment>.*)$", re.MULTILINE)
# Regex to parse lines with format key=value
regex_line = re.compile(r"(?P<key>[A-Za-z_][\w\.]*)\s*=\s*(?P<value>.*)")
# Regex to split top-level items in a list
regex_separator = re.compile(r"[\s,]+")


def read_file(path, encoding="utf_8_sig"):
    """
    Try to read file with encoding
    If chardet is installed, encoding will be automatically detected
    :param path: Path to file
    :param encoding: Encoding
    :return: File content
    """
    if not os.path.exists(path) or not os.path.isfile(path):
        return
    if detect:
        with open(path, "rb") as file:
            raw_data = file.read()
        if (result := detect(raw_data)) and result["encoding"]:
            encoding = result["encoding"]
            logger.debug(f"Detected encoding: {result['encoding']} ({result['confidence']:0.0%})")
        del raw_data
    with open(path, encoding=encoding) as file:
        return file.read()


def convert_value(value):
    """
    Convert raw text to a Python value (booleans, numbers, lists, strings)
    :param value: Raw value
    :return: Converted value
    """
    value = value.strip()
    if (val := booleans.get(value.lower())) is not None:
        return val
    if value.startswith("[") and value.endswith("]"):
        items = [item for item in regex_separator.split(value[1:-1].strip()) if item]
        return [convert_value(item) for item in items]
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value.strip('"')


def parse_text(text, filename=None):
    """
    Parse raw text with lines "key = value", lists between brackets may span several lines
    :param text: Text to parse
    :param filename: (default none) Filename (only for debugging)
    :return: Parsed data as dictionary
    """
    data = {}
    text = regex_comment.sub("", text)
    pending, start = "", 0
    for line_number, line_text in enumerate(text.splitlines(), start=1):
        line_text = line_text.strip()
        # Nothing to do if line is empty
        if not line_text:
            continue
        if pending:
            pending = f"{pending} {line_text}"
        else:
            pending, start = line_text, line_number
        # Wait for the closing bracket of a multiline list
        if pending.count("[") > pending.count("]"):
            continue
        if not (match := regex_line.fullmatch(pending)):
            raise ConfigError(f"Unable to parse line {start} in {filename or 'text'}: {pending}")
        key, value = match.group("key"), match.group("value")
        if key in data:
            logger.warning(f"Duplicate key {key} at line {start} in {filename or 'text'}")
        data[key] = convert_value(value)
        pending = ""
    if pending:
        raise ConfigError(f"Unclosed list at line {start} in {filename or 'text'}")
    return data


def parse_file(path, encoding="utf_8_sig"):
    """
    Parse file
    :param path: Path to file to parse
    :param encoding: Encoding used to read file
    :return: Parsed data as dictionary
    """
    start_time = datetime.datetime.now()
    text = read_file(path, encoding)
    if text is None:
        raise ConfigError(f"Configuration file not found: {path}")
    logger.debug(f"Parsing {path}")
    data = parse_text(text, filename=path)
    total_time = (datetime.datetime.now() - start_time).total_seconds()
    logger.debug(f"Elapsed time: {total_time:0.3}s!")
    return data


def revert_value(value):
    """
    Revert values utility for revert function
    :param value: Value to revert
    :return: Reverted value
    """
    if isinstance(value, bool):
        return "yes" if value else "no"
    elif isinstance(value, (list, tuple)):
        return f"[{', '.join(map(revert_value, value))}]"
    elif isinstance(value, float):
        return repr(value)
    return str(value)


def revert(obj):
    """
    Revert a flat dictionary to configuration text
    :param obj: Dictionary
    :return: Text
    """
    return "".join(f"{key} = {revert_value(value)}\n" for key, value in obj.items())
