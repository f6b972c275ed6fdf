"""Simple file utilities with deterministic output"""
import hashlib
import json
import os


def ensure_dir(path):
    """Create a directory (and parents) if it doesn't exist"""
    os.makedirs(path, exist_ok=True)
    return path


def read_json(path):
    """Read a JSON document"""
    with open(path, encoding='utf-8') as handle:
        return json.load(handle)


def dumps_json(document):
    """Serialize with sorted keys so equal documents give equal bytes"""
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + '\n'


def write_json(path, document):
    """Write a JSON document"""
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(dumps_json(document))


def write_json_lines(path, records):
    """Write one compact JSON object per line"""
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + '\n')


def write_text(path, text):
    """Write plain text with unix newlines"""
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)


def write_frame(path, frame):
    """Write a DataFrame as CSV with a fixed float format"""
    frame.to_csv(path, index=False, float_format='%.10g', lineterminator='\n')


def file_sha256(path):
    """Hex digest of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()
